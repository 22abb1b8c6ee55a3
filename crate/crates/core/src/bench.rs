//! Monte-Carlo sweeps of the localizer over noise and outlier levels.

use std::io::Write;

use crate::error::{Error, Result};
use crate::eval::{median, position_error, rotation_error};
use crate::localizer::{localize_ransac, LocalizerConfig};
use crate::pipeline::stream_rng;
use crate::simulator::{generate_scene, synth_pairs, Geometry, NoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub trials: usize,
    pub db_images: usize,
    pub points: usize,
    pub geometry: Geometry,
    pub rotation_noise: f64,
    /// Degrees; one grid axis.
    pub direction_noise: Vec<f64>,
    /// Fractions of corrupted pairs; the other grid axis.
    pub outlier_fraction: Vec<f64>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            trials: 100,
            db_images: 5,
            points: 50,
            geometry: Geometry::General,
            rotation_noise: 0.0,
            direction_noise: vec![0.0, 1.0, 2.0, 5.0],
            outlier_fraction: vec![0.0, 0.2, 0.4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub direction_noise: f64,
    pub rotation_noise: f64,
    pub outlier_fraction: f64,
    pub trials: usize,
    pub failures: usize,
    /// Trials whose inlier pairs are exactly the uncorrupted pairs.
    pub exact_inlier_sets: usize,
    pub median_position: f64,
    pub median_rotation: f64,
}

/// Runs every grid cell. Trial `t` of cell `c` uses random stream
/// `c * trials + t`.
pub fn run_bench(spec: &BenchSpec, cfg: &LocalizerConfig, seed: u64) -> Result<Vec<BenchRow>> {
    if spec.trials == 0 {
        return Err(Error::Config("bench needs at least one trial".into()));
    }
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &direction_noise in &spec.direction_noise {
        for &outlier_fraction in &spec.outlier_fraction {
            let noise = NoiseSpec {
                direction_noise,
                rotation_noise: spec.rotation_noise,
                outlier_pair_fraction: outlier_fraction,
                ..NoiseSpec::default()
            };
            let mut pos = Vec::with_capacity(spec.trials);
            let mut rot = Vec::with_capacity(spec.trials);
            let mut failures = 0;
            let mut exact = 0;
            for t in 0..spec.trials {
                let mut rng = stream_rng(seed, cell * spec.trials as u64 + t as u64);
                let scene = generate_scene(spec.points, spec.db_images, spec.geometry, &mut rng)?;
                let pairs = synth_pairs(&scene, &noise, &mut rng)?;
                match localize_ransac(&pairs.pairs, cfg, &mut rng) {
                    Ok(res) => {
                        pos.push(position_error(&res.pose, &scene.query_pose));
                        rot.push(rotation_error(&res.pose, &scene.query_pose));
                        let truth: Vec<usize> = (0..spec.db_images)
                            .filter(|k| !pairs.outlier_indices.contains(k))
                            .collect();
                        if res.inlier_pairs == truth {
                            exact += 1;
                        }
                    }
                    Err(Error::LocalizationFailed(_) | Error::InsufficientPairs(_)) => {
                        failures += 1;
                        pos.push(f64::INFINITY);
                        rot.push(f64::INFINITY);
                    }
                    Err(e) => return Err(e),
                }
            }
            rows.push(BenchRow {
                direction_noise,
                rotation_noise: spec.rotation_noise,
                outlier_fraction,
                trials: spec.trials,
                failures,
                exact_inlier_sets: exact,
                median_position: median(&pos),
                median_rotation: median(&rot),
            });
            cell += 1;
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "direction_noise_deg",
        "rotation_noise_deg",
        "outlier_fraction",
        "trials",
        "failures",
        "exact_inlier_sets",
        "median_position_m",
        "median_rotation_deg",
    ])
    .map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.direction_noise.to_string(),
            r.rotation_noise.to_string(),
            r.outlier_fraction.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            r.exact_inlier_sets.to_string(),
            r.median_position.to_string(),
            r.median_rotation.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid() {
        let spec = BenchSpec {
            trials: 10,
            direction_noise: vec![0.0, 2.0],
            outlier_fraction: vec![0.0, 0.4],
            ..BenchSpec::default()
        };
        let rows = run_bench(&spec, &LocalizerConfig::default(), 5).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].median_position < 1e-8);
        assert_eq!(rows[0].exact_inlier_sets, 10);
        assert!(rows[2].median_position > rows[0].median_position);
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
        assert_eq!(rows, run_bench(&spec, &LocalizerConfig::default(), 5).unwrap());
    }
}
