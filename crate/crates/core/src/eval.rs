//! Median pose-error metrics.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{angular_distance, Pose};
use crate::io::QueryResult;

/// Published reference numbers kept for side-by-side report output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub method: &'static str,
    pub dataset: &'static str,
    pub position_m: f64,
    pub rotation_deg: f64,
}

pub const BASELINES: [Baseline; 2] = [
    Baseline {
        method: "SIFT+5Pt",
        dataset: "Cambridge Landmarks",
        position_m: 0.47,
        rotation_deg: 0.88,
    },
    Baseline {
        method: "SIFT+5Pt",
        dataset: "7-Scenes",
        position_m: 0.08,
        rotation_deg: 1.99,
    },
];

/// Median; an even count averages the two central values. NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn position_error(estimate: &Pose, truth: &Pose) -> f64 {
    (estimate.center() - truth.center()).norm()
}

pub fn rotation_error(estimate: &Pose, truth: &Pose) -> f64 {
    angular_distance(&estimate.rotation, &truth.rotation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEval {
    pub name: String,
    pub queries: usize,
    pub failures: usize,
    pub median_position: f64,
    pub median_rotation: f64,
}

impl SceneEval {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.queries as f64
    }
}

/// Scores one scene. Failed queries enter the medians with infinite error.
pub fn evaluate_scene(
    name: &str,
    results: &[(String, Option<Pose>)],
    ground_truth: &[(String, Pose)],
) -> Result<SceneEval> {
    if results.is_empty() {
        return Err(Error::Validation(format!("scene {name} has no results")));
    }
    let gt: HashMap<&str, &Pose> = ground_truth.iter().map(|(id, p)| (id.as_str(), p)).collect();
    let mut pos = Vec::with_capacity(results.len());
    let mut rot = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (id, est) in results {
        let truth = gt
            .get(id.as_str())
            .ok_or_else(|| Error::Link(format!("no ground truth for query {id}")))?;
        match est {
            Some(p) => {
                pos.push(position_error(p, truth));
                rot.push(rotation_error(p, truth));
            }
            None => {
                failures += 1;
                pos.push(f64::INFINITY);
                rot.push(f64::INFINITY);
            }
        }
    }
    Ok(SceneEval {
        name: name.to_string(),
        queries: results.len(),
        failures,
        median_position: median(&pos),
        median_rotation: median(&rot),
    })
}

/// [`evaluate_scene`] over parsed result records.
pub fn evaluate_results(
    name: &str,
    results: &[QueryResult],
    ground_truth: &[(String, Pose)],
) -> Result<SceneEval> {
    let pairs: Vec<(String, Option<Pose>)> = results
        .iter()
        .map(|r| (r.query_id.clone(), r.pose().copied()))
        .collect();
    evaluate_scene(name, &pairs, ground_truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub per_scene: Vec<SceneEval>,
    /// Arithmetic mean of the per-scene medians.
    pub average_position: f64,
    pub average_rotation: f64,
    pub average_failure_rate: f64,
}

impl EvalSummary {
    pub fn new(per_scene: Vec<SceneEval>) -> Result<Self> {
        if per_scene.is_empty() {
            return Err(Error::Validation("no scenes to summarize".into()));
        }
        let n = per_scene.len() as f64;
        let mean = |f: fn(&SceneEval) -> f64| per_scene.iter().map(f).sum::<f64>() / n;
        Ok(EvalSummary {
            average_position: mean(|s| s.median_position),
            average_rotation: mean(|s| s.median_rotation),
            average_failure_rate: mean(SceneEval::failure_rate),
            per_scene,
        })
    }

    /// One row per scene plus an `average` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Format(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scene",
            "queries",
            "failures",
            "failure_rate",
            "median_position_m",
            "median_rotation_deg",
        ])
        .map_err(to_err)?;
        for s in &self.per_scene {
            w.write_record([
                s.name.clone(),
                s.queries.to_string(),
                s.failures.to_string(),
                s.failure_rate().to_string(),
                s.median_position.to_string(),
                s.median_rotation.to_string(),
            ])
            .map_err(to_err)?;
        }
        let total: usize = self.per_scene.iter().map(|s| s.queries).sum();
        let failed: usize = self.per_scene.iter().map(|s| s.failures).sum();
        w.write_record([
            "average".to_string(),
            total.to_string(),
            failed.to_string(),
            self.average_failure_rate.to_string(),
            self.average_position.to_string(),
            self.average_rotation.to_string(),
        ])
        .map_err(to_err)?;
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }
}

impl fmt::Display for EvalSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>8} {:>9} {:>14} {:>14}",
            "scene", "queries", "failed", "median pos [m]", "median rot [°]"
        )?;
        for s in &self.per_scene {
            writeln!(
                f,
                "{:<24} {:>8} {:>8.1}% {:>14.4} {:>14.4}",
                s.name,
                s.queries,
                100.0 * s.failure_rate(),
                s.median_position,
                s.median_rotation
            )?;
        }
        writeln!(
            f,
            "{:<24} {:>8} {:>8.1}% {:>14.4} {:>14.4}",
            "average",
            "",
            100.0 * self.average_failure_rate,
            self.average_position,
            self.average_rotation
        )?;
        for b in &BASELINES {
            writeln!(
                f,
                "reference {} on {}: {} m, {}°",
                b.method, b.dataset, b.position_m, b.rotation_deg
            )?;
        }
        Ok(())
    }
}
