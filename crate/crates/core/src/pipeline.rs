//! Dataset-level drivers: simulate, estimate essentials, localize queries.

use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::essential::EssentialMatrix;
use crate::io::{PairKey, QueryOutcome, QueryResult, SceneDataset};
use crate::localizer::{localize_ransac, select_pairs, PairSource};
use crate::retrieval::{rank_database, GlobalDescriptor};
use crate::simulator::{
    generate_scene, synth_correspondences, synth_pairs, Geometry, NoiseSpec, SyntheticScene,
};
use crate::solver::{estimate_essential_ransac, recover_pose};

/// Deterministic random stream `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub scenes: usize,
    pub db_images: usize,
    pub points: usize,
    pub geometry: Geometry,
    pub noise: NoiseSpec,
    /// Also write pixel matches for the two-view solver path.
    pub matches: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            scenes: 1,
            db_images: 5,
            points: 200,
            geometry: Geometry::General,
            noise: NoiseSpec::default(),
            matches: true,
        }
    }
}

/// Renames a scene's images to `{prefix}_dbNN` and `{prefix}_q`.
pub fn relabel_scene(scene: &mut SyntheticScene, prefix: &str) {
    for (k, id) in scene.db_ids.iter_mut().enumerate() {
        *id = format!("{prefix}_db{k:02}");
    }
    scene.query_id = format!("{prefix}_q");
}

/// One simulated scene per stream. The ranking of each query lists its own
/// scene's database images by increasing camera distance.
pub fn simulate_dataset(name: &str, spec: &SimulationSpec, seed: u64) -> Result<SceneDataset> {
    spec.noise.validate()?;
    let mut ds = SceneDataset {
        name: name.to_string(),
        ..SceneDataset::default()
    };
    for s in 0..spec.scenes {
        let mut rng = stream_rng(seed, s as u64);
        let mut scene = generate_scene(spec.points, spec.db_images, spec.geometry, &mut rng)?;
        relabel_scene(&mut scene, &format!("s{s:03}"));
        let mut part = SceneDataset::from_synthetic(name, &scene);
        part.add_pairs(&scene.query_id, &synth_pairs(&scene, &spec.noise, &mut rng)?);
        if spec.matches {
            for (k, db_id) in scene.db_ids.iter().enumerate() {
                match synth_correspondences(&scene, k, &spec.noise, &mut rng) {
                    Ok(m) => part.add_matches(&scene.query_id, db_id, &m),
                    Err(e) => warn!("no matches for {} {db_id}: {e}", scene.query_id),
                }
            }
        }
        let qc = scene.query_pose.center();
        let mut order: Vec<usize> = (0..scene.db_ids.len()).collect();
        let dist = |k: usize| (scene.db_poses[k].center() - qc).norm();
        order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
        part.rankings.insert(
            scene.query_id.clone(),
            order.into_iter().map(|k| scene.db_ids[k].clone()).collect(),
        );
        ds.merge(part)?;
    }
    Ok(ds)
}

#[derive(Debug, Default)]
pub struct EstimateReport {
    pub essentials: BTreeMap<PairKey, EssentialMatrix>,
    pub failures: Vec<(PairKey, Error)>,
}

/// Runs the two-view solver on every matched pair, fixing the sign of each
/// estimate by cheirality. Pair `i` (in key order) uses random stream `i`.
pub fn estimate_dataset(ds: &SceneDataset, cfg: &PipelineConfig) -> Result<EstimateReport> {
    let keys: Vec<&PairKey> = ds.matches.keys().collect();
    let outcomes: Vec<Result<EssentialMatrix>> = keys
        .iter()
        .enumerate()
        .map(|(i, key)| {
            let corrs = ds.correspondences(key)?;
            let focal = (ds.intrinsics_for(&key.0)?.mean_focal()
                * ds.intrinsics_for(&key.1)?.mean_focal())
            .sqrt();
            let solver = cfg.solver.to_solver_config(focal, cfg.seed);
            let mut rng = stream_rng(cfg.seed, i as u64);
            let est = estimate_essential_ransac(&corrs, &solver, &mut rng)?;
            let inliers: Vec<_> = est.inliers.iter().map(|&k| corrs[k]).collect();
            let (signed, _) = recover_pose(&est.essential, &inliers)?;
            Ok(signed)
        })
        .collect();
    let mut report = EstimateReport::default();
    for (key, out) in keys.into_iter().zip(outcomes) {
        match out {
            Ok(e) => {
                report.essentials.insert(key.clone(), e);
            }
            Err(e @ (Error::Link(_) | Error::Io { .. })) => return Err(e),
            Err(e) => {
                warn!("pair {} {}: {e}", key.0, key.1);
                report.failures.push((key.clone(), e));
            }
        }
    }
    info!(
        "estimated {} essential matrices, {} pairs failed",
        report.essentials.len(),
        report.failures.len()
    );
    Ok(report)
}

/// Database ids with an essential matrix for `query_id`, best first: the
/// stored ranking if any, else descriptor similarity, else id order.
pub fn ranked_candidates(ds: &SceneDataset, query_id: &str) -> Result<Vec<String>> {
    let available: BTreeSet<&str> = ds
        .essentials
        .keys()
        .filter(|(q, _)| q == query_id)
        .map(|(_, d)| d.as_str())
        .collect();
    if let Some(ranked) = ds.rankings.get(query_id) {
        return Ok(ranked
            .iter()
            .filter(|id| available.contains(id.as_str()))
            .cloned()
            .collect());
    }
    if let Some(qd) = ds.descriptor(query_id) {
        let db: Vec<GlobalDescriptor> = ds
            .descriptors
            .iter()
            .filter(|d| available.contains(d.id.as_str()))
            .cloned()
            .collect();
        if !db.is_empty() {
            return rank_database(qd, &db, db.len());
        }
    }
    Ok(available.into_iter().map(str::to_string).collect())
}

fn localize_query(ds: &SceneDataset, query_id: &str, cfg: &PipelineConfig, stream: u64) -> Result<QueryOutcome> {
    let ranked = ranked_candidates(ds, query_id)?;
    let selected = select_pairs(&ranked, &ds.db_poses(), &cfg.localizer)?;
    let ids: Vec<String> = selected.into_iter().map(|s| s.db_id).collect();
    let pairs = ds.image_pairs(query_id, &ids)?;
    let mut rng = stream_rng(cfg.seed, stream);
    let res = localize_ransac(&pairs, &cfg.localizer, &mut rng)?;
    Ok(QueryOutcome::Localized {
        pose: res.pose,
        n_inliers: res.inlier_pairs.len(),
        iterations: res.iterations_run,
        mean_angle: res.mean_inlier_angle,
    })
}

/// Localizes every query that has essential matrices, in parallel. Query `i`
/// (in id order) uses random stream `i`, so output does not depend on the
/// thread count.
pub fn localize_dataset(ds: &SceneDataset, cfg: &PipelineConfig) -> Result<Vec<QueryResult>> {
    let queries: Vec<String> = ds
        .essentials
        .keys()
        .map(|(q, _)| q.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if queries.is_empty() {
        return Err(Error::Validation("dataset has no essential matrices to localize from".into()));
    }
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let outcome = match localize_query(ds, q, cfg, i as u64) {
                Ok(o) => o,
                Err(e @ (Error::Link(_) | Error::Io { .. } | Error::Config(_))) => return Err(e),
                Err(e) => {
                    warn!("query {q}: {e}");
                    QueryOutcome::Failed(e.kind().to_string())
                }
            };
            Ok(QueryResult {
                query_id: q.clone(),
                outcome,
            })
        })
        .collect()
}

/// Method implied by where the essential matrices came from.
pub fn default_method(source: PairSource) -> crate::config::Method {
    match source {
        PairSource::Solver => crate::config::Method::Sift5Pt,
        PairSource::Ingested => crate::config::Method::EssNet,
    }
}
