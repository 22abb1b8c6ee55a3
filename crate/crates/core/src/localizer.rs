//! Absolute pose of a query image from essential matrices against posed
//! database images.
//!
//! Each query-database pair contributes four relative-pose candidates. Two
//! pairs fix the query rotation (the candidate combination whose absolute
//! predictions agree best) and the query center (intersection of the two
//! baseline rays). RANSAC over pairs of pairs, scored by the angle between
//! each pair's measured baseline direction and the direction predicted by the
//! hypothesis, rejects outlier pairs; each new best model is refined on its
//! inliers.
//!
//! Frames: for a pair with relative pose `x_q = R_k x_k + s t_k`, the
//! world-frame direction from database camera `k` toward the query is
//! `d_k = -R_{I_k}^T R_k^T t_k`.

use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::essential::{decompose, EssentialMatrix, PoseCandidates};
use crate::geometry::{
    angular_distance, chordal_mean, vector_angle_deg, Mat3, Pose, Ray, Rotation, Vec3,
};
use crate::solver::adaptive_iterations;

/// Where a pair's essential matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PairSource {
    /// Estimated from correspondences by the two-view solver.
    Solver,
    /// Read from a file, e.g. a learned regressor's predictions.
    #[default]
    Ingested,
}

/// A query-database pair: database pose plus the pair's essential matrix,
/// oriented so that `x_query^T E x_db = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub db_id: String,
    pub db_pose: Pose,
    pub essential: EssentialMatrix,
    pub source: PairSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizerConfig {
    /// Inlier threshold on the baseline-direction angle, degrees.
    pub alpha_max_t2: f64,
    /// Pair-selection window on camera-center distances, meters.
    pub min_pair_distance_a: f64,
    pub max_pair_distance_b: f64,
    pub top_k: usize,
    /// Samples whose rays meet at a smaller angle are skipped, degrees.
    pub min_triangulation_angle: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub lo_iterations: usize,
    /// Compare baseline directions as lines (angle folded into `[0, 90]`),
    /// for essential matrices whose global sign carries no information.
    pub ignore_direction_sign: bool,
    pub seed: u64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        LocalizerConfig {
            alpha_max_t2: 5.0,
            min_pair_distance_a: 3.0,
            max_pair_distance_b: 50.0,
            top_k: 5,
            min_triangulation_angle: 1.0,
            max_iterations: 10_000,
            confidence: 0.99,
            lo_iterations: 10,
            ignore_direction_sign: false,
            seed: 0,
        }
    }
}

impl LocalizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_max_t2 > 0.0 && self.alpha_max_t2 < 90.0) {
            return Err(Error::Config(format!(
                "alpha_max_t2 must lie in (0, 90), got {}",
                self.alpha_max_t2
            )));
        }
        if !(self.min_pair_distance_a >= 0.0
            && self.min_pair_distance_a < self.max_pair_distance_b)
        {
            return Err(Error::Config(format!(
                "pair window needs 0 <= a < b, got [{}, {}]",
                self.min_pair_distance_a, self.max_pair_distance_b
            )));
        }
        if self.top_k < 2 {
            return Err(Error::Config("top_k must be at least 2".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        if !(self.min_triangulation_angle >= 0.0) {
            return Err(Error::Config("min_triangulation_angle must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub pose: Pose,
    /// Sorted indices into the input pair list.
    pub inlier_pairs: Vec<usize>,
    pub iterations_run: usize,
    pub mean_inlier_angle: f64,
    /// Samples dropped because their rays were near-collinear.
    pub skipped_samples: usize,
}

/// Database image accepted by [`select_pairs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedImage {
    pub db_id: String,
    pub db_pose: Pose,
}

/// Greedy walk down a retrieval ranking. The top image is always taken; a
/// later one is accepted iff its center lies within `[a, b]` meters of every
/// center accepted so far. Stops after `top_k` acceptances.
pub fn select_pairs<S: AsRef<str>>(
    ranked_db_ids: &[S],
    db_poses: &HashMap<String, Pose>,
    cfg: &LocalizerConfig,
) -> Result<Vec<SelectedImage>> {
    let mut accepted: Vec<(SelectedImage, Vec3)> = Vec::new();
    for id in ranked_db_ids {
        if accepted.len() >= cfg.top_k {
            break;
        }
        let id = id.as_ref();
        let pose = db_poses
            .get(id)
            .ok_or_else(|| Error::Link(format!("no pose for database image {id}")))?;
        let center = pose.center();
        let fits = accepted.iter().all(|(_, c)| {
            let d = (center - c).norm();
            d >= cfg.min_pair_distance_a && d <= cfg.max_pair_distance_b
        });
        if fits {
            accepted.push((
                SelectedImage {
                    db_id: id.to_string(),
                    db_pose: *pose,
                },
                center,
            ));
        }
    }
    if accepted.len() < 2 {
        return Err(Error::InsufficientPairs(accepted.len()));
    }
    Ok(accepted.into_iter().map(|(s, _)| s).collect())
}

/// Outcome of rotation disambiguation between two pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disambiguation {
    /// Index (0 or 1) into each pair's candidate rotations.
    pub which_i: usize,
    pub which_j: usize,
    pub relative_i: Rotation,
    pub relative_j: Rotation,
    /// Chordal mean of the two absolute predictions `R_i R_{I_i}`, `R_j R_{I_j}`.
    pub absolute: Rotation,
    /// Angle between the two absolute predictions, degrees.
    pub disagreement: f64,
}

/// Picks the rotation candidates whose absolute predictions agree best.
pub fn disambiguate_rotations(
    cands_i: &PoseCandidates,
    pose_i: &Pose,
    cands_j: &PoseCandidates,
    pose_j: &Pose,
) -> Disambiguation {
    let abs_i = cands_i.rotations().map(|r| r.compose(&pose_i.rotation));
    let abs_j = cands_j.rotations().map(|r| r.compose(&pose_j.rotation));
    let mut best = (0, 0, f64::INFINITY);
    for (a, ra) in abs_i.iter().enumerate() {
        for (b, rb) in abs_j.iter().enumerate() {
            let d = angular_distance(ra, rb);
            if d < best.2 {
                best = (a, b, d);
            }
        }
    }
    let (a, b, disagreement) = best;
    let absolute = chordal_mean(&[abs_i[a], abs_j[b]]).expect("two rotations");
    Disambiguation {
        which_i: a,
        which_j: b,
        relative_i: cands_i.rotations()[a],
        relative_j: cands_j.rotations()[b],
        absolute,
        disagreement,
    }
}

/// Angle between two lines, in `[0, 90]` degrees.
fn line_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b).abs()).to_degrees()
}

/// Midpoint of the common perpendicular of two lines.
///
/// Only the lines matter: the result is unchanged (bit for bit) by flipping
/// either direction or swapping the arguments.
pub fn triangulate_center(ray_i: &Ray, ray_j: &Ray, min_angle_deg: f64) -> Result<Vec3> {
    let (d1, d2) = (ray_i.direction(), ray_j.direction());
    let angle = line_angle_deg(d1, d2);
    if !(angle >= min_angle_deg) || angle == 0.0 {
        return Err(Error::NearCollinear { angle_deg: angle });
    }
    let w0 = ray_i.origin - ray_j.origin;
    let a = d1.dot(d1);
    let b = d1.dot(d2);
    let c = d2.dot(d2);
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let denom = a * c - b * b;
    let s = (b * e - c * d) / denom;
    let t = (a * e - b * d) / denom;
    let p1 = ray_i.at(s);
    let p2 = ray_j.at(t);
    Ok((p1 + p2) * 0.5)
}

/// Per-pair quantities reused across hypotheses.
#[derive(Debug, Clone)]
struct PairGeometry {
    db_rotation: Rotation,
    db_center: Vec3,
    candidates: PoseCandidates,
    /// World-frame baseline direction for each candidate rotation.
    world_dirs: [Vec3; 2],
}

impl PairGeometry {
    fn new(pair: &ImagePair) -> Result<Self> {
        let candidates = decompose(&pair.essential)?;
        let r_db_t = pair.db_pose.rotation.matrix().transpose();
        let world_dirs = [0, 1].map(|w| {
            let r_k = candidates.rotations()[w];
            -(r_db_t * r_k.matrix().transpose() * candidates.signed_direction(w))
        });
        Ok(PairGeometry {
            db_rotation: pair.db_pose.rotation,
            db_center: pair.db_pose.center(),
            candidates,
            world_dirs,
        })
    }

    fn closest(&self, absolute: &Rotation) -> usize {
        self.candidates.closest_rotation(&self.db_rotation, absolute)
    }

    fn ray(&self, which: usize) -> Ray {
        Ray::new(self.db_center, self.world_dirs[which]).expect("unit direction")
    }

    fn absolute_rotation(&self, which: usize) -> Rotation {
        self.candidates.rotations()[which].compose(&self.db_rotation)
    }

    /// `None` when the hypothesis center coincides with the database center.
    fn residual(&self, pose: &Pose, center: &Vec3, unsigned: bool) -> Option<f64> {
        let which = self.closest(&pose.rotation);
        let predicted = center - self.db_center;
        if !(predicted.norm() > 1e-12 * (1.0 + self.db_center.norm())) {
            return None;
        }
        let alpha = vector_angle_deg(&self.world_dirs[which], &predicted);
        Some(if unsigned { alpha.min(180.0 - alpha) } else { alpha })
    }
}

/// Angle in degrees between the pair's measured baseline direction and the
/// direction from the database camera to the hypothesis center.
pub fn pair_residual_angle(hypothesis: &Pose, pair: &ImagePair) -> Result<f64> {
    let geo = PairGeometry::new(pair)?;
    geo.residual(hypothesis, &hypothesis.center(), false)
        .ok_or_else(|| Error::DegeneratePair("hypothesis center coincides with database center".into()))
}

#[derive(Debug, Clone, PartialEq)]
struct Score {
    inliers: Vec<usize>,
    mean_angle: f64,
}

impl Score {
    /// Strictly better: more inliers, then smaller mean residual.
    fn beats(&self, other: &Score) -> bool {
        match self.inliers.len().cmp(&other.inliers.len()) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.mean_angle < other.mean_angle,
        }
    }
}

struct Engine<'a> {
    geometry: Vec<PairGeometry>,
    cfg: &'a LocalizerConfig,
}

impl<'a> Engine<'a> {
    fn new(pairs: &[ImagePair], cfg: &'a LocalizerConfig) -> Result<Self> {
        let geometry = pairs.iter().map(PairGeometry::new).collect::<Result<_>>()?;
        Ok(Engine { geometry, cfg })
    }

    fn score(&self, pose: &Pose) -> Score {
        let center = pose.center();
        let mut inliers = Vec::new();
        let mut sum = 0.0;
        for (k, geo) in self.geometry.iter().enumerate() {
            if let Some(alpha) = geo.residual(pose, &center, self.cfg.ignore_direction_sign) {
                if alpha < self.cfg.alpha_max_t2 {
                    inliers.push(k);
                    sum += alpha;
                }
            }
        }
        let mean_angle = if inliers.is_empty() {
            f64::INFINITY
        } else {
            sum / inliers.len() as f64
        };
        Score {
            inliers,
            mean_angle,
        }
    }

    fn hypothesis(&self, i: usize, j: usize) -> Result<Pose> {
        let (gi, gj) = (&self.geometry[i], &self.geometry[j]);
        let pose_i = Pose::from_center(gi.db_rotation, &gi.db_center);
        let pose_j = Pose::from_center(gj.db_rotation, &gj.db_center);
        let dis = disambiguate_rotations(&gi.candidates, &pose_i, &gj.candidates, &pose_j);
        let center = triangulate_center(
            &gi.ray(dis.which_i),
            &gj.ray(dis.which_j),
            self.cfg.min_triangulation_angle,
        )?;
        Ok(Pose::from_center(dis.absolute, &center))
    }

    /// Rotation average and least-squares ray intersection over `set`, with
    /// candidate rotations chosen relative to `reference`.
    fn fit(&self, set: &[usize], reference: &Rotation) -> Option<Pose> {
        if set.len() < 2 {
            return None;
        }
        let mut rotations = Vec::with_capacity(set.len());
        let mut a = Mat3::zeros();
        let mut b = Vec3::zeros();
        for &k in set {
            let geo = &self.geometry[k];
            let which = geo.closest(reference);
            rotations.push(geo.absolute_rotation(which));
            let d = geo.world_dirs[which];
            let proj = Mat3::identity() - d * d.transpose();
            a += proj;
            b += proj * geo.db_center;
        }
        let rotation = chordal_mean(&rotations)?;
        // Near-parallel rays leave A (almost) singular along their direction.
        let min_eig = SymmetricEigen::new(a).eigenvalues.min();
        let floor = set.len() as f64 * (1.0 - self.cfg.min_triangulation_angle.to_radians().cos()) * 0.5;
        if !(min_eig > floor.max(1e-12)) {
            return None;
        }
        let center = a.lu().solve(&b)?;
        Some(Pose::from_center(rotation, &center))
    }

    fn refine(&self, inliers: &[usize], current: &Pose) -> (Pose, Score) {
        let mut best_pose = *current;
        let mut best_score = self.score(current);
        let mut set = inliers.to_vec();
        for _ in 0..self.cfg.lo_iterations {
            let Some(pose) = self.fit(&set, &best_pose.rotation) else {
                break;
            };
            let score = self.score(&pose);
            if score.inliers.len() < best_score.inliers.len() {
                break;
            }
            let stable = score.inliers == set;
            set = score.inliers.clone();
            best_pose = pose;
            best_score = score;
            if stable {
                break;
            }
        }
        (best_pose, best_score)
    }
}

/// Local optimization of a pose on its inlier pairs.
///
/// The rotation is the chordal mean of every inlier's disambiguated absolute
/// rotation; the center is the least-squares point closest to all inlier
/// rays. Inliers are then re-classified over all `pairs` and the fit repeated
/// for up to `cfg.lo_iterations` rounds or until the set is stable. The
/// result never has fewer inliers than `current`; if the rays are near
/// parallel `current` is returned unchanged.
pub fn refit_local_opt(
    pairs: &[ImagePair],
    inliers: &[usize],
    current: &Pose,
    cfg: &LocalizerConfig,
) -> Result<Pose> {
    if inliers.len() < 2 {
        return Err(Error::InsufficientPairs(inliers.len()));
    }
    if let Some(&bad) = inliers.iter().find(|&&k| k >= pairs.len()) {
        return Err(Error::Link(format!("inlier index {bad} out of range")));
    }
    let engine = Engine::new(pairs, cfg)?;
    Ok(engine.refine(inliers, current).0)
}

/// Canonical processing order: by database id, then by essential entries.
fn canonical_order(pairs: &[ImagePair]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        pairs[a].db_id.cmp(&pairs[b].db_id).then_with(|| {
            let (ea, eb) = (pairs[a].essential.to_row_major(), pairs[b].essential.to_row_major());
            ea.iter()
                .zip(eb.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
    order
}

/// RANSAC over pairs of image pairs with local optimization.
///
/// Pairs are processed in a canonical order (by database id), so the result
/// depends only on the set of pairs and the random source, not on the input
/// order. Inlier indices in the result refer to the input order.
pub fn localize_ransac<R: Rng + ?Sized>(
    pairs: &[ImagePair],
    cfg: &LocalizerConfig,
    rng: &mut R,
) -> Result<LocalizationResult> {
    cfg.validate()?;
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InsufficientPairs(n));
    }
    let order = canonical_order(pairs);
    let sorted: Vec<ImagePair> = order.iter().map(|&i| pairs[i].clone()).collect();
    let engine = Engine::new(&sorted, cfg)?;

    let cap = cfg.max_iterations.max(1);
    let mut bound = cap;
    let mut iterations = 0;
    let mut skipped = 0;
    let mut best: Option<(Pose, Score)> = None;
    while iterations < bound {
        iterations += 1;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let hypothesis = match engine.hypothesis(i, j) {
            Ok(h) => h,
            Err(Error::NearCollinear { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let score = engine.score(&hypothesis);
        if best.as_ref().is_some_and(|(_, b)| !score.beats(b)) {
            continue;
        }
        let (pose, score) = if score.inliers.len() >= 2 {
            engine.refine(&score.inliers.clone(), &hypothesis)
        } else {
            (hypothesis, score)
        };
        if best.as_ref().is_some_and(|(_, b)| b.beats(&score)) {
            continue;
        }
        let ratio = score.inliers.len() as f64 / n as f64;
        bound = adaptive_iterations(ratio, 2, cfg.confidence, cap).max(iterations);
        best = Some((pose, score));
    }

    match best {
        Some((pose, score)) if score.inliers.len() >= 2 => {
            let mut inlier_pairs: Vec<usize> = score.inliers.iter().map(|&k| order[k]).collect();
            inlier_pairs.sort_unstable();
            Ok(LocalizationResult {
                pose,
                inlier_pairs,
                iterations_run: iterations,
                mean_inlier_angle: score.mean_angle,
                skipped_samples: skipped,
            })
        }
        Some((_, score)) => Err(Error::LocalizationFailed(format!(
            "best hypothesis has {} inlier pair(s) after {iterations} iterations",
            score.inliers.len()
        ))),
        None => Err(Error::LocalizationFailed(format!(
            "all {skipped} samples had near-collinear rays"
        ))),
    }
}

/// [`localize_ransac`] with a ChaCha8 source seeded from `cfg.seed`.
pub fn localize(pairs: &[ImagePair], cfg: &LocalizerConfig) -> Result<LocalizationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    localize_ransac(pairs, cfg, &mut rng)
}
