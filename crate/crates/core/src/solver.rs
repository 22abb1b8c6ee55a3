//! Essential-matrix estimation from calibrated 2D-2D correspondences.
//!
//! The minimal solver is the Hartley-normalized 8-point algorithm followed by
//! projection onto the essential manifold. [`estimate_essential_ransac`] wraps
//! it in an adaptive RANSAC loop scored by Sampson distance, with
//! Levenberg-Marquardt refinement on the essential manifold.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::essential::{decompose, essential_from_relative, project_to_essential, EssentialMatrix};
use crate::geometry::{skew, Mat3, RelativePose, Rotation, UnitQuaternion, Vec3};

pub type Vec2 = Vector2<f64>;

/// Minimal sample size of the 8-point solver.
pub const MIN_SAMPLE: usize = 8;

/// Refit rounds per local optimization, and refinement steps per refit.
const LO_ROUNDS: usize = 4;
const LO_REFINE_STEPS: usize = 10;

/// Ratio below which the 8th singular value of the design matrix counts as
/// zero.
const DEGENERACY_RATIO: f64 = 1e-8;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::Validation(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(Error::Validation("principal point must be finite".into()));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }

    pub fn normalize(&self, pixel: &Vec2) -> Vec2 {
        Vec2::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy)
    }

    pub fn to_pixel(&self, normalized: &Vec2) -> Vec2 {
        Vec2::new(
            normalized.x * self.fx + self.cx,
            normalized.y * self.fy + self.cy,
        )
    }

    /// Projects a camera-frame point; `None` behind the camera.
    pub fn project(&self, cam: &Vec3) -> Option<Vec2> {
        (cam.z > 0.0).then(|| self.to_pixel(&Vec2::new(cam.x / cam.z, cam.y / cam.z)))
    }

    /// Geometric mean focal length, for converting pixel thresholds.
    pub fn mean_focal(&self) -> f64 {
        (self.fx * self.fy).sqrt()
    }
}

/// A calibrated match between a database image and the query image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub pixel_db: Vec2,
    pub pixel_query: Vec2,
    pub normalized_db: Vec2,
    pub normalized_query: Vec2,
}

impl Correspondence {
    pub fn from_pixels(
        db: &CameraIntrinsics,
        query: &CameraIntrinsics,
        pixel_db: Vec2,
        pixel_query: Vec2,
    ) -> Self {
        Correspondence {
            pixel_db,
            pixel_query,
            normalized_db: db.normalize(&pixel_db),
            normalized_query: query.normalize(&pixel_query),
        }
    }

    pub fn db_bearing(&self) -> Vec3 {
        self.normalized_db.push(1.0)
    }

    pub fn query_bearing(&self) -> Vec3 {
        self.normalized_query.push(1.0)
    }
}

/// Inner RANSAC settings. The threshold is a Sampson distance in normalized
/// image coordinates; see [`SolverConfig::threshold_from_pixels`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub inlier_threshold_t1: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            inlier_threshold_t1: 0.5 / 500.0,
            max_iterations: 10_000,
            confidence: 0.999,
            min_inliers: 15,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold_t1 > 0.0) {
            return Err(Error::Config("inlier_threshold_t1 must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Pixel threshold divided by the geometric mean focal length.
    pub fn threshold_from_pixels(pixels: f64, intrinsics: &CameraIntrinsics) -> f64 {
        pixels / intrinsics.mean_focal()
    }
}

/// Similarity taking points to zero mean and mean distance `sqrt(2)`.
fn hartley_transform(points: impl Iterator<Item = Vec2> + Clone) -> Mat3 {
    let n = points.clone().count() as f64;
    let centroid = points.clone().fold(Vec2::zeros(), |acc, p| acc + p) / n;
    let mean_dist = points.map(|p| (p - centroid).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Mat3::new(
        s,
        0.0,
        -s * centroid.x,
        0.0,
        s,
        -s * centroid.y,
        0.0,
        0.0,
        1.0,
    )
}

/// Normalized 8-point algorithm.
pub fn solve_eight_point(corrs: &[Correspondence]) -> Result<EssentialMatrix> {
    let n = corrs.len();
    if n < MIN_SAMPLE {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLE,
            got: n,
        });
    }
    let t_db = hartley_transform(corrs.iter().map(|c| c.normalized_db));
    let t_q = hartley_transform(corrs.iter().map(|c| c.normalized_query));

    // Padded to at least 9 rows so the SVD yields the full right basis.
    let mut a = DMatrix::<f64>::zeros(n.max(9), 9);
    for (i, c) in corrs.iter().enumerate() {
        let p = t_db * c.db_bearing();
        let q = t_q * c.query_bearing();
        let row = [
            q.x * p.x,
            q.x * p.y,
            q.x * p.z,
            q.y * p.x,
            q.y * p.y,
            q.y * p.z,
            q.z * p.x,
            q.z * p.y,
            q.z * p.z,
        ];
        for (j, v) in row.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateConfiguration("svd failed".into()))?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let largest = svd.singular_values[order[0]];
    let eighth = svd.singular_values[order[7]];
    if !(largest > 0.0) || eighth < DEGENERACY_RATIO * largest {
        return Err(Error::DegenerateConfiguration(format!(
            "design matrix has rank < 8 (sigma_8 / sigma_1 = {:e})",
            eighth / largest
        )));
    }
    let null = v_t.row(order[8]);
    let f = Mat3::from_fn(|r, c| null[3 * r + c]);
    project_to_essential(&(t_q.transpose() * f * t_db))
}

/// Epipolar residual and squared gradient norm of one correspondence.
fn sampson_terms(m: &Mat3, c: &Correspondence) -> (f64, f64) {
    let x_db = c.db_bearing();
    let x_q = c.query_bearing();
    let line_q = m * x_db;
    let line_db = m.transpose() * x_q;
    let den = line_q.x * line_q.x
        + line_q.y * line_q.y
        + line_db.x * line_db.x
        + line_db.y * line_db.y;
    (x_q.dot(&line_q), den)
}

fn signed_sampson(m: &Mat3, c: &Correspondence) -> f64 {
    let (num, den) = sampson_terms(m, c);
    if den > 0.0 {
        num / den.sqrt()
    } else {
        0.0
    }
}

/// Small rotation `exp(w)` to first order, renormalized.
fn rotation_step(w: &Vec3) -> Rotation {
    UnitQuaternion::new(1.0, 0.5 * w.x, 0.5 * w.y, 0.5 * w.z)
        .map(Rotation::from_quaternion)
        .unwrap_or_else(|_| Rotation::identity())
}

/// Levenberg-Marquardt on the essential manifold minimizing the summed
/// squared Sampson distance over `corrs`, starting from `initial`.
pub fn refine_essential(
    corrs: &[Correspondence],
    initial: &EssentialMatrix,
    iterations: usize,
) -> Result<EssentialMatrix> {
    if corrs.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: corrs.len(),
        });
    }
    let cands = decompose(initial)?;
    let mut rot = cands.rotations()[0];
    let mut t = cands.signed_direction(0);
    let residuals = |rot: &Rotation, t: &Vec3| -> DVector<f64> {
        let m = skew(t) * rot.matrix();
        DVector::from_iterator(corrs.len(), corrs.iter().map(|c| signed_sampson(&m, c)))
    };
    let perturb = |rot: &Rotation, t: &Vec3, basis: &[Vec3; 2], d: &[f64]| -> (Rotation, Vec3) {
        let r = rotation_step(&Vec3::new(d[0], d[1], d[2])).compose(rot);
        let t = (t + basis[0] * d[3] + basis[1] * d[4]).normalize();
        (r, t)
    };
    let mut r = residuals(&rot, &t);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        let helper = if t.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let b0 = t.cross(&helper).normalize();
        let basis = [b0, t.cross(&b0)];
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(corrs.len(), 5);
        for k in 0..5 {
            let mut d = [0.0; 5];
            d[k] = h;
            let (rk, tk) = perturb(&rot, &t, &basis, &d);
            jac.set_column(k, &((residuals(&rk, &tk) - &r) / h));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..10 {
            let mut a = jtj.clone();
            for k in 0..5 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let (rn, tn) = perturb(&rot, &t, &basis, step.as_slice());
            let rn_res = residuals(&rn, &tn);
            let new_cost = rn_res.norm_squared();
            if new_cost < cost {
                let gain = cost - new_cost;
                (rot, t, r, cost) = (rn, tn, rn_res, new_cost);
                lambda = (lambda * 0.1).max(1e-12);
                improved = gain > 1e-12 * cost;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(essential_from_relative(&RelativePose::new(rot, t)?))
}

/// First-order geometric error of the epipolar constraint (Sampson
/// distance), in normalized image units.
pub fn sampson_error(e: &EssentialMatrix, c: &Correspondence) -> f64 {
    let (num, den) = sampson_terms(e.matrix(), c);
    if den <= 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    num.abs() / den.sqrt()
}

/// Output of [`estimate_essential_ransac`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewEstimate {
    pub essential: EssentialMatrix,
    /// Sorted indices into the input correspondences.
    pub inliers: Vec<usize>,
    pub iterations: usize,
}

/// MSAC cost (truncated squared Sampson distance) and inlier indices.
fn score(e: &EssentialMatrix, corrs: &[Correspondence], threshold: f64) -> (f64, Vec<usize>) {
    let t2 = threshold * threshold;
    let mut cost = 0.0;
    let mut inliers = Vec::new();
    for (i, c) in corrs.iter().enumerate() {
        let d = sampson_error(e, c);
        if d < threshold {
            cost += d * d;
            inliers.push(i);
        } else {
            cost += t2;
        }
    }
    (cost, inliers)
}

/// Refits on the inliers of `model` until the cost stops improving.
fn local_optimize(
    corrs: &[Correspondence],
    model: EssentialMatrix,
    cost: f64,
    inliers: Vec<usize>,
    threshold: f64,
) -> (EssentialMatrix, f64, Vec<usize>) {
    let mut best = (model, cost, inliers);
    for _ in 0..LO_ROUNDS {
        if best.2.len() < MIN_SAMPLE {
            break;
        }
        let subset: Vec<Correspondence> = best.2.iter().map(|&i| corrs[i]).collect();
        let Ok(refit) = refine_essential(&subset, &best.0, LO_REFINE_STEPS) else {
            break;
        };
        let (c, inl) = score(&refit, corrs, threshold);
        if c >= best.1 {
            break;
        }
        best = (refit, c, inl);
    }
    best
}

/// Iterations needed to draw one all-inlier sample of `sample_size` with the
/// given confidence.
pub(crate) fn adaptive_iterations(
    inlier_ratio: f64,
    sample_size: usize,
    confidence: f64,
    cap: usize,
) -> usize {
    let p_good = inlier_ratio.clamp(0.0, 1.0).powi(sample_size as i32);
    if p_good >= 1.0 {
        return 1;
    }
    if p_good <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if n.is_finite() {
        (n.ceil() as usize).clamp(1, cap)
    } else {
        cap
    }
}

/// MSAC-scored RANSAC over 8-point minimal samples, with a reweighted refit
/// on the inliers of every new best model.
pub fn estimate_essential_ransac<R: Rng + ?Sized>(
    corrs: &[Correspondence],
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<TwoViewEstimate> {
    cfg.validate()?;
    let n = corrs.len();
    if n < MIN_SAMPLE {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLE,
            got: n,
        });
    }

    let threshold = cfg.inlier_threshold_t1;
    let mut best: Option<(EssentialMatrix, f64, Vec<usize>)> = None;
    let mut bound = cfg.max_iterations.max(1);
    let mut iterations = 0;
    let mut subset = Vec::with_capacity(MIN_SAMPLE);
    while iterations < bound {
        iterations += 1;
        subset.clear();
        subset.extend(sample(rng, n, MIN_SAMPLE).into_iter().map(|i| corrs[i]));
        let Ok(model) = solve_eight_point(&subset) else {
            continue;
        };
        let (cost, inliers) = score(&model, corrs, threshold);
        if best.as_ref().is_some_and(|(_, c, _)| cost >= *c) {
            continue;
        }
        let refined = local_optimize(corrs, model, cost, inliers, threshold);
        let ratio = refined.2.len() as f64 / n as f64;
        bound = adaptive_iterations(ratio, MIN_SAMPLE, cfg.confidence, cfg.max_iterations)
            .max(iterations);
        best = Some(refined);
    }

    let min_inliers = cfg.min_inliers.max(MIN_SAMPLE);
    match best {
        Some((essential, _, inliers)) if inliers.len() >= min_inliers => Ok(TwoViewEstimate {
            essential,
            inliers,
            iterations,
        }),
        _ => Err(Error::EstimationFailed(format!(
            "no model reached {min_inliers} inliers after {iterations} iterations"
        ))),
    }
}

/// Depths `(lambda_db, lambda_q)` with `lambda_q x_q = lambda_db R x_db + t`.
fn triangulate_depths(rel: &RelativePose, x_db: &Vec3, x_q: &Vec3) -> Option<(f64, f64)> {
    let r_xdb = rel.rotation.apply(x_db);
    let t = rel.direction();
    // Normal equations of [x_q, -R x_db] [lq, ld]^T = t.
    let a = Matrix2::new(
        x_q.dot(x_q),
        -x_q.dot(&r_xdb),
        -x_q.dot(&r_xdb),
        r_xdb.dot(&r_xdb),
    );
    let b = Vector2::new(x_q.dot(t), -r_xdb.dot(t));
    let sol = a.try_inverse()? * b;
    Some((sol.y, sol.x))
}

/// Selects the decomposition candidate that places most of the given
/// correspondences in front of both cameras, and returns it together with
/// the sign of `E` that it reproduces exactly (`E = [t]x R`).
pub fn recover_pose(
    e: &EssentialMatrix,
    corrs: &[Correspondence],
) -> Result<(EssentialMatrix, RelativePose)> {
    let cands = decompose(e)?;
    let mut best: Option<(usize, RelativePose)> = None;
    for cand in cands.candidates() {
        let in_front = corrs
            .iter()
            .filter(|c| {
                triangulate_depths(&cand, &c.db_bearing(), &c.query_bearing())
                    .is_some_and(|(d_db, d_q)| d_db > 0.0 && d_q > 0.0)
            })
            .count();
        if best.as_ref().is_none_or(|(count, _)| in_front > *count) {
            best = Some((in_front, cand));
        }
    }
    let (count, pose) = best.expect("four candidates");
    if count == 0 {
        return Err(Error::EstimationFailed(
            "no candidate puts any point in front of both cameras".into(),
        ));
    }
    let signed = crate::essential::essential_from_relative(&pose);
    Ok((signed, pose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::essential::{essential_distance, essential_from_relative};
    use crate::geometry::{angular_distance, relative_pose, Pose, Rotation};
    use crate::simulator::{generate_scene, synth_correspondences, Geometry, NoiseSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap()
    }

    fn exact_pair(seed: u64, n_points: usize) -> (Vec<Correspondence>, EssentialMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = generate_scene(n_points, 3, Geometry::General, &mut rng).unwrap();
        let m = synth_correspondences(&scene, 0, &NoiseSpec::default(), &mut rng).unwrap();
        let gt = essential_from_relative(
            &relative_pose(&scene.db_poses[0], &scene.query_pose).unwrap(),
        );
        (m.correspondences, gt)
    }

    #[test]
    fn eight_point_recovers_exact_essential() {
        for seed in 0..20 {
            let (corrs, gt) = exact_pair(seed, 20);
            let e = solve_eight_point(&corrs[..20]).unwrap();
            assert!(essential_distance(&e, &gt) < 1e-8, "seed {seed}");
            for c in &corrs {
                assert!(e.epipolar_residual(&c.db_bearing(), &c.query_bearing()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn refinement_lowers_sampson_cost() {
        let sq = |e: &EssentialMatrix, c: &[Correspondence]| -> f64 {
            c.iter().map(|x| sampson_error(e, x).powi(2)).sum()
        };
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scene = generate_scene(150, 2, Geometry::General, &mut rng).unwrap();
            let noise = NoiseSpec {
                pixel_sigma: 1.0,
                ..NoiseSpec::default()
            };
            let corrs = synth_correspondences(&scene, 0, &noise, &mut rng).unwrap().correspondences;
            let linear = solve_eight_point(&corrs).unwrap();
            let refined = refine_essential(&corrs, &linear, 20).unwrap();
            assert!(sq(&refined, &corrs) <= sq(&linear, &corrs), "seed {seed}");
            assert!(EssentialMatrix::new(*refined.matrix()).is_ok());
        }
        let (corrs, gt) = exact_pair(4, 40);
        let refined = refine_essential(&corrs, &gt, 10).unwrap();
        assert!(essential_distance(&refined, &gt) < 1e-9);
    }

    /// Points and two cameras related by `x_q = x_db + (1, 0, 0)`-style motion.
    fn pure_translation_corrs(points: &[Vec3]) -> Vec<Correspondence> {
        let db = Pose::identity();
        let query = Pose::from_center(Rotation::identity(), &Vec3::new(-1.0, 0.0, 0.0));
        points
            .iter()
            .map(|x| {
                let a = db.transform_point(x);
                let b = query.transform_point(x);
                Correspondence::from_pixels(
                    &intr(),
                    &intr(),
                    intr().project(&a).unwrap(),
                    intr().project(&b).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn eight_point_pure_translation() {
        let points = [
            [0.3, 0.2, 4.0],
            [-0.5, 0.4, 5.0],
            [0.7, -0.6, 6.0],
            [-0.2, -0.3, 3.5],
            [0.1, 0.9, 7.0],
            [-0.8, 0.1, 4.5],
            [0.6, 0.5, 5.5],
            [-0.4, -0.7, 6.5],
        ]
        .map(Vec3::from);
        let e = solve_eight_point(&pure_translation_corrs(&points)).unwrap();
        let found = decompose(&e).unwrap().candidates().iter().any(|p| {
            angular_distance(&p.rotation, &Rotation::identity()) < 1e-6
                && (p.direction() - Vec3::x()).norm() < 1e-6
        });
        assert!(found);
    }

    #[test]
    fn eight_point_rejects_epipolar_plane() {
        // All points on the plane y = 0, which contains both centers.
        let points: Vec<Vec3> = (0..8)
            .map(|i| Vec3::new(-1.0 + 0.3 * i as f64, 0.0, 3.0 + 0.5 * (i % 3) as f64))
            .collect();
        let err = solve_eight_point(&pure_translation_corrs(&points)).unwrap_err();
        assert!(matches!(err, Error::DegenerateConfiguration(_)), "{err}");
    }

    #[test]
    fn eight_point_needs_eight() {
        let (corrs, _) = exact_pair(1, 20);
        assert!(matches!(
            solve_eight_point(&corrs[..7]),
            Err(Error::InsufficientData { needed: 8, got: 7 })
        ));
    }

    #[test]
    fn hartley_normalization_invariance() {
        let (corrs, _) = exact_pair(9, 30);
        let base = solve_eight_point(&corrs).unwrap();
        // Pixel similarity: scale 2.5, shift (40, -15); intrinsics follow.
        let k = intr();
        let k2 = CameraIntrinsics::new(k.fx * 2.5, k.fy * 2.5, k.cx * 2.5 + 40.0, k.cy * 2.5 - 15.0)
            .unwrap();
        let moved: Vec<Correspondence> = corrs
            .iter()
            .map(|c| {
                let f = |p: &Vec2| Vec2::new(p.x * 2.5 + 40.0, p.y * 2.5 - 15.0);
                Correspondence::from_pixels(&k2, &k2, f(&c.pixel_db), f(&c.pixel_query))
            })
            .collect();
        let e = solve_eight_point(&moved).unwrap();
        assert!(essential_distance(&e, &base) < 1e-8);
    }

    #[test]
    fn sampson_exact_and_along_line() {
        let (corrs, gt) = exact_pair(2, 20);
        for c in &corrs {
            assert!(sampson_error(&gt, c) < 1e-12);
            // Slide the query point along its epipolar line.
            let line = gt.matrix() * c.db_bearing();
            let along = Vec2::new(-line.y, line.x).normalize() * 0.05;
            let mut moved = *c;
            moved.normalized_query += along;
            assert!(sampson_error(&gt, &moved) < 1e-10);
        }
    }

    /// Exact two-image geometric error: the smallest joint displacement
    /// `|(d_db, d_q)|` that satisfies the epipolar constraint. For a fixed
    /// `d_db` the best `d_q` is the point-to-line distance in the query image,
    /// so a dense search over `d_db` finds the minimum.
    fn geometric_error_oracle(e: &EssentialMatrix, c: &Correspondence) -> f64 {
        let m = e.matrix();
        let mut best = f64::INFINITY;
        let steps = 400;
        let radius = 0.02;
        for i in 0..=steps {
            for j in 0..=steps {
                let d = Vec2::new(
                    -radius + 2.0 * radius * i as f64 / steps as f64,
                    -radius + 2.0 * radius * j as f64 / steps as f64,
                );
                let x_db = (c.normalized_db + d).push(1.0);
                let line = m * x_db;
                let dist = c.query_bearing().dot(&line).abs() / line.xy().norm();
                best = best.min((d.norm_squared() + dist * dist).sqrt());
            }
        }
        best
    }

    #[test]
    fn sampson_matches_geometric_error_for_perpendicular_offset() {
        let (corrs, gt) = exact_pair(3, 20);
        for c in corrs.iter().take(5) {
            let line = gt.matrix() * c.db_bearing();
            let normal = line.xy().normalize();
            let mut moved = *c;
            moved.normalized_query += 0.01 * normal;
            // One-sided point-to-line distance is exactly the 0.01 offset.
            let one_sided =
                moved.query_bearing().dot(&line).abs() / line.xy().norm();
            assert!((one_sided - 0.01).abs() < 1e-12);
            let s = sampson_error(&gt, &moved);
            let oracle = geometric_error_oracle(&gt, &moved);
            assert!((s - oracle).abs() < 0.2 * oracle, "sampson {s} oracle {oracle}");
            assert!(s <= 0.01 + 1e-12 && s > 0.0);
        }
    }

    #[test]
    fn ransac_on_exact_data_keeps_everything() {
        let (corrs, gt) = exact_pair(4, 100);
        let cfg = SolverConfig {
            inlier_threshold_t1: 1e-6,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let est = estimate_essential_ransac(&corrs, &cfg, &mut rng).unwrap();
        assert_eq!(est.inliers.len(), corrs.len());
        assert!(essential_distance(&est.essential, &gt) < 1e-8);
    }

    #[test]
    fn ransac_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scene = generate_scene(100, 2, Geometry::General, &mut rng).unwrap();
        let noise = NoiseSpec {
            pixel_sigma: 1.0,
            outlier_match_fraction: 0.3,
            ..Default::default()
        };
        let m = synth_correspondences(&scene, 0, &noise, &mut rng).unwrap();
        let cfg = SolverConfig {
            inlier_threshold_t1: 3.0 / 500.0,
            ..Default::default()
        };
        let a = estimate_essential_ransac(&m.correspondences, &cfg, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let b = estimate_essential_ransac(&m.correspondences, &cfg, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ransac_rejects_too_few() {
        let (corrs, _) = exact_pair(5, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            estimate_essential_ransac(&corrs[..7], &SolverConfig::default(), &mut rng),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn ransac_fails_on_pure_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let corrs: Vec<Correspondence> = (0..60)
            .map(|_| {
                let p = |rng: &mut ChaCha8Rng| {
                    Vec2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0))
                };
                let (a, b) = (p(&mut rng), p(&mut rng));
                Correspondence::from_pixels(&intr(), &intr(), a, b)
            })
            .collect();
        let cfg = SolverConfig {
            inlier_threshold_t1: 1e-5,
            min_inliers: 30,
            max_iterations: 200,
            ..Default::default()
        };
        assert!(matches!(
            estimate_essential_ransac(&corrs, &cfg, &mut rng),
            Err(Error::EstimationFailed(_))
        ));
    }

    #[test]
    fn recover_pose_fixes_sign_and_candidate() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let scene = generate_scene(40, 2, Geometry::General, &mut rng).unwrap();
            let m = synth_correspondences(&scene, 1, &NoiseSpec::default(), &mut rng).unwrap();
            let truth = relative_pose(&scene.db_poses[1], &scene.query_pose).unwrap();
            let gt = essential_from_relative(&truth);
            for e in [gt, gt.neg()] {
                let (signed, pose) = recover_pose(&e, &m.correspondences).unwrap();
                assert!((signed.matrix() - gt.matrix()).norm() < 1e-9);
                assert!(angular_distance(&pose.rotation, &truth.rotation) < 1e-7);
                assert!((pose.direction() - truth.direction()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn adaptive_bound_behaviour() {
        assert_eq!(adaptive_iterations(1.0, 8, 0.99, 1000), 1);
        assert_eq!(adaptive_iterations(0.0, 8, 0.99, 1000), 1000);
        // 0.6^8 = 0.0168: log(0.01) / log(1 - 0.0168) = 272.
        assert_eq!(adaptive_iterations(0.6, 8, 0.99, 10_000), 272);
    }
}
