//! Synthetic scenes with known geometry, used as a ground-truth oracle.
//!
//! A scene is a cloud of world points observed by posed database cameras and
//! one query camera. From it we derive exact or corrupted correspondences for
//! the two-view solver and exact or corrupted essential matrices for the
//! localizer, recording which items were replaced by outliers.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::essential::essential_from_relative;
use crate::geometry::{relative_pose, Pose, RelativePose, Rotation, UnitQuaternion, Vec3, Mat3};
use crate::localizer::{ImagePair, PairSource};
use crate::solver::{CameraIntrinsics, Correspondence, Vec2};

/// Camera layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Centers spread over a spherical cap facing the point cloud; no three
    /// centers (query included) are close to collinear.
    General,
    /// Every center, the query's included, on one straight line.
    Collinear,
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Geometry::General),
            "collinear" => Ok(Geometry::Collinear),
            other => Err(Error::Config(format!("unknown geometry preset {other:?}"))),
        }
    }
}

/// Fixed scene parameters. Defaults: 10 m cloud, 640x480 images, f = 500 px.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSettings {
    pub diameter: f64,
    /// Camera distance from the cloud center, in diameters.
    pub camera_distance: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub focal: f64,
    /// Half-angle of the spherical cap holding the `General` centers.
    pub cap_half_angle_deg: f64,
    /// Random tilt of each optical axis away from the cloud center.
    pub look_jitter_deg: f64,
}

impl Default for SceneSettings {
    fn default() -> Self {
        SceneSettings {
            diameter: 10.0,
            camera_distance: 1.5,
            image_width: 640,
            image_height: 480,
            focal: 500.0,
            cap_half_angle_deg: 40.0,
            look_jitter_deg: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub world_points: Vec<Vec3>,
    pub db_ids: Vec<String>,
    pub db_poses: Vec<Pose>,
    pub query_id: String,
    pub query_pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub image_width: u32,
    pub image_height: u32,
    pub diameter: f64,
}

impl SyntheticScene {
    /// Pixel of `point` if it is in front of the camera and inside the image.
    pub fn observe(&self, pose: &Pose, point: &Vec3) -> Option<Vec2> {
        let px = self.intrinsics.project(&pose.transform_point(point))?;
        let inside = px.x >= 0.0
            && px.y >= 0.0
            && px.x < f64::from(self.image_width)
            && px.y < f64::from(self.image_height);
        inside.then_some(px)
    }

    /// Ground-truth relative pose of database image `k` to the query.
    pub fn relative(&self, k: usize) -> Result<RelativePose> {
        relative_pose(&self.db_poses[k], &self.query_pose)
    }
}

/// Corruption applied by [`synth_correspondences`] and [`synth_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub pixel_sigma: f64,
    pub outlier_match_fraction: f64,
    pub outlier_pair_fraction: f64,
    /// Degrees.
    pub rotation_noise: f64,
    /// Degrees.
    pub direction_noise: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.pixel_sigma,
            self.outlier_match_fraction,
            self.outlier_pair_fraction,
            self.rotation_noise,
            self.direction_noise,
        ]
        .iter()
        .all(|v| *v >= 0.0 && v.is_finite());
        if !nonneg || self.outlier_match_fraction > 1.0 || self.outlier_pair_fraction > 1.0 {
            return Err(Error::Config(format!("invalid noise specification {self:?}")));
        }
        Ok(())
    }
}

/// `floor(fraction * n)`, robust to products like `0.4 * 5`.
fn outlier_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Uniform on SO(3).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if let Ok(q) = UnitQuaternion::new(q[0], q[1], q[2], q[3]) {
            return Rotation::from_quaternion(q);
        }
    }
}

/// Uniform unit vector orthogonal to `v`.
pub fn random_perpendicular<R: Rng + ?Sized>(v: &Vec3, rng: &mut R) -> Vec3 {
    let n = v.normalize();
    loop {
        let r = random_unit_vector(rng);
        let p = r - n * n.dot(&r);
        if p.norm() > 1e-3 {
            return p.normalize();
        }
    }
}

/// Rotation taking world to camera for a camera at `center` looking at
/// `target`, rolled by `roll_rad` about the optical axis. Goes through the
/// quaternion so that serialized poses parse back bit-equal.
fn look_at(center: &Vec3, target: &Vec3, roll_rad: f64) -> Rotation {
    let z = (target - center).normalize();
    let helper = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = z.cross(&helper).normalize();
    let y = z.cross(&x);
    let cam_to_world = Mat3::from_columns(&[x, y, z]);
    let base = Rotation::from_matrix_unchecked(cam_to_world.transpose());
    let roll = Rotation::from_axis_angle(&Vec3::z(), roll_rad).expect("unit axis");
    Rotation::from_quaternion(roll.compose(&base).quaternion())
}

fn jittered_pose<R: Rng + ?Sized>(center: Vec3, settings: &SceneSettings, rng: &mut R) -> Pose {
    let dist = center.norm();
    let jitter = rng.random_range(0.0..=settings.look_jitter_deg).to_radians();
    let axis = random_perpendicular(&center, rng);
    let tilt = Rotation::from_axis_angle(&axis, jitter).expect("unit axis");
    let target = center + tilt.apply(&(-center / dist)) * dist;
    let roll = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Pose::from_center(look_at(&center, &target, roll), &center)
}

fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn centers_ok(centers: &[Vec3], min_sep: f64, min_area: Option<f64>) -> bool {
    let n = centers.len();
    for i in 0..n {
        for j in i + 1..n {
            if (centers[i] - centers[j]).norm() < min_sep {
                return false;
            }
            if let Some(area) = min_area {
                for k in j + 1..n {
                    if triangle_area(&centers[i], &centers[j], &centers[k]) <= area {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// [`generate_scene_with`] under the default [`SceneSettings`].
pub fn generate_scene<R: Rng + ?Sized>(
    n_points: usize,
    n_db: usize,
    geometry: Geometry,
    rng: &mut R,
) -> Result<SyntheticScene> {
    generate_scene_with(&SceneSettings::default(), n_points, n_db, geometry, rng)
}

pub fn generate_scene_with<R: Rng + ?Sized>(
    settings: &SceneSettings,
    n_points: usize,
    n_db: usize,
    geometry: Geometry,
    rng: &mut R,
) -> Result<SyntheticScene> {
    if n_points < 8 {
        return Err(Error::Generation(format!("need at least 8 points, got {n_points}")));
    }
    if n_db < 2 {
        return Err(Error::Generation(format!("need at least 2 database images, got {n_db}")));
    }
    let intrinsics = CameraIntrinsics::new(
        settings.focal,
        settings.focal,
        f64::from(settings.image_width) / 2.0,
        f64::from(settings.image_height) / 2.0,
    )?;
    let radius = settings.diameter / 2.0;
    let distance = settings.camera_distance * settings.diameter;
    if distance <= radius {
        return Err(Error::Generation("cameras would sit inside the point cloud".into()));
    }

    let n_cams = n_db + 1;
    let min_sep = 0.05 * settings.diameter;
    let mut centers = Vec::new();
    let mut found = false;
    for _ in 0..1000 {
        centers = match geometry {
            Geometry::General => {
                let cos_max = settings.cap_half_angle_deg.to_radians().cos();
                (0..n_cams)
                    .map(|_| {
                        // Uniform on the cap around -z.
                        let cz = rng.random_range(cos_max..=1.0);
                        let phi = rng.random_range(0.0..std::f64::consts::TAU);
                        let s = (1.0 - cz * cz).max(0.0).sqrt();
                        Vec3::new(s * phi.cos(), s * phi.sin(), -cz) * distance
                    })
                    .collect()
            }
            Geometry::Collinear => (0..n_cams)
                .map(|_| Vec3::new(rng.random_range(-0.5..0.5) * distance, 0.0, -distance))
                .collect(),
        };
        let min_area = match geometry {
            Geometry::General => Some(1e-3 * settings.diameter * settings.diameter),
            Geometry::Collinear => None,
        };
        if centers_ok(&centers, min_sep, min_area) {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::Generation(format!(
            "could not place {n_cams} well-separated camera centers"
        )));
    }

    let poses: Vec<Pose> = centers
        .iter()
        .map(|c| jittered_pose(*c, settings, rng))
        .collect();
    let world_points: Vec<Vec3> = (0..n_points)
        .map(|_| random_unit_vector(rng) * radius * rng.random::<f64>().cbrt())
        .collect();

    let query_pose = poses[n_db];
    let db_poses = poses[..n_db].to_vec();
    Ok(SyntheticScene {
        world_points,
        db_ids: (0..n_db).map(|k| format!("db{k:03}")).collect(),
        db_poses,
        query_id: "query".to_string(),
        query_pose,
        intrinsics,
        image_width: settings.image_width,
        image_height: settings.image_height,
        diameter: settings.diameter,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMatches {
    pub correspondences: Vec<Correspondence>,
    /// World point behind each correspondence.
    pub point_indices: Vec<usize>,
    /// Correspondences whose query pixel was replaced by a random one.
    pub outlier_indices: Vec<usize>,
}

/// Matches between database image `pair_index` and the query.
pub fn synth_correspondences<R: Rng + ?Sized>(
    scene: &SyntheticScene,
    pair_index: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<SyntheticMatches> {
    noise.validate()?;
    let db_pose = scene.db_poses.get(pair_index).ok_or_else(|| {
        Error::Link(format!("scene has no database image {pair_index}"))
    })?;
    let mut raw = Vec::new();
    let mut point_indices = Vec::new();
    for (i, x) in scene.world_points.iter().enumerate() {
        if let (Some(a), Some(b)) = (scene.observe(db_pose, x), scene.observe(&scene.query_pose, x)) {
            raw.push((a, b));
            point_indices.push(i);
        }
    }
    if raw.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: raw.len(),
        });
    }
    if noise.pixel_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.pixel_sigma)
            .map_err(|e| Error::Config(format!("pixel noise: {e}")))?;
        for (a, b) in raw.iter_mut() {
            *a += Vec2::new(normal.sample(rng), normal.sample(rng));
            *b += Vec2::new(normal.sample(rng), normal.sample(rng));
        }
    }
    let n_out = outlier_count(noise.outlier_match_fraction, raw.len());
    let mut outlier_indices: Vec<usize> = sample(rng, raw.len(), n_out).into_vec();
    outlier_indices.sort_unstable();
    let (w, h) = (f64::from(scene.image_width), f64::from(scene.image_height));
    for &i in &outlier_indices {
        raw[i].1 = Vec2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
    }
    let k = &scene.intrinsics;
    Ok(SyntheticMatches {
        correspondences: raw
            .into_iter()
            .map(|(a, b)| Correspondence::from_pixels(k, k, a, b))
            .collect(),
        point_indices,
        outlier_indices,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPairs {
    pub pairs: Vec<ImagePair>,
    /// Pairs whose essential matrix belongs to an unrelated random pose.
    pub outlier_indices: Vec<usize>,
}

/// Applies the rotation and direction noise of `noise` to a relative pose.
pub fn perturb_relative<R: Rng + ?Sized>(
    rel: &RelativePose,
    noise: &NoiseSpec,
    rng: &mut R,
) -> RelativePose {
    let mut rotation = rel.rotation;
    if noise.rotation_noise > 0.0 {
        let axis = random_unit_vector(rng);
        let delta = Rotation::from_axis_angle(&axis, noise.rotation_noise.to_radians())
            .expect("unit axis");
        rotation = delta.compose(&rotation);
    }
    let mut direction = *rel.direction();
    if noise.direction_noise > 0.0 {
        let axis = random_perpendicular(&direction, rng);
        let delta = Rotation::from_axis_angle(&axis, noise.direction_noise.to_radians())
            .expect("unit axis");
        direction = delta.apply(&direction);
    }
    RelativePose::new(rotation, direction).expect("unit direction")
}

/// One essential-matrix estimate per database image.
pub fn synth_pairs<R: Rng + ?Sized>(
    scene: &SyntheticScene,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<SyntheticPairs> {
    noise.validate()?;
    let n = scene.db_poses.len();
    let n_out = outlier_count(noise.outlier_pair_fraction, n);
    let mut outlier_indices: Vec<usize> = sample(rng, n, n_out).into_vec();
    outlier_indices.sort_unstable();
    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        let rel = if outlier_indices.binary_search(&k).is_ok() {
            RelativePose::new(random_rotation(rng), random_unit_vector(rng))?
        } else {
            perturb_relative(&scene.relative(k)?, noise, rng)
        };
        pairs.push(ImagePair {
            db_id: scene.db_ids[k].clone(),
            db_pose: scene.db_poses[k],
            essential: essential_from_relative(&rel),
            source: PairSource::Ingested,
        });
    }
    Ok(SyntheticPairs {
        pairs,
        outlier_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angular_distance, vector_angle_deg};
    use crate::localizer::pair_residual_angle;
    use crate::solver::sampson_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn general_centers_are_not_collinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = generate_scene(50, 5, Geometry::General, &mut rng).unwrap();
            let mut c: Vec<Vec3> = s.db_poses.iter().map(Pose::center).collect();
            c.push(s.query_pose.center());
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    for k in j + 1..c.len() {
                        assert!(triangle_area(&c[i], &c[j], &c[k]) > 1e-3 * s.diameter * s.diameter);
                    }
                }
            }
        }
    }

    #[test]
    fn every_point_is_observed_by_every_camera() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = generate_scene(200, 6, Geometry::General, &mut rng).unwrap();
        for pose in s.db_poses.iter().chain(std::iter::once(&s.query_pose)) {
            for x in &s.world_points {
                assert!(pose.transform_point(x).z > 0.0);
                assert!(s.observe(pose, x).is_some());
            }
        }
    }

    #[test]
    fn collinear_centers_share_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = generate_scene(50, 5, Geometry::Collinear, &mut rng).unwrap();
        let c0 = s.query_pose.center();
        for p in &s.db_poses {
            let d = p.center() - c0;
            assert!(d.y.abs() < 1e-9 && d.z.abs() < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scene(30, 4, Geometry::General, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_scene(30, 4, Geometry::General, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generation_rejects_bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(generate_scene(7, 3, Geometry::General, &mut rng), Err(Error::Generation(_))));
        assert!(matches!(generate_scene(20, 1, Geometry::General, &mut rng), Err(Error::Generation(_))));
        let cramped = SceneSettings {
            cap_half_angle_deg: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            generate_scene_with(&cramped, 20, 5, Geometry::General, &mut rng),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn exact_correspondences_satisfy_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = generate_scene(60, 3, Geometry::General, &mut rng).unwrap();
        let gt = essential_from_relative(&s.relative(2).unwrap());
        let m = synth_correspondences(&s, 2, &NoiseSpec::default(), &mut rng).unwrap();
        assert_eq!(m.correspondences.len(), 60);
        for c in &m.correspondences {
            assert!(sampson_error(&gt, c) < 1e-12);
        }
    }

    #[test]
    fn pixel_noise_matches_first_order_prediction() {
        // Sampson distance of a correspondence perturbed by isotropic noise of
        // std s (normalized units) is |N(0, s^2)| to first order, whose mean
        // is s * sqrt(2 / pi).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = NoiseSpec {
            pixel_sigma: 1.0,
            ..Default::default()
        };
        let mut total = 0.0;
        let mut count = 0;
        for _ in 0..20 {
            let s = generate_scene(200, 2, Geometry::General, &mut rng).unwrap();
            let gt = essential_from_relative(&s.relative(0).unwrap());
            let m = synth_correspondences(&s, 0, &noise, &mut rng).unwrap();
            total += m.correspondences.iter().map(|c| sampson_error(&gt, c)).sum::<f64>();
            count += m.correspondences.len();
        }
        let mean = total / count as f64;
        let expected = (1.0 / 500.0) * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expected).abs() < 0.5 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn outlier_matches_are_recorded() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = generate_scene(100, 2, Geometry::General, &mut rng).unwrap();
        let noise = NoiseSpec {
            outlier_match_fraction: 0.4,
            ..Default::default()
        };
        let m = synth_correspondences(&s, 0, &noise, &mut rng).unwrap();
        assert_eq!(m.outlier_indices.len(), 40);
        let gt = essential_from_relative(&s.relative(0).unwrap());
        for (i, c) in m.correspondences.iter().enumerate() {
            if m.outlier_indices.binary_search(&i).is_err() {
                assert!(sampson_error(&gt, c) < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_covisible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = generate_scene(20, 2, Geometry::General, &mut rng).unwrap();
        // Move all but five points behind the query camera.
        let behind = s.query_pose.center() * 2.0;
        for x in s.world_points.iter_mut().skip(5) {
            *x = behind;
        }
        assert!(matches!(
            synth_correspondences(&s, 0, &NoiseSpec::default(), &mut rng),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn outlier_pairs_are_recorded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = generate_scene(20, 5, Geometry::General, &mut rng).unwrap();
        let noise = NoiseSpec {
            outlier_pair_fraction: 0.4,
            ..Default::default()
        };
        let p = synth_pairs(&s, &noise, &mut rng).unwrap();
        assert_eq!(p.outlier_indices.len(), 2);
        assert_eq!(p.pairs.len(), 5);
    }

    #[test]
    fn direction_noise_shows_up_as_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let s = generate_scene(20, 4, Geometry::General, &mut rng).unwrap();
            let noise = NoiseSpec {
                direction_noise: 10.0,
                ..Default::default()
            };
            let p = synth_pairs(&s, &noise, &mut rng).unwrap();
            for pair in &p.pairs {
                let alpha = pair_residual_angle(&s.query_pose, pair).unwrap();
                assert!((alpha - 10.0).abs() < 0.5, "{alpha}");
            }
        }
    }

    #[test]
    fn perturbation_angles_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rel = RelativePose::new(random_rotation(&mut rng), random_unit_vector(&mut rng)).unwrap();
        let noise = NoiseSpec {
            rotation_noise: 3.0,
            direction_noise: 7.0,
            ..Default::default()
        };
        let p = perturb_relative(&rel, &noise, &mut rng);
        assert!((angular_distance(&p.rotation, &rel.rotation) - 3.0).abs() < 1e-9);
        assert!((vector_angle_deg(p.direction(), rel.direction()) - 7.0).abs() < 1e-9);
    }
}
