//! Rotation and pose algebra.
//!
//! Poses map world points into the camera frame: `x_cam = R * X + t`. The
//! camera center in world coordinates is therefore `c = -R^T t`. Datasets that
//! store camera-to-world transforms `(R_cw, c)` convert with `R = R_cw^T`,
//! `t = -R_cw^T c`, see [`Pose::from_center`].

use std::fmt;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-9;

/// Clamp into `[-1, 1]` before `acos`.
#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Angle between two nonzero vectors, in degrees.
pub fn vector_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 keeps full precision near 0 and 180 degrees.
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Cross-product matrix, `skew(a) * b == a x b`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Unit quaternion `w + xi + yj + zk` kept on the canonical hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes. Inputs that are already unit (to a few
    /// ulps) keep their exact bits, so text serialization roundtrips.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = w * w + x * x + y * y + z * z;
        if !n2.is_finite() || n2 < 1e-24 {
            return Err(Error::InvalidRotation(format!(
                "quaternion ({w}, {x}, {y}, {z}) has no direction"
            )));
        }
        let q = if (n2 - 1.0).abs() > 1e-14 {
            let n = n2.sqrt();
            UnitQuaternion {
                w: w / n,
                x: x / n,
                y: y / n,
                z: z / n,
            }
        } else {
            UnitQuaternion { w, x, y, z }
        };
        Ok(q.canonical())
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// `w >= 0`; when `w == 0` the first nonzero vector component is positive.
    pub fn canonical(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            UnitQuaternion {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn to_matrix(&self) -> Mat3 {
        let UnitQuaternion { w, x, y, z } = *self;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        Mat3::new(
            1.0 - 2.0 * (yy + zz),
            2.0 * (xy - wz),
            2.0 * (xz + wy),
            2.0 * (xy + wz),
            1.0 - 2.0 * (xx + zz),
            2.0 * (yz - wx),
            2.0 * (xz - wy),
            2.0 * (yz + wx),
            1.0 - 2.0 * (xx + yy),
        )
    }

    /// Shepperd's method on an orthonormal matrix.
    fn from_matrix_unchecked(m: &Mat3) -> Self {
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let (w, x, y, z) = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        // The input is orthonormal, so the norm is nonzero.
        UnitQuaternion::new(w, x, y, z).expect("rotation matrix yields a nonzero quaternion")
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.w, self.x, self.y, self.z)
    }
}

/// Proper rotation. Holds the matrix together with its canonical quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    matrix: Mat3,
    quat: UnitQuaternion,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            matrix: Mat3::identity(),
            quat: UnitQuaternion::IDENTITY,
        }
    }

    pub fn from_quaternion(q: UnitQuaternion) -> Self {
        let q = q.canonical();
        Rotation {
            matrix: q.to_matrix(),
            quat: q,
        }
    }

    /// Validates `R^T R = I` and `det R = +1` within 1e-9.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entries".into()));
        }
        let ortho = (m.transpose() * m - Mat3::identity()).amax();
        if ortho > ORTHONORMAL_TOL {
            return Err(Error::InvalidRotation(format!(
                "R^T R deviates from identity by {ortho:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation {
            quat: UnitQuaternion::from_matrix_unchecked(&m),
            matrix: m,
        }
    }

    /// Nearest rotation in Frobenius norm (SVD projection).
    pub fn nearest(m: &Mat3) -> Result<Self> {
        let svd = m.svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::InvalidRotation("svd failed".into()));
        };
        let mut d = Mat3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Ok(Self::from_matrix_unchecked(u * d * v_t))
    }

    /// Right-handed rotation by `angle_rad` about `axis` (need not be unit).
    pub fn from_axis_angle(axis: &Vec3, angle_rad: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidRotation("zero rotation axis".into()));
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle_rad).sin_cos();
        Ok(Self::from_quaternion(UnitQuaternion::new(
            c,
            s * a.x,
            s * a.y,
            s * a.z,
        )?))
    }

    pub fn about_x_deg(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::x(), angle.to_radians()).unwrap()
    }

    pub fn about_y_deg(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::y(), angle.to_radians()).unwrap()
    }

    pub fn about_z_deg(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::z(), angle.to_radians()).unwrap()
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn quaternion(&self) -> UnitQuaternion {
        self.quat
    }

    pub fn transpose(&self) -> Self {
        let q = self.quat;
        Rotation {
            matrix: self.matrix.transpose(),
            quat: UnitQuaternion {
                w: q.w,
                x: -q.x,
                y: -q.y,
                z: -q.z,
            }
            .canonical(),
        }
    }

    /// Matrix product `self * other`.
    pub fn compose(&self, other: &Rotation) -> Self {
        Self::from_matrix_unchecked(self.matrix * other.matrix)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.matrix * v
    }

    pub fn angle_to(&self, other: &Rotation) -> f64 {
        angular_distance(self, other)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

/// Angle of `a^T b` in degrees, in `[0, 180]`.
///
/// Uses `atan2(|axis part|, cos part)` of the relative rotation rather than
/// `acos` of the trace so small angles keep full precision.
pub fn angular_distance(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.matrix.transpose() * b.matrix;
    let sin_part = 0.5
        * Vec3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        )
        .norm();
    let cos_part = clamp_unit(0.5 * (m.trace() - 1.0));
    sin_part.atan2(cos_part).to_degrees()
}

/// Chordal L2 mean of rotations: the dominant eigenvector of `sum q q^T`,
/// returned on the hemisphere of the first input.
pub fn chordal_mean(rotations: &[Rotation]) -> Option<Rotation> {
    let first = rotations.first()?;
    if rotations.len() == 1 {
        return Some(*first);
    }
    let reference = first.quat.as_vector();
    let mut acc = Matrix4::<f64>::zeros();
    for r in rotations {
        let mut q = r.quat.as_vector();
        if q.dot(&reference) < 0.0 {
            q = -q;
        }
        acc += q * q.transpose();
    }
    let eig = SymmetricEigen::new(acc);
    let imax = eig.eigenvalues.imax();
    let mut q = eig.eigenvectors.column(imax).into_owned();
    if q.dot(&reference) < 0.0 {
        q = -q;
    }
    UnitQuaternion::new(q[0], q[1], q[2], q[3])
        .ok()
        .map(Rotation::from_quaternion)
}

/// Absolute camera pose, world to camera: `x_cam = R * X + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Result<Self> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("non-finite translation".into()));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Pose with the given orientation whose center sits at `center`.
    pub fn from_center(rotation: Rotation, center: &Vec3) -> Self {
        Pose {
            translation: -(rotation.matrix() * center),
            rotation,
        }
    }

    /// `c = -R^T t`.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.matrix().transpose() * self.translation)
    }

    pub fn transform_point(&self, world: &Vec3) -> Vec3 {
        self.rotation.matrix() * world + self.translation
    }
}

/// Camera center of a pose, `-R^T t`.
pub fn camera_center(pose: &Pose) -> Vec3 {
    pose.center()
}

/// Relative motion from a database camera frame into the query frame:
/// `x_query = R * x_db + s * direction` with `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation: Rotation,
    direction: Vec3,
}

impl RelativePose {
    /// `direction` is normalized; it must be nonzero.
    pub fn new(rotation: Rotation, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegeneratePair("zero translation direction".into()));
        }
        let direction = if (n - 1.0).abs() > 1e-15 {
            direction / n
        } else {
            direction
        };
        Ok(RelativePose {
            rotation,
            direction,
        })
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn is_unit(&self) -> bool {
        (self.direction.norm() - 1.0).abs() <= UNIT_TOL
    }
}

/// Relative pose taking the database camera frame into the query frame.
///
/// `R_rel = R_q R_db^T`, `t_rel = t_q - R_rel t_db = R_q (c_db - c_q)`.
pub fn relative_pose(db: &Pose, query: &Pose) -> Result<RelativePose> {
    let (c_db, c_q) = (db.center(), query.center());
    let baseline = (c_db - c_q).norm();
    if !(baseline > 1e-12 * (1.0 + c_db.norm().max(c_q.norm()))) {
        return Err(Error::DegeneratePair("coincident camera centers".into()));
    }
    let rotation = query.rotation.compose(&db.rotation.transpose());
    let t = query.translation - rotation.matrix() * db.translation;
    RelativePose::new(rotation, t)
}

/// Half-line (or line, where sign does not matter) in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() || !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("ray needs a finite origin and nonzero direction".into()));
        }
        let direction = if (n - 1.0).abs() > 1e-15 {
            direction / n
        } else {
            direction
        };
        Ok(Ray { origin, direction })
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn flipped(&self) -> Ray {
        Ray {
            origin: self.origin,
            direction: -self.direction,
        }
    }

    pub fn at(&self, lambda: f64) -> Vec3 {
        self.origin + lambda * self.direction
    }
}
