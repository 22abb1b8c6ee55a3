//! Essential matrices: construction, projection, decomposition and comparison.
//!
//! With a relative pose `x_q = R x_db + s t`, the essential matrix is
//! `E = [t]x R` and every calibrated correspondence satisfies
//! `x_q^T E x_db = 0`. Matrices are normalized to Frobenius norm `sqrt(2)`,
//! i.e. singular values `(1, 1, 0)` and a unit translation.

use std::fmt;

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::geometry::{skew, Mat3, RelativePose, Rotation, Vec3};

/// Relative tolerance on the singular-value structure of a valid matrix.
pub const ESSENTIAL_TOL: f64 = 1e-7;

const RANK_GAP: f64 = 1e-12;

/// Rank-2 matrix with equal nonzero singular values, `||E||_F = sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(Mat3);

impl EssentialMatrix {
    /// Accepts `m` only if it already satisfies the essential-matrix
    /// invariants within [`ESSENTIAL_TOL`].
    pub fn new(m: Mat3) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidEssential("non-finite entries".into()));
        }
        let sv = m.singular_values();
        let (s1, s2, s3) = (sv[0], sv[1], sv[2]);
        if (s1 - 1.0).abs() > ESSENTIAL_TOL
            || (s2 - 1.0).abs() > ESSENTIAL_TOL
            || s3.abs() > ESSENTIAL_TOL
        {
            return Err(Error::InvalidEssential(format!(
                "singular values ({s1}, {s2}, {s3}), expected (1, 1, 0)"
            )));
        }
        Ok(EssentialMatrix(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn neg(&self) -> Self {
        EssentialMatrix(-self.0)
    }

    /// Epipolar residual `x_q^T E x_db` for homogeneous calibrated points.
    pub fn epipolar_residual(&self, x_db: &Vec3, x_q: &Vec3) -> f64 {
        x_q.dot(&(self.0 * x_db))
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        std::array::from_fn(|i| self.0[(i / 3, i % 3)])
    }
}

impl fmt::Display for EssentialMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.to_row_major();
        write!(
            f,
            "{} {} {} {} {} {} {} {} {}",
            e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8]
        )
    }
}

/// `E = [t]x R`.
pub fn essential_from_relative(rel: &RelativePose) -> EssentialMatrix {
    EssentialMatrix(skew(rel.direction()) * rel.rotation.matrix())
}

/// Replaces the two leading singular values by their mean, zeroes the third,
/// and rescales to `||E||_F = sqrt(2)`.
pub fn project_to_essential(m: &Mat3) -> Result<EssentialMatrix> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateMatrix("non-finite entries".into()));
    }
    let svd = SVD::new(*m, true, true);
    let s = svd.singular_values;
    if !(s[0] > 0.0) || s[1] < RANK_GAP * s[0] {
        return Err(Error::DegenerateMatrix(format!(
            "numerical rank below 2 (singular values {}, {}, {})",
            s[0], s[1], s[2]
        )));
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateMatrix("svd failed".into()));
    };
    // diag(s, s, 0) scaled to Frobenius norm sqrt(2) is diag(1, 1, 0).
    let d = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
    Ok(EssentialMatrix(u * d * v_t))
}

/// Frobenius distance between two essential matrices, minimized over the sign
/// of one of them.
pub fn essential_distance(a: &EssentialMatrix, b: &EssentialMatrix) -> f64 {
    let minus = (a.0 - b.0).norm();
    let plus = (a.0 + b.0).norm();
    minus.min(plus)
}

/// The four relative poses `(R, t), (R, -t), (R', t), (R', -t)` encoded by an
/// essential matrix.
///
/// `R` and `R'` differ by a half turn about the baseline. For a fixed sign of
/// `E`, each rotation pairs with exactly one sign of `t` such that
/// `[t]x R = E`; [`PoseCandidates::signed_direction`] returns that one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseCandidates {
    rotations: [Rotation; 2],
    direction: Vec3,
    signs: [f64; 2],
}

impl PoseCandidates {
    pub fn rotations(&self) -> &[Rotation; 2] {
        &self.rotations
    }

    /// Unit translation axis, sign arbitrary.
    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    /// Direction `t` such that `[t]x R_which` reproduces the decomposed `E`
    /// with its sign.
    pub fn signed_direction(&self, which: usize) -> Vec3 {
        self.signs[which] * self.direction
    }

    /// All four candidates in the order `(R,t), (R,-t), (R',t), (R',-t)`.
    pub fn candidates(&self) -> [RelativePose; 4] {
        let t = self.direction;
        let [r, r2] = self.rotations;
        // Unit by construction.
        [
            RelativePose::new(r, t).unwrap(),
            RelativePose::new(r, -t).unwrap(),
            RelativePose::new(r2, t).unwrap(),
            RelativePose::new(r2, -t).unwrap(),
        ]
    }

    /// Index of the rotation (0 or 1) that, composed with `db_rotation`, lies
    /// closest to `absolute`. Ties go to index 0.
    pub fn closest_rotation(&self, db_rotation: &Rotation, absolute: &Rotation) -> usize {
        let d0 = crate::geometry::angular_distance(
            &self.rotations[0].compose(db_rotation),
            absolute,
        );
        let d1 = crate::geometry::angular_distance(
            &self.rotations[1].compose(db_rotation),
            absolute,
        );
        usize::from(d1 < d0)
    }
}

/// Hartley-Zisserman decomposition.
pub fn decompose(e: &EssentialMatrix) -> Result<PoseCandidates> {
    let svd = SVD::new(e.0, true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::InvalidEssential("svd failed".into()));
    };
    let mut v = v_t.transpose();
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
    }
    let w = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = Rotation::from_matrix_unchecked(u * w * v.transpose());
    let r2 = Rotation::from_matrix_unchecked(u * w.transpose() * v.transpose());
    let t: Vec3 = u.column(2).into_owned();
    let sign_for = |r: &Rotation| {
        let recon = skew(&t) * r.matrix();
        if recon.dot(&e.0) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    };
    let signs = [sign_for(&r1), sign_for(&r2)];
    Ok(PoseCandidates {
        rotations: [r1, r2],
        direction: t,
        signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angular_distance, vector_angle_deg, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Rotation {
        loop {
            let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if n2 > 1e-3 && n2 <= 1.0 {
                return Rotation::from_quaternion(
                    UnitQuaternion::new(v[0], v[1], v[2], v[3]).unwrap(),
                );
            }
        }
    }

    fn random_relative(rng: &mut impl Rng) -> RelativePose {
        let t = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        RelativePose::new(random_rotation(rng), t).unwrap()
    }

    fn rel(r: Rotation, t: [f64; 3]) -> RelativePose {
        RelativePose::new(r, Vec3::from(t)).unwrap()
    }

    #[test]
    fn skew_of_unit_axes() {
        let e = essential_from_relative(&rel(Rotation::identity(), [1.0, 0.0, 0.0]));
        let expected = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(*e.matrix(), expected);
        let e = essential_from_relative(&rel(Rotation::identity(), [0.0, 0.0, 1.0]));
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(*e.matrix(), expected);
    }

    #[test]
    fn constructed_matrices_have_unit_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let e = essential_from_relative(&random_relative(&mut rng));
            let sv = e.matrix().singular_values();
            assert!((sv[0] - 1.0).abs() < 1e-10);
            assert!((sv[1] - 1.0).abs() < 1e-10);
            assert!(sv[2].abs() < 1e-10);
            assert!(EssentialMatrix::new(*e.matrix()).is_ok());
        }
    }

    #[test]
    fn projection_averages_singular_values() {
        let m = Mat3::from_diagonal(&Vec3::new(3.0, 1.0, 0.0));
        let e = project_to_essential(&m).unwrap();
        let sv = e.matrix().singular_values();
        assert!((sv[0] - 1.0).abs() < 1e-12 && (sv[1] - 1.0).abs() < 1e-12);
        assert!(sv[2].abs() < 1e-12);
        assert!((e.matrix() - Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0))).amax() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let e = essential_from_relative(&random_relative(&mut rng));
            let p = project_to_essential(e.matrix()).unwrap();
            assert!((p.matrix() - e.matrix()).norm() < 1e-9);
            let scaled = project_to_essential(&(e.matrix() * 37.5)).unwrap();
            assert!((scaled.matrix() - p.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn projection_of_perturbed_matrix_stays_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let e = essential_from_relative(&random_relative(&mut rng));
            let noise = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let p = project_to_essential(&(e.matrix() + 0.01 * noise)).unwrap();
            assert!(essential_distance(&p, &e) < 0.05);
        }
    }

    #[test]
    fn projection_rejects_rank_one() {
        let m = Vec3::new(1.0, 2.0, 3.0) * Vec3::new(0.5, -1.0, 2.0).transpose();
        assert!(matches!(project_to_essential(&m), Err(Error::DegenerateMatrix(_))));
        assert!(project_to_essential(&Mat3::zeros()).is_err());
    }

    #[test]
    fn invalid_matrix_is_rejected() {
        assert!(matches!(
            EssentialMatrix::new(Mat3::identity()),
            Err(Error::InvalidEssential(_))
        ));
    }

    #[test]
    fn decompose_trivial_pose() {
        let e = essential_from_relative(&rel(Rotation::identity(), [1.0, 0.0, 0.0]));
        let c = decompose(&e).unwrap();
        let found = c.candidates().iter().any(|p| {
            angular_distance(&p.rotation, &Rotation::identity()) < 1e-9
                && (p.direction() - Vec3::x()).norm() < 1e-9
        });
        assert!(found);
    }

    fn same_candidate_sets(a: &PoseCandidates, b: &PoseCandidates) -> bool {
        a.candidates().iter().all(|p| {
            b.candidates().iter().any(|q| {
                angular_distance(&p.rotation, &q.rotation) < 1e-9
                    && (p.direction() - q.direction()).norm() < 1e-9
            })
        })
    }

    #[test]
    fn sign_of_e_does_not_change_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let e = essential_from_relative(&random_relative(&mut rng));
            let a = decompose(&e).unwrap();
            let b = decompose(&e.neg()).unwrap();
            assert!(same_candidate_sets(&a, &b));
        }
    }

    #[test]
    fn exactly_one_candidate_matches_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let g = random_relative(&mut rng);
            let e = essential_from_relative(&g);
            let c = decompose(&e).unwrap();
            let hits = c
                .candidates()
                .iter()
                .filter(|p| {
                    angular_distance(&p.rotation, &g.rotation) < 1e-7
                        && vector_angle_deg(p.direction(), g.direction()).to_radians() < 1e-7
                })
                .count();
            assert_eq!(hits, 1);
            for r in c.rotations() {
                assert!((r.matrix().determinant() - 1.0).abs() < 1e-9);
            }
            // Every candidate reproduces E up to sign.
            for p in c.candidates() {
                assert!(essential_distance(&essential_from_relative(&p), &e) < 1e-7);
            }
            // The signed direction reproduces E including its sign.
            for which in 0..2 {
                let p = RelativePose::new(c.rotations()[which], c.signed_direction(which)).unwrap();
                assert!((essential_from_relative(&p).matrix() - e.matrix()).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn twisted_pair_differs_by_half_turn_about_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let e = essential_from_relative(&random_relative(&mut rng));
            let c = decompose(&e).unwrap();
            let [r, r2] = *c.rotations();
            let t = c.direction();
            // In the database frame the axis is R^T t.
            let t_db = r.matrix().transpose() * t;
            let half_turn = Rotation::from_axis_angle(&t_db, std::f64::consts::PI).unwrap();
            assert!(angular_distance(&r2, &r.compose(&half_turn)) < 1e-6);
            assert!((angular_distance(&r, &r2) - 180.0).abs() < 1e-6);
        }
    }

    #[test]
    fn distance_examples() {
        let a = essential_from_relative(&rel(Rotation::identity(), [1.0, 0.0, 0.0]));
        let b = essential_from_relative(&rel(Rotation::identity(), [0.0, 0.0, 1.0]));
        assert_eq!(essential_distance(&a, &a), 0.0);
        assert_eq!(essential_distance(&a, &a.neg()), 0.0);
        // Oracle: four entries of magnitude 1 differ, none overlap.
        let direct = (a.matrix() - b.matrix()).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_eq!(direct, 2.0);
        assert_eq!(essential_distance(&a, &b), 2.0);
        assert_eq!(essential_distance(&b, &a), 2.0);
    }
}
