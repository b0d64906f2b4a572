//! Rigid transforms, pose interpolation and the linearized point-to-plane solver.
//!
//! All poses are right-handed SE(3) transforms stored as a rotation matrix plus
//! translation. Rotations drift out of orthonormality under long composition
//! chains, so the matrix is re-orthonormalized through a quaternion round trip
//! every [`REORTHONORMALIZE_EVERY`] compositions or whenever drift is detected.

use nalgebra::{Cholesky, Matrix3, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};
use thiserror::Error;

/// A 3D point. Interpretation (sensor / vehicle / world frame) is carried by
/// the containing cloud, see [`Frame`].
pub type Point3 = Vector3<f64>;

/// Coordinate frame a point or cloud lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Raw sensor coordinates as read from disk.
    Sensor,
    /// Vehicle frame: X right, Y forward, Z up.
    Vehicle,
    /// World frame anchored at the first localized sweep.
    World,
}

/// Compositions between forced re-orthonormalizations of the rotation.
const REORTHONORMALIZE_EVERY: u32 = 100;

/// Orthonormality drift (max-abs of RᵀR − I) tolerated before an eager fix.
const ORTHONORMALITY_TOL: f64 = 1e-9;

/// Condition-number estimate above which the 6×6 normal system is rejected.
const MAX_CONDITION: f64 = 1e12;

/// SE(3) rigid transform: `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    /// Compositions since the rotation was last re-orthonormalized.
    age: u32,
}

impl PartialEq for RigidTransform {
    fn eq(&self, other: &Self) -> bool {
        self.rotation == other.rotation && self.translation == other.translation
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            age: 0,
        }
    }

    /// Builds a transform from a rotation matrix and translation.
    ///
    /// The rotation must be a proper rotation (orthonormal, det +1); slight
    /// numeric drift is projected back onto SO(3).
    ///
    /// # Panics
    /// If the matrix is not close to a proper rotation or any entry is not finite.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        assert!(
            rotation.iter().all(|v| v.is_finite()) && translation.iter().all(|v| v.is_finite()),
            "non-finite transform"
        );
        assert!(
            rotation.determinant() > 0.0,
            "rotation must have positive determinant"
        );
        let mut out = Self {
            rotation,
            translation,
            age: 0,
        };
        let drift = out.orthonormality_error();
        assert!(drift < 1e-6, "matrix is not orthonormal (drift {drift:.3e})");
        if drift > ORTHONORMALITY_TOL {
            out.reorthonormalize();
        }
        out
    }

    /// Like [`from_parts`](Self::from_parts) but tolerates the larger drift of
    /// rotations parsed from text files, projecting them back onto SO(3).
    /// Returns `None` when the matrix is not usably close to a rotation.
    pub fn from_parts_projected(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Option<Self> {
        if !rotation.iter().all(|v| v.is_finite())
            || !translation.iter().all(|v| v.is_finite())
            || rotation.determinant() < 0.5
        {
            return None;
        }
        let mut out = Self {
            rotation,
            translation,
            age: 0,
        };
        if out.orthonormality_error() > 1e-3 {
            return None;
        }
        out.reorthonormalize();
        Some(out)
    }

    pub fn from_rotation_z(angle: f64) -> Self {
        Self::from_parts(
            Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner(),
            Vector3::zeros(),
        )
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
            age: 0,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Applies the transform to a point.
    #[inline]
    pub fn apply(&self, point: &Point3) -> Point3 {
        self.rotation * point + self.translation
    }

    /// Rotates a direction vector (no translation).
    #[inline]
    pub fn rotate(&self, direction: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * direction
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut out = Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            age: self.age.max(other.age) + 1,
        };
        if out.age >= REORTHONORMALIZE_EVERY || out.orthonormality_error() > ORTHONORMALITY_TOL {
            out.reorthonormalize();
        }
        out
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.transpose();
        Self {
            rotation,
            translation: -(rotation * self.translation),
            age: self.age,
        }
    }

    /// Max-abs entry of RᵀR − I.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn reorthonormalize(&mut self) {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            self.rotation,
        ));
        let q = UnitQuaternion::new_normalize(q.into_inner());
        self.rotation = q.to_rotation_matrix().into_inner();
        self.age = 0;
    }

    /// Rotation angle of the relative transform `self⁻¹ ∘ other`, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        shortest_scaled_axis(&(self.rotation.transpose() * other.rotation)).norm()
    }
}

/// Axis-angle vector of a rotation matrix with angle in [0, π] (shortest arc).
fn shortest_scaled_axis(rotation: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rotation));
    let q = if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    };
    q.scaled_axis()
}

/// Interpolates between two poses: translation linearly, rotation along the
/// shortest-arc geodesic (`R(u) = Ra · exp(u · log(Raᵀ Rb))`).
pub fn interpolate(a: &RigidTransform, b: &RigidTransform, u: f64) -> RigidTransform {
    let translation = a.translation * (1.0 - u) + b.translation * u;
    let relative = shortest_scaled_axis(&(a.rotation.transpose() * b.rotation));
    let step = Rotation3::from_scaled_axis(relative * u).into_inner();
    RigidTransform {
        rotation: a.rotation * step,
        translation,
        age: a.age.max(b.age) + 1,
    }
}

/// Six-DOF motion under the small-angle assumption: `p ↦ exp([ω]×)·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMotion {
    /// Axis-angle rotation vector ω (radians).
    pub rotation: Vector3<f64>,
    /// Translation (meters).
    pub translation: Vector3<f64>,
}

impl SmallMotion {
    pub fn zero() -> Self {
        Self {
            rotation: Vector3::zeros(),
            translation: Vector3::zeros(),
        }
    }

    /// Exact SE(3) transform for this motion (full exponential, not the
    /// linearization used by the solver).
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform {
            rotation: Rotation3::from_scaled_axis(self.rotation).into_inner(),
            translation: self.translation,
            age: 0,
        }
    }
}

/// One point-to-plane constraint: `normal · (motion(source) − target)` should vanish.
#[derive(Debug, Clone, Copy)]
pub struct PlaneConstraint {
    pub source: Point3,
    pub target: Point3,
    /// Unit surface normal at the target.
    pub normal: Vector3<f64>,
}

/// The 6×6 normal system was rank deficient or too ill-conditioned to trust;
/// the caller should fall back to its prior pose estimate.
#[derive(Debug, Clone, Copy, Error)]
#[error("degenerate point-to-plane system (condition estimate {condition:.3e})")]
pub struct DegenerateSystem {
    pub condition: f64,
}

/// Solves `min Σ (n · ((I + [ω]×)·x + t − y))²` for the stacked unknowns (ω, t).
///
/// Uses 6×6 normal equations with a Cholesky factorization; the condition
/// number is estimated from the squared ratio of the extreme Cholesky pivots.
pub fn solve_point_to_plane(constraints: &[PlaneConstraint]) -> Result<SmallMotion, DegenerateSystem> {
    if constraints.len() < 6 {
        return Err(DegenerateSystem {
            condition: f64::INFINITY,
        });
    }
    let mut ata = Matrix6::<f64>::zeros();
    let mut atb = Vector6::<f64>::zeros();
    for c in constraints {
        // n·(ω × x) = ω·(x × n), so the Jacobian row is [(x × n)ᵀ, nᵀ].
        let lever = c.source.cross(&c.normal);
        let mut row = Vector6::zeros();
        row.fixed_rows_mut::<3>(0).copy_from(&lever);
        row.fixed_rows_mut::<3>(3).copy_from(&c.normal);
        let rhs = c.normal.dot(&(c.target - c.source));
        ata.syger(1.0, &row, &row, 1.0);
        atb += row * rhs;
    }
    let chol = Cholesky::new(ata).ok_or(DegenerateSystem {
        condition: f64::INFINITY,
    })?;
    let l = chol.l_dirty();
    let mut low = f64::INFINITY;
    let mut high = 0.0f64;
    for i in 0..6 {
        let pivot = l[(i, i)];
        low = low.min(pivot);
        high = high.max(pivot);
    }
    let condition = (high / low).powi(2);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(DegenerateSystem { condition });
    }
    let solution = chol.solve(&atb);
    Ok(SmallMotion {
        rotation: solution.fixed_rows::<3>(0).into(),
        translation: solution.fixed_rows::<3>(3).into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn transforms_close(a: &RigidTransform, b: &RigidTransform, tol: f64) -> bool {
        let dr = (a.rotation() - b.rotation())
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let dt = (a.translation() - b.translation()).amax();
        dr < tol && dt < tol
    }

    fn rz(deg: f64) -> RigidTransform {
        RigidTransform::from_rotation_z(deg.to_radians())
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = RigidTransform::from_parts(
            Rotation3::from_scaled_axis(Vector3::new(0.3, -0.2, 0.9)).into_inner(),
            Vector3::new(1.0, -2.0, 3.0),
        );
        assert!(transforms_close(
            &RigidTransform::identity().compose(&t),
            &t,
            1e-15
        ));
        assert!(transforms_close(
            &t.compose(&t.inverse()),
            &RigidTransform::identity(),
            1e-9
        ));
    }

    #[test]
    fn compose_matches_hand_multiplication() {
        // Rz(90°)+t(1,0,0) followed after Rz(90°) gives Rz(180°)+t(1,0,0).
        let a = RigidTransform::from_parts(
            rz(90.0).rotation().to_owned(),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let b = rz(90.0);
        let got = a.compose(&b);
        let expected_rotation =
            Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*got.rotation(), expected_rotation, epsilon = 1e-12);
        assert_relative_eq!(
            *got.translation(),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotation_stays_orthonormal_over_long_chains() {
        let step = RigidTransform::from_parts(
            Rotation3::from_scaled_axis(Vector3::new(1e-3, 2e-3, -1e-3)).into_inner(),
            Vector3::new(0.01, 0.0, 0.0),
        );
        let mut pose = RigidTransform::identity();
        for _ in 0..10_000 {
            pose = pose.compose(&step);
        }
        assert!(pose.orthonormality_error() < 1e-9);
    }

    #[test]
    fn interpolate_equal_endpoints() {
        let a = RigidTransform::from_parts(
            rz(33.0).rotation().to_owned(),
            Vector3::new(4.0, 5.0, 6.0),
        );
        assert!(transforms_close(&interpolate(&a, &a, 0.5), &a, 1e-12));
    }

    #[test]
    fn interpolate_pure_translation() {
        let b = RigidTransform::from_translation(Vector3::new(2.0, 0.0, 0.0));
        let mid = interpolate(&RigidTransform::identity(), &b, 0.25);
        assert_relative_eq!(
            *mid.translation(),
            Vector3::new(0.5, 0.0, 0.0),
            epsilon = 1e-15
        );
        assert!(mid.orthonormality_error() < 1e-12);
    }

    #[test]
    fn interpolate_matches_quaternion_slerp_oracle() {
        // Independent oracle: textbook sin-weighted quaternion slerp.
        let q0 = UnitQuaternion::identity();
        let q1 = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 90f64.to_radians());
        let dot = q0.coords.dot(&q1.coords);
        let theta = dot.acos();
        let u = 0.5;
        let qm = UnitQuaternion::new_normalize(
            q0.into_inner() * ((1.0 - u) * theta).sin() / theta.sin()
                + q1.into_inner() * (u * theta).sin() / theta.sin(),
        );
        let expected = qm.to_rotation_matrix().into_inner();

        let got = interpolate(&RigidTransform::identity(), &rz(90.0), u);
        assert_relative_eq!(*got.rotation(), expected, epsilon = 1e-12);
        // And the closed form: Rz(45°).
        assert_relative_eq!(*got.rotation(), *rz(45.0).rotation(), epsilon = 1e-12);
    }

    #[test]
    fn interpolate_hits_endpoints() {
        let a = RigidTransform::from_parts(
            Rotation3::from_scaled_axis(Vector3::new(0.1, 0.4, -0.3)).into_inner(),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let b = RigidTransform::from_parts(
            Rotation3::from_scaled_axis(Vector3::new(-0.2, 0.1, 0.8)).into_inner(),
            Vector3::new(-4.0, 0.5, 2.0),
        );
        assert!(transforms_close(&interpolate(&a, &b, 0.0), &a, 1e-12));
        assert!(transforms_close(&interpolate(&a, &b, 1.0), &b, 1e-9));
    }

    #[test]
    fn solve_zero_residual_gives_zero_motion() {
        let normals = [Vector3::x(), Vector3::y(), Vector3::z()];
        let mut constraints = Vec::new();
        for i in 0..9 {
            let p = Vector3::new(i as f64, (i * i % 5) as f64, (i % 3) as f64);
            constraints.push(PlaneConstraint {
                source: p,
                target: p,
                normal: normals[i % 3],
            });
        }
        let motion = solve_point_to_plane(&constraints).unwrap();
        assert!(motion.rotation.norm() < 1e-12);
        assert!(motion.translation.norm() < 1e-12);
    }

    /// Points on three orthogonal planes, targets displaced by a pure translation.
    #[test]
    fn solve_recovers_pure_translation() {
        let shift = Vector3::new(0.1, 0.0, 0.0);
        let mut constraints = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (i as f64, j as f64);
                for (source, normal) in [
                    (Vector3::new(a, b, 0.0), Vector3::z()),
                    (Vector3::new(0.0, a, b), Vector3::x()),
                    (Vector3::new(a, 0.0, b), Vector3::y()),
                ] {
                    constraints.push(PlaneConstraint {
                        source,
                        target: source + shift,
                        normal,
                    });
                }
            }
        }
        let motion = solve_point_to_plane(&constraints).unwrap();
        assert_relative_eq!(motion.translation, shift, epsilon = 1e-6);
        assert!(motion.rotation.norm() < 1e-6);
        // Normal-equation residual must be tiny relative to the rhs.
        let mut ata = Matrix6::<f64>::zeros();
        let mut atb = Vector6::<f64>::zeros();
        for c in &constraints {
            let mut row = Vector6::zeros();
            row.fixed_rows_mut::<3>(0).copy_from(&c.source.cross(&c.normal));
            row.fixed_rows_mut::<3>(3).copy_from(&c.normal);
            ata += row * row.transpose();
            atb += row * c.normal.dot(&(c.target - c.source));
        }
        let mut xi = Vector6::zeros();
        xi.fixed_rows_mut::<3>(0).copy_from(&motion.rotation);
        xi.fixed_rows_mut::<3>(3).copy_from(&motion.translation);
        assert!((ata * xi - atb).norm() / atb.norm() < 1e-9);
    }

    #[test]
    fn solve_single_plane_is_degenerate() {
        let constraints: Vec<_> = (0..12)
            .map(|i| {
                let p = Vector3::new((i % 4) as f64, (i / 4) as f64, 0.0);
                PlaneConstraint {
                    source: p,
                    target: p + Vector3::new(0.0, 0.0, 0.1),
                    normal: Vector3::z(),
                }
            })
            .collect();
        assert!(solve_point_to_plane(&constraints).is_err());
    }

    #[test]
    fn solve_rejects_underdetermined_input() {
        assert!(solve_point_to_plane(&[]).is_err());
    }

    fn arb_rotation() -> impl Strategy<Value = Matrix3<f64>> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| {
            Rotation3::from_scaled_axis(Vector3::new(x, y, z) * 1.5).into_inner()
        })
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (arb_rotation(), -10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0)
            .prop_map(|(r, x, y, z)| RigidTransform::from_parts(r, Vector3::new(x, y, z)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn compose_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(transforms_close(&left, &right, 1e-9));
        }

        #[test]
        fn interpolate_is_monotone_along_geodesic(
            a in arb_transform(),
            b in arb_transform(),
            u in 0.0f64..1.0,
        ) {
            let total = a.rotation_angle_to(&b);
            let partial = a.rotation_angle_to(&interpolate(&a, &b, u));
            prop_assert!((partial - u * total).abs() < 1e-9);
        }

        #[test]
        fn solve_recovers_injected_small_motion(
            wx in -1.0f64..1.0, wy in -1.0f64..1.0, wz in -1.0f64..1.0,
            tx in -1.0f64..1.0, ty in -1.0f64..1.0, tz in -1.0f64..1.0,
        ) {
            // Rotation capped at 2 degrees, translation at 0.2 m.
            let axis = Vector3::new(wx, wy, wz);
            let rotation = if axis.norm() > 1e-12 {
                axis.normalize() * 2f64.to_radians() * axis.norm().min(1.0)
            } else {
                Vector3::zeros()
            };
            let truth = SmallMotion {
                rotation,
                translation: Vector3::new(tx, ty, tz) * 0.2,
            };
            let t = truth.to_transform();

            let normals = [Vector3::x(), Vector3::y(), Vector3::z()];
            let mut constraints: Vec<_> = (0..9)
                .map(|i| {
                    let source = Vector3::new(
                        ((i * 7) % 11) as f64 - 5.0,
                        ((i * 3) % 7) as f64 - 3.0,
                        ((i * 5) % 9) as f64 - 4.0,
                    );
                    PlaneConstraint { source, target: t.apply(&source), normal: normals[i % 3] }
                })
                .collect();

            // One linear solve is only first order; iterate the linearization
            // to the fixed point before comparing.
            let mut accumulated = RigidTransform::identity();
            for _ in 0..12 {
                let step = solve_point_to_plane(&constraints).unwrap().to_transform();
                accumulated = step.compose(&accumulated);
                for c in &mut constraints {
                    c.source = step.apply(&c.source);
                }
            }
            prop_assert!(transforms_close(&accumulated, &t, 1e-6));
        }
    }
}
