//! Ego-motion handling: constant-velocity pose prediction and per-point
//! de-skewing of a sweep by pose interpolation.

use rayon::prelude::*;

use crate::geometry::{interpolate, Point3, RigidTransform};
use crate::sweep::Sweep;

/// The two most recent localized poses, newest first.
#[derive(Debug, Clone, Copy)]
pub struct PosePair {
    /// Pose at the end of the previous sweep.
    pub prev: RigidTransform,
    /// Pose at the end of the sweep before that.
    pub prev2: RigidTransform,
}

/// Constant-velocity prediction of the end-of-sweep pose:
/// `prev ∘ prev2⁻¹ ∘ prev`.
pub fn predict_pose(history: &PosePair) -> RigidTransform {
    history.prev.compose(&history.prev2.inverse()).compose(&history.prev)
}

/// Maps every sweep point to the world frame, interpolating the pose over the
/// sweep by each point's time fraction. Pre-de-skewed sweeps get the single
/// `end` pose. Output order matches input order.
pub fn deskew_sweep(sweep: &Sweep, start: &RigidTransform, end: &RigidTransform) -> Vec<Point3> {
    if sweep.pre_deskewed {
        return sweep
            .points
            .par_iter()
            .map(|p| end.apply(&p.position))
            .collect();
    }
    sweep
        .points
        .par_iter()
        .map(|p| interpolate(start, end, p.time_fraction).apply(&p.position))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use crate::sweep::TimedPoint;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Vector3};
    use proptest::prelude::*;

    fn sweep_of(points: Vec<(Point3, f64)>) -> Sweep {
        Sweep {
            index: 0,
            points: points
                .into_iter()
                .map(|(position, time_fraction)| TimedPoint {
                    position,
                    time_fraction,
                    intensity: None,
                })
                .collect(),
            frame: Frame::Sensor,
            pre_deskewed: false,
        }
    }

    #[test]
    fn stationary_history_predicts_no_motion() {
        let t = RigidTransform::from_parts(
            Rotation3::from_scaled_axis(Vector3::new(0.2, -0.1, 0.5)).into_inner(),
            Vector3::new(3.0, 2.0, 1.0),
        );
        let predicted = predict_pose(&PosePair { prev: t, prev2: t });
        assert!((predicted.translation() - t.translation()).amax() < 1e-12);
        assert!((predicted.rotation() - t.rotation()).amax() < 1e-12);
    }

    #[test]
    fn constant_linear_velocity_extrapolates() {
        let predicted = predict_pose(&PosePair {
            prev: RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0)),
            prev2: RigidTransform::identity(),
        });
        assert_relative_eq!(
            *predicted.translation(),
            Vector3::new(2.0, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn prediction_matches_matrix_product_oracle() {
        let prev = RigidTransform::from_parts(
            *RigidTransform::from_rotation_z(10f64.to_radians()).rotation(),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let prev2 = RigidTransform::identity();
        let predicted = predict_pose(&PosePair { prev, prev2 });

        // Oracle: multiply 4×4 homogeneous matrices directly.
        let hom = |t: &RigidTransform| {
            let mut m = nalgebra::Matrix4::<f64>::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(t.rotation());
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(t.translation());
            m
        };
        let expected = hom(&prev) * hom(&prev2).try_inverse().unwrap() * hom(&prev);
        assert_relative_eq!(
            hom(&predicted),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn no_motion_leaves_points_unchanged() {
        let sweep = sweep_of(vec![
            (Vector3::new(1.0, 2.0, 3.0), 0.1),
            (Vector3::new(-4.0, 0.0, 2.0), 0.9),
        ]);
        let identity = RigidTransform::identity();
        let out = deskew_sweep(&sweep, &identity, &identity);
        assert_eq!(out[0], Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(out[1], Vector3::new(-4.0, 0.0, 2.0));
    }

    #[test]
    fn midpoint_translation_shifts_by_half() {
        let sweep = sweep_of(vec![(Vector3::new(5.0, 0.0, 0.0), 0.5)]);
        let out = deskew_sweep(
            &sweep,
            &RigidTransform::identity(),
            &RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0)),
        );
        assert_relative_eq!(out[0], Vector3::new(5.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rotation_fraction_matches_slerp_oracle() {
        // A quarter of a 3.6° sweep rotation is 0.9°.
        let sweep = sweep_of(vec![(Vector3::new(10.0, 0.0, 0.0), 0.25)]);
        let out = deskew_sweep(
            &sweep,
            &RigidTransform::identity(),
            &RigidTransform::from_rotation_z(3.6f64.to_radians()),
        );
        let expected = RigidTransform::from_rotation_z(0.9f64.to_radians())
            .apply(&Vector3::new(10.0, 0.0, 0.0));
        assert_relative_eq!(out[0], expected, epsilon = 1e-9);
    }

    #[test]
    fn pre_deskewed_sweeps_get_the_end_pose_only() {
        let mut sweep = sweep_of(vec![(Vector3::new(1.0, 0.0, 0.0), 0.5)]);
        sweep.pre_deskewed = true;
        let out = deskew_sweep(
            &sweep,
            &RigidTransform::identity(),
            &RigidTransform::from_translation(Vector3::new(2.0, 0.0, 0.0)),
        );
        assert_eq!(out[0], Vector3::new(3.0, 0.0, 0.0));
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -5.0f64..5.0,
            -5.0f64..5.0,
            -5.0f64..5.0,
        )
            .prop_map(|(rx, ry, rz, x, y, z)| {
                RigidTransform::from_parts(
                    Rotation3::from_scaled_axis(Vector3::new(rx, ry, rz)).into_inner(),
                    Vector3::new(x, y, z),
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn zero_velocity_is_a_fixed_point(t in arb_transform()) {
            let p = predict_pose(&PosePair { prev: t, prev2: t });
            prop_assert!((p.translation() - t.translation()).amax() < 1e-9);
            prop_assert!((p.rotation() - t.rotation()).amax() < 1e-9);
        }

        #[test]
        fn deskew_is_equivariant_under_precomposition(
            g in arb_transform(),
            end in arb_transform(),
            px in -10.0f64..10.0,
            py in -10.0f64..10.0,
            u in 0.0f64..1.0,
        ) {
            let sweep = sweep_of(vec![(Vector3::new(px, py, 1.0), u)]);
            let start = RigidTransform::identity();
            let base = deskew_sweep(&sweep, &start, &end);
            let moved = deskew_sweep(&sweep, &g.compose(&start), &g.compose(&end));
            prop_assert!((moved[0] - g.apply(&base[0])).amax() < 1e-9);
        }
    }
}
