//! KITTI-style drift metrics: averaged relative pose error over fixed
//! path-length segments, plus loop endpoint error.

use std::fmt;

use thiserror::Error;

use crate::geometry::RigidTransform;

/// Segment lengths (meters) evaluated by the benchmark convention.
pub const SEGMENT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory lengths differ: estimate {estimate}, truth {truth}")]
    LengthMismatch { estimate: usize, truth: usize },
    #[error("trajectory too short: no {0} m segment realizable")]
    TooShort(f64),
}

/// Drift summary for one (estimate, truth) trajectory pair.
#[derive(Debug, Clone)]
pub struct DriftReport {
    /// Mean relative translation error over all segments, percent.
    pub translation_drift_percent: f64,
    /// Mean relative rotation error over all segments, degrees per meter.
    pub rotation_drift_deg_per_m: f64,
    /// Per segment length: (length m, translation %, rotation deg/m).
    /// Only lengths realizable on the trajectory appear.
    pub per_length: Vec<(f64, f64, f64)>,
    /// Distance between the final poses (meters).
    pub endpoint_error_m: f64,
    /// Endpoint error as a percentage of the truth path length.
    pub endpoint_error_percent: f64,
    /// Total truth path length (meters).
    pub path_length_m: f64,
}

impl fmt::Display for DriftReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "path length      : {:.3} m", self.path_length_m)?;
        writeln!(
            f,
            "translation drift: {:.4} %",
            self.translation_drift_percent
        )?;
        writeln!(
            f,
            "rotation drift   : {:.6} deg/m",
            self.rotation_drift_deg_per_m
        )?;
        writeln!(
            f,
            "endpoint error   : {:.3} m ({:.4} % of path)",
            self.endpoint_error_m, self.endpoint_error_percent
        )?;
        for (length, t, r) in &self.per_length {
            writeln!(f, "  {length:>5.0} m segments: {t:.4} %  {r:.6} deg/m")?;
        }
        Ok(())
    }
}

/// Evaluates an estimated trajectory against ground truth.
///
/// Both trajectories must be equally long and expressed against the same
/// start (callers normalize to identity-at-start). For every segment length L
/// and every start frame from which the truth path reaches L, the relative
/// motions over the segment are compared: translation error
/// `‖Δt_est − Δt_truth‖ / L` and rotation error `angle(ΔR_estᵀ ΔR_truth) / L`.
pub fn evaluate_kitti(
    estimate: &[RigidTransform],
    truth: &[RigidTransform],
) -> Result<DriftReport, EvalError> {
    if estimate.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            estimate: estimate.len(),
            truth: truth.len(),
        });
    }
    if truth.len() < 2 {
        return Err(EvalError::TooShort(SEGMENT_LENGTHS[0]));
    }

    // Cumulative truth path length per frame.
    let mut path = Vec::with_capacity(truth.len());
    let mut total = 0.0;
    path.push(0.0);
    for w in truth.windows(2) {
        total += (w[1].translation() - w[0].translation()).norm();
        path.push(total);
    }

    let mut per_length = Vec::new();
    let mut sum_t = 0.0;
    let mut sum_r = 0.0;
    let mut count = 0usize;
    for &length in &SEGMENT_LENGTHS {
        let mut seg_t = 0.0;
        let mut seg_r = 0.0;
        let mut seg_count = 0usize;
        let mut end = 0usize;
        for start in 0..truth.len() {
            if end < start {
                end = start;
            }
            while end < truth.len() && path[end] - path[start] < length {
                end += 1;
            }
            if end == truth.len() {
                break;
            }
            let delta_est = estimate[start].inverse().compose(&estimate[end]);
            let delta_truth = truth[start].inverse().compose(&truth[end]);
            let translation_error =
                (delta_est.translation() - delta_truth.translation()).norm() / length;
            let rotation_error = delta_est.rotation_angle_to(&delta_truth).to_degrees() / length;
            seg_t += translation_error;
            seg_r += rotation_error;
            seg_count += 1;
        }
        if seg_count > 0 {
            per_length.push((
                length,
                100.0 * seg_t / seg_count as f64,
                seg_r / seg_count as f64,
            ));
            sum_t += seg_t;
            sum_r += seg_r;
            count += seg_count;
        }
    }
    if count == 0 {
        return Err(EvalError::TooShort(SEGMENT_LENGTHS[0]));
    }

    let endpoint_error_m = (estimate.last().unwrap().translation()
        - truth.last().unwrap().translation())
    .norm();
    Ok(DriftReport {
        translation_drift_percent: 100.0 * sum_t / count as f64,
        rotation_drift_deg_per_m: sum_r / count as f64,
        per_length,
        endpoint_error_m,
        endpoint_error_percent: 100.0 * endpoint_error_m / total,
        path_length_m: total,
    })
}

/// Rebases a trajectory so its first pose is the identity.
pub fn normalize_to_start(poses: &[RigidTransform]) -> Vec<RigidTransform> {
    let Some(first) = poses.first() else {
        return Vec::new();
    };
    let inverse = first.inverse();
    poses.iter().map(|p| inverse.compose(p)).collect()
}
