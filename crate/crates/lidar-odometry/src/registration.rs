//! Scan-to-model matching and the per-sweep localization sequence.
//!
//! Matching iterates a fixed number of times: project every sample onto the
//! IMLS surface, solve the linearized point-to-plane system, apply the motion
//! to the samples, repeat. Samples whose nearest map point leaves the outlier
//! radius are skipped for that iteration only. On a degenerate system or a
//! starved constraint set the sweep falls back to its predicted pose.

use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::config::{DeskewMode, RunConfig, SamplingMode};
use crate::deskew::{deskew_sweep, predict_pose, PosePair};
use crate::features::{compute_features, FeaturedCloud};
use crate::geometry::{
    solve_point_to_plane, Frame, PlaneConstraint, Point3, RigidTransform,
};
use crate::imls::ModelMap;
use crate::removal::{remove_small_objects, RemovalParams};
use crate::sampling::{
    build_score_lists, draw_all_samples, draw_random_samples, draw_samples, SampleSet,
};
use crate::sweep::Sweep;

/// Outcome of matching one scan against the model.
#[derive(Debug, Clone, Copy)]
pub struct MatchResult {
    /// World pose of the scan (τ at the end of the sweep).
    pub pose: RigidTransform,
    pub iterations_run: usize,
    /// Constraints used by the last completed iteration.
    pub final_constraints: usize,
    /// Mean |n · (moved sample − projection)| of the last iteration (meters).
    pub mean_abs_residual: f64,
    /// True when matching gave up and `pose` is the prediction.
    pub fallback: bool,
}

/// Registers samples (posed at `prediction`) against the map.
///
/// The returned pose composes the accumulated correction with the prediction.
pub fn match_scan(
    samples: &SampleSet,
    prediction: &RigidTransform,
    map: &ModelMap,
    iterations: usize,
) -> MatchResult {
    let fallback = |iterations_run: usize| MatchResult {
        pose: *prediction,
        iterations_run,
        final_constraints: 0,
        mean_abs_residual: f64::NAN,
        fallback: true,
    };
    if map.is_empty() || samples.is_empty() {
        return fallback(0);
    }

    let mut positions: Vec<Point3> = samples.samples.iter().map(|s| s.position).collect();
    let mut accumulated = RigidTransform::identity();
    let mut final_constraints = 0;
    let mut mean_abs_residual = 0.0;

    for iteration in 0..iterations {
        let projections: Vec<Option<(Point3, Vector3<f64>)>> = positions
            .par_iter()
            .map(|p| map.project_to_surface(p))
            .collect();

        // Solve around the sample centroid: world coordinates grow with the
        // trajectory and would otherwise feed huge lever arms into the
        // rotation block of the normal equations.
        let mut center = Vector3::zeros();
        let mut used = 0usize;
        for (p, projection) in positions.iter().zip(&projections) {
            if projection.is_some() {
                center += p;
                used += 1;
            }
        }
        if used < 6 {
            return fallback(iteration);
        }
        center /= used as f64;

        let constraints: Vec<PlaneConstraint> = positions
            .iter()
            .zip(&projections)
            .filter_map(|(p, projection)| {
                projection.as_ref().map(|(target, normal)| PlaneConstraint {
                    source: p - center,
                    target: target - center,
                    normal: *normal,
                })
            })
            .collect();

        let motion = match solve_point_to_plane(&constraints) {
            Ok(motion) => motion,
            Err(_) => return fallback(iteration),
        };
        let local_step = motion.to_transform();
        let step = RigidTransform::from_translation(center)
            .compose(&local_step)
            .compose(&RigidTransform::from_translation(-center));

        accumulated = step.compose(&accumulated);
        for p in positions.iter_mut() {
            *p = step.apply(p);
        }

        final_constraints = constraints.len();
        mean_abs_residual = constraints
            .iter()
            .map(|c| {
                c.normal
                    .dot(&(local_step.apply(&c.source) - c.target))
                    .abs()
            })
            .sum::<f64>()
            / constraints.len() as f64;
        let _ = iteration;
    }

    MatchResult {
        pose: accumulated.compose(prediction),
        iterations_run: iterations,
        final_constraints,
        mean_abs_residual,
        fallback: false,
    }
}

/// Wall-clock milliseconds spent in each stage of one sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTiming {
    pub deskew_ms: f64,
    pub removal_ms: f64,
    pub features_ms: f64,
    pub sampling_ms: f64,
    pub match_ms: f64,
    pub insert_ms: f64,
}

/// Everything the manifest wants to know about one processed sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepSummary {
    pub result: MatchResult,
    pub raw_points: usize,
    pub kept_points: usize,
    pub samples: usize,
    pub timing: StageTiming,
}

/// Odometry state threaded through the sweep sequence.
pub struct OdometryState {
    pub config: RunConfig,
    pub removal: RemovalParams,
    pub poses: Vec<RigidTransform>,
    pub map: ModelMap,
}

impl OdometryState {
    pub fn new(config: RunConfig) -> Self {
        let map = ModelMap::new(
            config.model_scans,
            config.kernel_width,
            config.neighbor_radius,
        );
        Self {
            config,
            removal: RemovalParams::default(),
            poses: Vec::new(),
            map,
        }
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs one sweep through the whole chain: predict, de-skew, remove small
/// objects, compute features, sample, match, then rebuild the map
/// contribution from raw points with the solved pose and insert it.
pub fn localize_sweep(state: &mut OdometryState, sweep: &Sweep) -> SweepSummary {
    let config = state.config.clone();
    let k = state.poses.len();

    // Remap raw sensor axes into the vehicle convention and resolve the
    // de-skew mode for this sweep.
    let mut sweep = sweep.clone();
    for p in &mut sweep.points {
        p.position = config.axis_remap.apply(&p.position);
    }
    sweep.frame = Frame::Vehicle;
    sweep.pre_deskewed = match config.deskew {
        DeskewMode::On => false,
        DeskewMode::Off => true,
        DeskewMode::Auto => sweep.pre_deskewed,
    };

    let raw_points = sweep.len();
    let mut timing = StageTiming::default();

    let previous = k.checked_sub(1).map(|i| state.poses[i]);
    let prediction = match k {
        0 => RigidTransform::identity(),
        1 => state.poses[0],
        _ => predict_pose(&PosePair {
            prev: state.poses[k - 1],
            prev2: state.poses[k - 2],
        }),
    };
    let start_pose = previous.unwrap_or(prediction);

    // De-skew with the prediction for matching.
    let clock = Instant::now();
    let world = deskew_sweep(&sweep, &start_pose, &prediction);
    timing.deskew_ms = ms_since(clock);

    // Object removal happens in the vehicle frame of the predicted end pose.
    let clock = Instant::now();
    let to_vehicle = prediction.inverse();
    let vehicle: Vec<Point3> = world.par_iter().map(|p| to_vehicle.apply(p)).collect();
    let kept: Vec<usize> = if config.object_removal {
        remove_small_objects(&vehicle, &state.removal).kept
    } else {
        (0..vehicle.len()).collect()
    };
    timing.removal_ms = ms_since(clock);

    let kept_vehicle: Vec<Point3> = kept.iter().map(|&i| vehicle[i]).collect();

    // Features in the scan's own geometry; frozen for the whole sweep.
    let clock = Instant::now();
    let featured = compute_features(
        &kept_vehicle,
        Frame::Vehicle,
        config.k_neighbors,
        &Point3::zeros(),
    );
    timing.features_ms = ms_since(clock);

    let Ok(featured) = featured else {
        // Too few points to say anything about the surface: keep the
        // prediction and leave the map untouched.
        state.poses.push(prediction);
        return SweepSummary {
            result: MatchResult {
                pose: prediction,
                iterations_run: 0,
                final_constraints: 0,
                mean_abs_residual: f64::NAN,
                fallback: k > 0,
            },
            raw_points,
            kept_points: kept.len(),
            samples: 0,
            timing,
        };
    };

    let result;
    let mut samples_drawn = 0;

    if k == 0 {
        // Bootstrap: the first sweep defines the world frame.
        result = MatchResult {
            pose: RigidTransform::identity(),
            iterations_run: 0,
            final_constraints: 0,
            mean_abs_residual: 0.0,
            fallback: false,
        };
    } else {
        let clock = Instant::now();
        let positions: Vec<Point3> = kept.iter().map(|&i| world[i]).collect();
        let normals: Vec<Vector3<f64>> = featured
            .normals
            .iter()
            .map(|n| prediction.rotate(n))
            .collect();
        let drawn = match config.sampling {
            SamplingMode::Ours => {
                let lists = build_score_lists(&featured);
                draw_samples(
                    &lists,
                    &positions,
                    &normals,
                    &state.map,
                    config.samples_per_list,
                    config.neighbor_radius,
                )
            }
            SamplingMode::Random => {
                // Seeded per sweep so reruns are reproducible.
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                    0x5a3c_9e21_u64 ^ (sweep.index as u64),
                );
                use rand::SeedableRng;
                draw_random_samples(
                    &positions,
                    &normals,
                    &state.map,
                    9 * config.samples_per_list,
                    config.neighbor_radius,
                    &mut rng,
                )
            }
            SamplingMode::All => draw_all_samples(
                &positions,
                &normals,
                &state.map,
                config.neighbor_radius,
            ),
        };
        timing.sampling_ms = ms_since(clock);

        let clock = Instant::now();
        result = match drawn {
            Ok(samples) => {
                samples_drawn = samples.len();
                match_scan(&samples, &prediction, &state.map, config.iterations)
            }
            Err(_) => MatchResult {
                pose: prediction,
                iterations_run: 0,
                final_constraints: 0,
                mean_abs_residual: f64::NAN,
                fallback: true,
            },
        };
        timing.match_ms = ms_since(clock);
    }

    // Rebuild the map contribution from raw points with the solved pose and
    // the normals frozen at matching time.
    let clock = Instant::now();
    let final_world = deskew_sweep(&sweep, &start_pose, &result.pose);
    let contribution = FeaturedCloud {
        points: kept.iter().map(|&i| final_world[i]).collect(),
        normals: featured
            .normals
            .iter()
            .map(|n| result.pose.rotate(n))
            .collect(),
        planarity: featured.planarity.clone(),
        usable: featured.usable.clone(),
        frame: Frame::World,
    }
    .retain_usable();
    state.map.insert_scan(contribution);
    timing.insert_ms = ms_since(clock);

    state.poses.push(result.pose);
    SweepSummary {
        result,
        raw_points,
        kept_points: kept.len(),
        samples: samples_drawn,
        timing,
    }
}
