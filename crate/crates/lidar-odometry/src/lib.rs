//! Low-drift 3D LiDAR odometry by scan-to-model matching.
//!
//! Each incoming sweep is de-skewed with a constant-velocity motion model,
//! stripped of small (potentially dynamic) objects, scored for observability,
//! and registered against an implicit moving least squares (IMLS) surface
//! built over the most recent localized sweeps. The companion binaries drive
//! the batch pipeline, KITTI-style drift evaluation, and a synthetic
//! spinning-LiDAR simulator used as a ground-truth oracle.

pub mod config;
pub mod deskew;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod imls;
pub mod io;
pub mod pipeline;
pub mod registration;
pub mod removal;
pub mod sampling;
pub mod sim;
pub mod spatial;
pub mod sweep;

pub use config::{AxisRemap, DeskewMode, RunConfig, SamplingMode};
pub use eval::{evaluate_kitti, normalize_to_start, DriftReport};
pub use features::{compute_features, FeaturedCloud};
pub use geometry::{
    interpolate, solve_point_to_plane, DegenerateSystem, Frame, PlaneConstraint, Point3,
    RigidTransform, SmallMotion,
};
pub use imls::ModelMap;
pub use pipeline::{run_odometry, InputFormat, RunArgs};
pub use registration::{localize_sweep, match_scan, MatchResult, OdometryState};
pub use sweep::{Sweep, TimedPoint};
