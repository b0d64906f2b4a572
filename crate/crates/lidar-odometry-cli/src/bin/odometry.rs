//! Batch LiDAR odometry over a directory of sweep files.

use std::path::PathBuf;
use std::process::exit;

use clap::Parser;
use lidar_odometry::run_odometry;
use lidar_odometry_cli::{run_args, Format};

/// Scan-to-model LiDAR odometry.
///
/// Reads sweeps (lexicographic filename order = temporal order), estimates a
/// pose per sweep, and writes the trajectory in the KITTI pose format.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Directory containing the sweep files.
    #[arg(long)]
    input: PathBuf,
    /// Sweep file format.
    #[arg(long, value_enum, default_value = "kitti")]
    format: Format,
    /// Optional key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output trajectory (12-value KITTI pose rows).
    #[arg(long)]
    output_traj: PathBuf,
    /// Optional PLY dump of the final model map.
    #[arg(long)]
    output_map: Option<PathBuf>,
    /// Optional per-sweep manifest with stage timings.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    exit(run_odometry(&run_args(
        cli.input,
        cli.format,
        cli.config,
        cli.output_traj,
        cli.output_map,
        cli.manifest,
    )));
}
