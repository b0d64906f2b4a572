//! Drift evaluation of an estimated trajectory against ground truth.

use std::path::PathBuf;
use std::process::exit;

use clap::Parser;
use lidar_odometry::eval::{evaluate_kitti, normalize_to_start};
use lidar_odometry::io::kitti::read_trajectory;

/// Compares two KITTI-format trajectories: averaged relative pose error over
/// 100–800 m segments plus loop endpoint error.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Estimated trajectory.
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth trajectory.
    #[arg(long)]
    gt: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let estimate = match read_trajectory(&cli.est) {
        Ok(poses) => normalize_to_start(&poses),
        Err(error) => {
            eprintln!("error: {error}");
            exit(1);
        }
    };
    let truth = match read_trajectory(&cli.gt) {
        Ok(poses) => normalize_to_start(&poses),
        Err(error) => {
            eprintln!("error: {error}");
            exit(1);
        }
    };
    match evaluate_kitti(&estimate, &truth) {
        Ok(report) => print!("{report}"),
        Err(error) => {
            eprintln!("error: {error}");
            exit(1);
        }
    }
}
