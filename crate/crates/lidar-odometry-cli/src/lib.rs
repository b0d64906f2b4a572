//! Shared plumbing for the odometry, evaluate and simulate binaries.

use std::path::PathBuf;

use clap::ValueEnum;
use lidar_odometry::{InputFormat, RunArgs};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Kitti,
    Ply,
}

impl From<Format> for InputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Kitti => InputFormat::Kitti,
            Format::Ply => InputFormat::Ply,
        }
    }
}

pub fn run_args(
    input: PathBuf,
    format: Format,
    config: Option<PathBuf>,
    output_traj: PathBuf,
    output_map: Option<PathBuf>,
    manifest: Option<PathBuf>,
) -> RunArgs {
    RunArgs {
        input,
        format: format.into(),
        config,
        output_trajectory: output_traj,
        output_map,
        manifest,
    }
}
