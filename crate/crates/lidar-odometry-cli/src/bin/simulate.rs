//! Synthetic sweep generation from a plain-text scene description.

use std::fs;
use std::path::PathBuf;
use std::process::exit;

use clap::Parser;
use lidar_odometry::io::kitti::{write_kitti_sweep, write_trajectory};
use lidar_odometry::sim::parse_scene;

/// Simulates a spinning LiDAR through a scene file and writes the sweeps in
/// the KITTI binary format plus a `truth.txt` trajectory.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Scene description (primitives, waypoints, sensor settings).
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for NNNNNN.bin sweeps and truth.txt.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scene's noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let text = match fs::read_to_string(&cli.scene) {
        Ok(text) => text,
        Err(error) => {
            eprintln!("error: cannot read {}: {error}", cli.scene.display());
            exit(1);
        }
    };
    let mut spec = match parse_scene(&text) {
        Ok(spec) => spec,
        Err(error) => {
            eprintln!("error: {error}");
            exit(1);
        }
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Err(error) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {error}", cli.out.display());
        exit(1);
    }

    for k in 0..spec.sweeps {
        let sim = spec.simulate(k);
        let records: Vec<_> = sim
            .sweep
            .points
            .iter()
            .map(|p| (p.position, p.intensity.unwrap_or(0.0)))
            .collect();
        let path = cli.out.join(format!("{k:06}.bin"));
        if let Err(error) = write_kitti_sweep(&path, &records) {
            eprintln!("error: cannot write {}: {error}", path.display());
            exit(1);
        }
    }
    let truth_path = cli.out.join("truth.txt");
    if let Err(error) = write_trajectory(&truth_path, &spec.truth()) {
        eprintln!("error: cannot write {}: {error}", truth_path.display());
        exit(1);
    }
    println!(
        "{} sweeps ({} beams x {} steps) -> {}",
        spec.sweeps,
        spec.sensor.beams,
        spec.sensor.azimuth_steps,
        cli.out.display()
    );
}
