//! Batch odometry runner: reads a directory of sweeps, threads them through
//! the localization chain, and writes the trajectory, an optional model dump,
//! and a per-sweep manifest with stage timings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{AxisRemap, ConfigError, DeskewMode, RunConfig, SamplingMode};
use crate::geometry::RigidTransform;
use crate::io::kitti::{read_kitti_sweep, write_trajectory};
use crate::io::ply::{read_ply_sweep, write_ply};
use crate::io::ReadError;
use crate::registration::{localize_sweep, OdometryState, StageTiming, SweepSummary};
use crate::sweep::Sweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Kitti,
    Ply,
}

impl InputFormat {
    fn extension(&self) -> &'static str {
        match self {
            InputFormat::Kitti => "bin",
            InputFormat::Ply => "ply",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub input: PathBuf,
    pub format: InputFormat,
    pub config: Option<PathBuf>,
    pub output_trajectory: PathBuf,
    pub output_map: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    BadConfig(#[from] ConfigError),
    #[error("cannot read config {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("input: {0}")]
    BadInput(#[from] ReadError),
    #[error("no {extension} sweeps in {dir}")]
    NoSweeps { dir: PathBuf, extension: String },
    #[error("cannot list {dir}: {source}")]
    ListDir {
        dir: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    WriteFailed {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Exit code contract: 1 for malformed input, 2 for a bad configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::BadConfig(_) | PipelineError::ConfigIo { .. } => 2,
            _ => 1,
        }
    }
}

/// What a completed run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub poses: Vec<RigidTransform>,
    pub sweeps: usize,
    pub fallbacks: usize,
    pub mean_timing: StageTiming,
}

/// Resolves the effective configuration for a run: format defaults first,
/// then the config file on top.
pub fn resolve_config(
    format: InputFormat,
    config_path: Option<&Path>,
) -> Result<RunConfig, PipelineError> {
    let mut config = RunConfig::default();
    if format == InputFormat::Kitti {
        config.axis_remap = AxisRemap::Kitti;
    }
    if let Some(path) = config_path {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        config.apply_text(&text)?;
    }
    Ok(config)
}

/// Lexicographically ordered sweep files of the requested format.
pub fn list_sweep_files(dir: &Path, format: InputFormat) -> Result<Vec<PathBuf>, PipelineError> {
    let entries = fs::read_dir(dir).map_err(|source| PipelineError::ListDir {
        dir: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|ext| ext.eq_ignore_ascii_case(format.extension()))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::NoSweeps {
            dir: dir.to_path_buf(),
            extension: format.extension().to_string(),
        });
    }
    Ok(files)
}

fn read_sweep(path: &Path, index: usize, format: InputFormat) -> Result<Sweep, ReadError> {
    match format {
        InputFormat::Kitti => read_kitti_sweep(path, index),
        InputFormat::Ply => read_ply_sweep(path, index),
    }
}

fn config_line(config: &RunConfig) -> String {
    let sampling = match config.sampling {
        SamplingMode::Ours => "ours",
        SamplingMode::Random => "random",
        SamplingMode::All => "all",
    };
    let deskew = match config.deskew {
        DeskewMode::Auto => "auto",
        DeskewMode::On => "on",
        DeskewMode::Off => "off",
    };
    let remap = match config.axis_remap {
        AxisRemap::None => "none",
        AxisRemap::Kitti => "kitti",
    };
    format!(
        "s={} h={} r={} iterations={} n={} object_removal={} deskew={} sampling={} k_neighbors={} axis_remap={}",
        config.samples_per_list,
        config.kernel_width,
        config.neighbor_radius,
        config.iterations,
        config.model_scans,
        config.object_removal,
        deskew,
        sampling,
        config.k_neighbors,
        remap,
    )
}

fn manifest_line(index: usize, summary: &SweepSummary) -> String {
    let t = &summary.timing;
    format!(
        "{index:06} points={} kept={} samples={} constraints={} residual={:.6} fallback={} \
         deskew_ms={:.3} removal_ms={:.3} features_ms={:.3} sampling_ms={:.3} match_ms={:.3} insert_ms={:.3}",
        summary.raw_points,
        summary.kept_points,
        summary.samples,
        summary.result.final_constraints,
        summary.result.mean_abs_residual,
        summary.result.fallback as u8,
        t.deskew_ms,
        t.removal_ms,
        t.features_ms,
        t.sampling_ms,
        t.match_ms,
        t.insert_ms,
    )
}

/// Runs the full pipeline. Errors identify whether input or configuration was
/// at fault; [`run_odometry`] maps them onto process exit codes.
pub fn run(args: &RunArgs) -> Result<RunSummary, PipelineError> {
    let config = resolve_config(args.format, args.config.as_deref())?;
    let files = list_sweep_files(&args.input, args.format)?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "# input: {}", args.input.display());
    let _ = writeln!(
        manifest,
        "# output_traj: {}",
        args.output_trajectory.display()
    );
    if let Some(map) = &args.output_map {
        let _ = writeln!(manifest, "# output_map: {}", map.display());
    }
    let _ = writeln!(manifest, "# config: {}", config_line(&config));
    let _ = writeln!(
        manifest,
        "# columns: index points kept samples constraints residual fallback \
         deskew_ms removal_ms features_ms sampling_ms match_ms insert_ms"
    );

    let mut state = OdometryState::new(config);
    let mut fallbacks = 0usize;
    let mut total = StageTiming::default();
    for (index, path) in files.iter().enumerate() {
        let sweep = read_sweep(path, index, args.format)?;
        let summary = localize_sweep(&mut state, &sweep);
        if summary.result.fallback {
            fallbacks += 1;
        }
        total.deskew_ms += summary.timing.deskew_ms;
        total.removal_ms += summary.timing.removal_ms;
        total.features_ms += summary.timing.features_ms;
        total.sampling_ms += summary.timing.sampling_ms;
        total.match_ms += summary.timing.match_ms;
        total.insert_ms += summary.timing.insert_ms;
        manifest.push_str(&manifest_line(index, &summary));
        manifest.push('\n');
    }

    write_trajectory(&args.output_trajectory, &state.poses).map_err(|source| {
        PipelineError::WriteFailed {
            path: args.output_trajectory.clone(),
            source,
        }
    })?;
    if let Some(map_path) = &args.output_map {
        write_ply(map_path, state.map.points(), Some(state.map.normals())).map_err(
            |source| PipelineError::WriteFailed {
                path: map_path.clone(),
                source,
            },
        )?;
    }
    if let Some(manifest_path) = &args.manifest {
        fs::write(manifest_path, &manifest).map_err(|source| PipelineError::WriteFailed {
            path: manifest_path.clone(),
            source,
        })?;
    }

    let n = files.len() as f64;
    Ok(RunSummary {
        poses: state.poses,
        sweeps: files.len(),
        fallbacks,
        mean_timing: StageTiming {
            deskew_ms: total.deskew_ms / n,
            removal_ms: total.removal_ms / n,
            features_ms: total.features_ms / n,
            sampling_ms: total.sampling_ms / n,
            match_ms: total.match_ms / n,
            insert_ms: total.insert_ms / n,
        },
    })
}

/// CLI entry point: runs the pipeline, prints a timing summary, and returns
/// the process exit code (0 ok, 1 malformed input, 2 bad configuration).
pub fn run_odometry(args: &RunArgs) -> i32 {
    match run(args) {
        Ok(summary) => {
            let t = &summary.mean_timing;
            println!(
                "{} sweeps ({} fallbacks) -> {}",
                summary.sweeps,
                summary.fallbacks,
                args.output_trajectory.display()
            );
            println!(
                "mean per-sweep ms: deskew {:.1} | removal {:.1} | features {:.1} | sampling {:.1} | match {:.1} | insert {:.1}",
                t.deskew_ms, t.removal_ms, t.features_ms, t.sampling_ms, t.match_ms, t.insert_ms
            );
            0
        }
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}
