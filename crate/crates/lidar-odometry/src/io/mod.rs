//! Readers and writers: KITTI binary sweeps, KITTI pose trajectories, PLY clouds.

pub mod kitti;
pub mod ply;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("empty sweep: {path}")]
    EmptySweep { path: PathBuf },
}

impl ReadError {
    pub(crate) fn malformed(path: &std::path::Path, reason: impl Into<String>) -> Self {
        ReadError::MalformedFile {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ReadError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Formats a float with 9 significant digits, then prints the shortest
/// representation of the rounded value ("1", "0.5", "3.14159265").
pub(crate) fn format_sig9(value: f64) -> String {
    assert!(value.is_finite(), "non-finite value in output");
    let rounded: f64 = format!("{value:.8e}").parse().unwrap();
    // Avoid "-0" rows.
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::format_sig9;

    #[test]
    fn sig9_prints_short_exact_values() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-0.0), "0");
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(5.0), "5");
    }

    #[test]
    fn sig9_rounds_to_nine_significant_digits() {
        assert_eq!(format_sig9(std::f64::consts::PI), "3.14159265");
        let x = 123.456789123456;
        let back: f64 = format_sig9(x).parse().unwrap();
        assert!((back - x).abs() <= 1e-6 * x.abs());
    }
}
