//! Run configuration: the pipeline's tuning knobs and their file format.
//!
//! The config file is flat `key = value` text. Recognized keys: `s`, `h`,
//! `r`, `n`, `iterations`, `object_removal`, `deskew`, `sampling`,
//! `k_neighbors`, `axis_remap`. Lines starting with `#` are comments.

use crate::geometry::Point3;
use thiserror::Error;

/// How scan points are chosen for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Observability score lists (the default).
    #[default]
    Ours,
    /// Uniformly random points through the same outlier gate.
    Random,
    /// Every point through the outlier gate.
    All,
}

/// Whether per-point pose interpolation runs on incoming sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeskewMode {
    /// Interpolate unless the sweep is flagged pre-de-skewed by its reader.
    #[default]
    Auto,
    /// Always interpolate.
    On,
    /// Never interpolate (every sweep treated as pre-de-skewed).
    Off,
}

/// Fixed rotation taking raw sensor axes to the vehicle frame
/// (X right, Y forward, Z up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxisRemap {
    /// Sensor axes already match the vehicle frame.
    #[default]
    None,
    /// KITTI velodyne convention (x forward, y left, z up).
    Kitti,
}

impl AxisRemap {
    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        match self {
            AxisRemap::None => *p,
            AxisRemap::Kitti => Point3::new(-p.y, p.x, p.z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Samples accepted per score list (`s`).
    pub samples_per_list: usize,
    /// IMLS kernel width in meters (`h`).
    pub kernel_width: f64,
    /// Neighbor search / outlier radius in meters (`r`).
    pub neighbor_radius: f64,
    /// Matching iterations per sweep.
    pub iterations: usize,
    /// Sweeps kept in the model map (`n`).
    pub model_scans: usize,
    pub object_removal: bool,
    pub deskew: DeskewMode,
    pub sampling: SamplingMode,
    /// Neighborhood size for normal / planarity estimation.
    pub k_neighbors: usize,
    pub axis_remap: AxisRemap,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            samples_per_list: 100,
            kernel_width: 0.06,
            neighbor_radius: 0.20,
            iterations: 20,
            model_scans: 100,
            object_removal: true,
            deskew: DeskewMode::Auto,
            sampling: SamplingMode::Ours,
            k_neighbors: 20,
            axis_remap: AxisRemap::None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Applies `key = value` overrides from a config file onto `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (number, raw) in text.lines().enumerate() {
            let line = number + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: &str| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
                reason: reason.to_string(),
            };
            match key {
                "s" => self.samples_per_list = value.parse().map_err(|_| bad("not an integer"))?,
                "h" => self.kernel_width = value.parse().map_err(|_| bad("not a number"))?,
                "r" => self.neighbor_radius = value.parse().map_err(|_| bad("not a number"))?,
                "iterations" => {
                    self.iterations = value.parse().map_err(|_| bad("not an integer"))?
                }
                "n" => self.model_scans = value.parse().map_err(|_| bad("not an integer"))?,
                "object_removal" => {
                    self.object_removal = parse_bool(value).ok_or_else(|| bad("not a boolean"))?
                }
                "deskew" => {
                    self.deskew = match value {
                        "auto" => DeskewMode::Auto,
                        _ => match parse_bool(value) {
                            Some(true) => DeskewMode::On,
                            Some(false) => DeskewMode::Off,
                            None => return Err(bad("expected auto/on/off")),
                        },
                    }
                }
                "sampling" => {
                    self.sampling = match value {
                        "ours" => SamplingMode::Ours,
                        "random" => SamplingMode::Random,
                        "all" => SamplingMode::All,
                        _ => return Err(bad("expected ours/random/all")),
                    }
                }
                "k_neighbors" => {
                    self.k_neighbors = value.parse().map_err(|_| bad("not an integer"))?
                }
                "axis_remap" => {
                    self.axis_remap = match value {
                        "none" => AxisRemap::None,
                        "kitti" => AxisRemap::Kitti,
                        _ => return Err(bad("expected none/kitti")),
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(msg.to_string()))
            }
        };
        check(self.samples_per_list >= 1, "s must be >= 1")?;
        check(
            self.kernel_width > 0.0 && self.kernel_width.is_finite(),
            "h must be > 0",
        )?;
        check(
            self.neighbor_radius > 0.0 && self.neighbor_radius.is_finite(),
            "r must be > 0",
        )?;
        check(self.iterations >= 1, "iterations must be >= 1")?;
        check(self.model_scans >= 1, "n must be >= 1")?;
        check(self.k_neighbors >= 3, "k_neighbors must be >= 3")?;
        Ok(())
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "on" | "1" | "yes" => Some(true),
        "false" | "off" | "0" | "no" => Some(false),
        _ => None,
    }
}
