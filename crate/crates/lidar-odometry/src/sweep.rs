//! One full sensor rotation of LiDAR returns.

use crate::geometry::{Frame, Point3};

/// A single LiDAR return with its intra-sweep acquisition time.
#[derive(Debug, Clone, Copy)]
pub struct TimedPoint {
    /// Position in the sweep's frame (meters).
    pub position: Point3,
    /// Acquisition time as a fraction of the sweep duration, in [0, 1].
    pub time_fraction: f64,
    /// Optional reflectance.
    pub intensity: Option<f32>,
}

/// All returns from one rotation of the sensor.
#[derive(Debug, Clone)]
pub struct Sweep {
    /// Sequence number within the acquisition.
    pub index: usize,
    pub points: Vec<TimedPoint>,
    pub frame: Frame,
    /// Set when the producer already compensated ego-motion; de-skewing then
    /// applies a single end-of-sweep pose instead of interpolating.
    pub pre_deskewed: bool,
}

impl Sweep {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reconstructs per-point time fractions from scan order in azimuth:
    /// the wrapped angle from the first point's azimuth, divided by 2π.
    ///
    /// Spinning sensors emit returns in azimuth order, so the angle swept
    /// since the first return is proportional to elapsed time.
    pub fn synthesize_time_fractions(&mut self) {
        let Some(first) = self.points.first() else {
            return;
        };
        let origin = azimuth(&first.position);
        for p in &mut self.points {
            let mut delta = azimuth(&p.position) - origin;
            if delta < 0.0 {
                delta += std::f64::consts::TAU;
            }
            p.time_fraction = delta / std::f64::consts::TAU;
        }
    }
}

fn azimuth(p: &Point3) -> f64 {
    p.y.atan2(p.x)
}
