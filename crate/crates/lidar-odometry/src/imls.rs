//! The model map and its implicit moving least squares (IMLS) surface.
//!
//! The map is a FIFO of the n most recent localized sweeps with frozen
//! normals, flattened behind a k-d tree. The implicit surface is the zero set
//! of
//!
//! ```text
//! I(x) = Σᵢ Wᵢ(x) ((x − pᵢ) · nᵢ) / Σⱼ Wⱼ(x),   Wᵢ(x) = exp(−‖x − pᵢ‖² / h²)
//! ```
//!
//! summed over map points within a ball of radius `r` around `x`. Near the
//! surface I(x) behaves as a signed distance; queries with no neighbor inside
//! the ball report no support and are skipped by callers.

use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::features::FeaturedCloud;
use crate::geometry::Point3;
use crate::spatial::KdTree;

/// Gaussian IMLS weight `exp(−d²/h²)`.
#[inline]
pub fn gaussian_weight(distance: f64, kernel_width: f64) -> f64 {
    (-(distance * distance) / (kernel_width * kernel_width)).exp()
}

/// One IMLS evaluation at a query point.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    /// Approximate signed distance to the surface (meters), positive on the
    /// side the normals point to.
    pub signed_distance: f64,
    /// Normal of the nearest map point.
    pub normal: Vector3<f64>,
    /// Number of map points inside the query ball.
    pub support: usize,
}

/// FIFO model of the last `capacity` localized sweeps, with a spatial index
/// over every member point.
#[derive(Debug, Clone)]
pub struct ModelMap {
    scans: VecDeque<FeaturedCloud>,
    capacity: usize,
    kernel_width: f64,
    radius: f64,
    /// Flattened member points and normals, in scan insertion order.
    points: Vec<Point3>,
    normals: Vec<Vector3<f64>>,
    index: KdTree,
}

impl ModelMap {
    /// `capacity` is the paper-level n; `kernel_width` and `radius` are the
    /// IMLS h and the neighbor/outlier radius r.
    pub fn new(capacity: usize, kernel_width: f64, radius: f64) -> Self {
        assert!(capacity >= 1 && kernel_width > 0.0 && radius > 0.0);
        Self {
            scans: VecDeque::new(),
            capacity,
            kernel_width,
            radius,
            points: Vec::new(),
            normals: Vec::new(),
            index: KdTree::default(),
        }
    }

    pub fn len_scans(&self) -> usize {
        self.scans.len()
    }

    pub fn len_points(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    /// Member points in insertion order (used by map export and tests).
    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    /// Appends a world-frame scan with frozen normals, evicting the oldest
    /// scan beyond capacity, and rebuilds the index.
    pub fn insert_scan(&mut self, scan: FeaturedCloud) {
        self.scans.push_back(scan);
        while self.scans.len() > self.capacity {
            self.scans.pop_front();
        }
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let total: usize = self.scans.iter().map(|s| s.len()).sum();
        self.points = Vec::with_capacity(total);
        self.normals = Vec::with_capacity(total);
        for scan in &self.scans {
            self.points.extend_from_slice(&scan.points);
            self.normals.extend_from_slice(&scan.normals);
        }
        self.index = KdTree::build(&self.points);
    }

    /// Distance from `query` to its nearest map point, if any.
    pub fn nearest_distance(&self, query: &Point3) -> Option<f64> {
        self.index
            .nearest(query)
            .map(|n| n.distance_squared.sqrt())
    }

    /// Evaluates the IMLS distance at `query`. `None` means no map point lies
    /// within the neighbor radius — the query has no correspondence.
    pub fn evaluate(&self, query: &Point3) -> Option<Evaluation> {
        if self.is_empty() {
            return None;
        }
        let neighbors = self.index.within_radius(query, self.radius);
        if neighbors.is_empty() {
            return None;
        }
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for n in &neighbors {
            let p = &self.points[n.index];
            let weight = (-n.distance_squared
                / (self.kernel_width * self.kernel_width))
                .exp();
            numerator += weight * (query - p).dot(&self.normals[n.index]);
            denominator += weight;
        }
        // Neighbors are sorted by distance; the first is the closest point.
        let nearest = neighbors[0].index;
        Some(Evaluation {
            signed_distance: numerator / denominator,
            normal: self.normals[nearest],
            support: neighbors.len(),
        })
    }

    /// Projects `query` onto the IMLS surface: `y = x − I(x)·n` with n the
    /// nearest map point's normal.
    pub fn project_to_surface(&self, query: &Point3) -> Option<(Point3, Vector3<f64>)> {
        self.evaluate(query).map(|eval| {
            (
                query - eval.normal * eval.signed_distance,
                eval.normal,
            )
        })
    }
}
