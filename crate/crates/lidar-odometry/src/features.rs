//! Per-point surface features: unit normals and the planarity scalar.
//!
//! For each point the covariance of its k nearest neighbors (itself included)
//! is eigendecomposed; the normal is the eigenvector of the smallest
//! eigenvalue, oriented toward the sensor, and the planarity is
//! `(σ₂ − σ₃) / σ₁` with `σᵢ = √λᵢ`, `λ₁ ≥ λ₂ ≥ λ₃`. The scalar is 1 on
//! well-sampled planes, 0 on lines and in volumes.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Frame, Point3, RigidTransform};
use crate::spatial::KdTree;

/// Neighborhoods whose largest covariance eigenvalue is below this are
/// point-like; they get a fixed normal and are flagged unusable.
const DEGENERATE_EIGENVALUE: f64 = 1e-12;

/// A point cloud with per-point normal and planarity.
#[derive(Debug, Clone)]
pub struct FeaturedCloud {
    pub points: Vec<Point3>,
    /// Unit normals, oriented toward the sensor origin they were computed with.
    pub normals: Vec<Vector3<f64>>,
    /// Planarity scalar in [0, 1] per point.
    pub planarity: Vec<f64>,
    /// False for degenerate neighborhoods whose normal carries no information.
    pub usable: Vec<bool>,
    pub frame: Frame,
}

impl FeaturedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rigidly moves the cloud into another frame; planarity is invariant.
    pub fn transformed(&self, transform: &RigidTransform, frame: Frame) -> FeaturedCloud {
        FeaturedCloud {
            points: self.points.iter().map(|p| transform.apply(p)).collect(),
            normals: self.normals.iter().map(|n| transform.rotate(n)).collect(),
            planarity: self.planarity.clone(),
            usable: self.usable.clone(),
            frame,
        }
    }

    /// Keeps only points with informative normals.
    pub fn retain_usable(&self) -> FeaturedCloud {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.usable[i]).collect();
        FeaturedCloud {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            normals: keep.iter().map(|&i| self.normals[i]).collect(),
            planarity: keep.iter().map(|&i| self.planarity[i]).collect(),
            usable: vec![true; keep.len()],
            frame: self.frame,
        }
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cloud has {have} points, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
}

/// Computes normals and planarity for every point of `points`.
///
/// `k_neighbors` must be at least 3 and not exceed the cloud size. Normals are
/// oriented so that `n · (sensor_origin − p) ≥ 0`.
pub fn compute_features(
    points: &[Point3],
    frame: Frame,
    k_neighbors: usize,
    sensor_origin: &Point3,
) -> Result<FeaturedCloud, FeatureError> {
    let need = k_neighbors.max(3);
    if points.len() < need || k_neighbors < 3 {
        return Err(FeatureError::TooFewPoints {
            have: points.len(),
            need,
        });
    }
    let tree = KdTree::build(points);

    let per_point: Vec<(Vector3<f64>, f64, bool)> = points
        .par_iter()
        .map(|p| {
            let neighbors = tree.knn(p, k_neighbors);
            // Two-pass centered covariance; the neighborhood extent is tiny
            // compared to the coordinates, so sums of squares would cancel.
            let mut mean = Vector3::zeros();
            for n in &neighbors {
                mean += points[n.index];
            }
            mean /= neighbors.len() as f64;
            let mut cov = Matrix3::zeros();
            for n in &neighbors {
                let d = points[n.index] - mean;
                cov.syger(1.0, &d, &d, 1.0);
            }
            cov /= neighbors.len() as f64;
            // syger fills the lower triangle only.
            cov.fill_upper_triangle_with_lower_triangle();

            let (values, vectors) = symmetric_eigen3(&cov);
            if values[0] < DEGENERATE_EIGENVALUE {
                return (Vector3::z(), 0.0, false);
            }
            let sigma: [f64; 3] = [values[0].sqrt(), values[1].sqrt(), values[2].sqrt()];
            let planarity = ((sigma[1] - sigma[2]) / sigma[0]).clamp(0.0, 1.0);
            let mut normal = vectors[2];
            if normal.dot(&(sensor_origin - p)) < 0.0 {
                normal = -normal;
            }
            (normal, planarity, true)
        })
        .collect();

    let mut normals = Vec::with_capacity(points.len());
    let mut planarity = Vec::with_capacity(points.len());
    let mut usable = Vec::with_capacity(points.len());
    for (n, a, u) in per_point {
        normals.push(n);
        planarity.push(a);
        usable.push(u);
    }
    Ok(FeaturedCloud {
        points: points.to_vec(),
        normals,
        planarity,
        usable,
        frame,
    })
}

/// Closed-form eigendecomposition of a symmetric 3×3 matrix.
///
/// Returns eigenvalues in descending order (clamped at 0 from below only by
/// the caller if wanted) and matching unit eigenvectors. Eigenvalues use the
/// trigonometric form; eigenvectors come from the largest cross product of
/// rows of `A − λI`, which is well conditioned whenever λ is separated.
pub(crate) fn symmetric_eigen3(m: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let p1 = m[(0, 1)] * m[(0, 1)] + m[(0, 2)] * m[(0, 2)] + m[(1, 2)] * m[(1, 2)];
    let q = m.trace() / 3.0;
    let mut values = if p1 == 0.0 {
        // Already diagonal.
        let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        d.sort_by(|a, b| b.total_cmp(a));
        d
    } else {
        let d0 = m[(0, 0)] - q;
        let d1 = m[(1, 1)] - q;
        let d2 = m[(2, 2)] - q;
        let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = (m - Matrix3::from_diagonal_element(q)) / p;
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let high = q + 2.0 * p * phi.cos();
        let low = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
        [high, 3.0 * q - high - low, low]
    };
    // Covariance matrices are PSD; tiny negative values are rounding noise.
    for v in &mut values {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }

    let vector_for = |lambda: f64| -> Option<Vector3<f64>> {
        let a = m - Matrix3::from_diagonal_element(lambda);
        let rows = [
            Vector3::new(a[(0, 0)], a[(0, 1)], a[(0, 2)]),
            Vector3::new(a[(1, 0)], a[(1, 1)], a[(1, 2)]),
            Vector3::new(a[(2, 0)], a[(2, 1)], a[(2, 2)]),
        ];
        let candidates = [
            rows[0].cross(&rows[1]),
            rows[0].cross(&rows[2]),
            rows[1].cross(&rows[2]),
        ];
        let best = candidates
            .iter()
            .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
            .unwrap();
        (best.norm_squared() > 0.0).then(|| best.normalize())
    };

    let v0 = vector_for(values[0]).unwrap_or_else(Vector3::x);
    let v2 = vector_for(values[2]).unwrap_or_else(|| {
        // Repeated eigenvalues: any direction orthogonal to v0 works.
        let pick = if v0.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        v0.cross(&pick).normalize()
    });
    let v1 = v2.cross(&v0);
    let v1 = if v1.norm_squared() > 0.0 {
        v1.normalize()
    } else {
        Vector3::y()
    };
    (values, [v0, v1, v2])
}
