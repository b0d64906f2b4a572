//! Small-object removal.
//!
//! Potentially dynamic objects are removed from a sweep before matching:
//! ground points are extracted by voxel growing, the remaining points are
//! clustered by single linkage, clusters whose bounding box is small in every
//! vehicle axis are dropped, and the ground is added back.

use std::collections::{HashMap, VecDeque};

use nalgebra::Vector3;
use thiserror::Error;

use crate::features::symmetric_eigen3;
use crate::geometry::Point3;
use crate::spatial::KdTree;

#[derive(Debug, Clone)]
pub struct RemovalParams {
    /// Voxel edge length for ground growing (meters).
    pub voxel_size: f64,
    /// Horizontal radius around the sensor searched for seed voxels.
    pub seed_radius: f64,
    /// Maximum mean-height step between neighboring ground voxels.
    pub max_height_step: f64,
    /// Maximum angle between a ground voxel's normal and vertical (degrees).
    pub max_normal_angle_deg: f64,
    /// Single-linkage distance for clustering non-ground points.
    pub link_distance: f64,
    /// Clusters at least this wide in X or Y are kept (meters).
    pub min_keep_extent_xy: f64,
    /// Clusters at least this tall are kept (meters).
    pub min_keep_extent_z: f64,
}

impl Default for RemovalParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.5,
            seed_radius: 10.0,
            max_height_step: 0.3,
            max_normal_angle_deg: 30.0,
            link_distance: 0.5,
            min_keep_extent_xy: 14.0,
            min_keep_extent_z: 4.0,
        }
    }
}

/// Per-point ground labels for one sweep.
#[derive(Debug, Clone)]
pub struct GroundLabeling {
    pub ground: Vec<bool>,
    pub seed_voxels: usize,
}

#[derive(Debug, Error)]
#[error("no ground seed voxel found")]
pub struct NoGroundFound;

/// A single-linkage cluster of non-ground points.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Indices into the clustered point slice, ascending.
    pub members: Vec<usize>,
    pub bbox_min: Vector3<f64>,
    pub bbox_max: Vector3<f64>,
}

impl Cluster {
    pub fn extents(&self) -> Vector3<f64> {
        self.bbox_max - self.bbox_min
    }
}

type VoxelKey = (i32, i32, i32);

fn voxel_of(p: &Point3, size: f64) -> VoxelKey {
    (
        (p.x / size).floor() as i32,
        (p.y / size).floor() as i32,
        (p.z / size).floor() as i32,
    )
}

struct VoxelGrid {
    cells: HashMap<VoxelKey, Vec<usize>>,
}

impl VoxelGrid {
    fn build(cloud: &[Point3], size: f64) -> Self {
        let mut cells: HashMap<VoxelKey, Vec<usize>> = HashMap::new();
        for (i, p) in cloud.iter().enumerate() {
            cells.entry(voxel_of(p, size)).or_default().push(i);
        }
        Self { cells }
    }

    fn mean_height(&self, cloud: &[Point3], key: &VoxelKey) -> f64 {
        let members = &self.cells[key];
        members.iter().map(|&i| cloud[i].z).sum::<f64>() / members.len() as f64
    }

    /// PCA normal over the voxel and its occupied 26-neighborhood. Single
    /// voxels of spinning-LiDAR data are often one near-collinear scan arc,
    /// so the window is what makes the estimate usable.
    fn window_normal(&self, cloud: &[Point3], key: &VoxelKey) -> Option<Vector3<f64>> {
        let mut mean = Vector3::zeros();
        let mut count = 0usize;
        let visit = |f: &mut dyn FnMut(&Point3)| {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let k = (key.0 + dx, key.1 + dy, key.2 + dz);
                        if let Some(members) = self.cells.get(&k) {
                            for &i in members {
                                f(&cloud[i]);
                            }
                        }
                    }
                }
            }
        };
        visit(&mut |p| {
            mean += p;
            count += 1;
        });
        if count < 3 {
            return None;
        }
        let mean = mean / count as f64;
        let mut cov = nalgebra::Matrix3::zeros();
        visit(&mut |p| {
            let d = p - mean;
            cov.syger(1.0, &d, &d, 1.0);
        });
        cov /= count as f64;
        cov.fill_upper_triangle_with_lower_triangle();
        let (values, vectors) = symmetric_eigen3(&cov);
        (values[0] > 1e-12).then_some(vectors[2])
    }
}

/// Labels ground points by growing from flat, low voxels near the sensor.
///
/// The sensor sits at the origin of the vehicle frame. Seeds are the lowest
/// occupied voxel of each column within `seed_radius` whose neighborhood
/// normal is near vertical; growth spreads over 26-connected voxels with a
/// bounded height step and a near-vertical normal.
pub fn extract_ground(
    cloud: &[Point3],
    params: &RemovalParams,
) -> Result<GroundLabeling, NoGroundFound> {
    let grid = VoxelGrid::build(cloud, params.voxel_size);
    let min_vertical = params.max_normal_angle_deg.to_radians().cos();
    let vertical_enough = |key: &VoxelKey| -> bool {
        grid.window_normal(cloud, key)
            .is_some_and(|n| n.z.abs() >= min_vertical)
    };

    // Lowest occupied voxel per column.
    let mut lowest: HashMap<(i32, i32), i32> = HashMap::new();
    for key in grid.cells.keys() {
        lowest
            .entry((key.0, key.1))
            .and_modify(|z| *z = (*z).min(key.2))
            .or_insert(key.2);
    }

    let mut seeds: Vec<VoxelKey> = Vec::new();
    for (&(ix, iy), &iz) in &lowest {
        let cx = (ix as f64 + 0.5) * params.voxel_size;
        let cy = (iy as f64 + 0.5) * params.voxel_size;
        if cx.hypot(cy) > params.seed_radius {
            continue;
        }
        let key = (ix, iy, iz);
        if vertical_enough(&key) {
            seeds.push(key);
        }
    }
    if seeds.is_empty() {
        return Err(NoGroundFound);
    }
    seeds.sort_unstable();

    let mut grown: HashMap<VoxelKey, f64> = HashMap::new();
    let mut queue = VecDeque::new();
    for seed in &seeds {
        if !grown.contains_key(seed) {
            grown.insert(*seed, grid.mean_height(cloud, seed));
            queue.push_back(*seed);
        }
    }
    while let Some(current) = queue.pop_front() {
        let current_height = grown[&current];
        for dx in -1..=1i32 {
            for dy in -1..=1i32 {
                for dz in -1..=1i32 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let next = (current.0 + dx, current.1 + dy, current.2 + dz);
                    if grown.contains_key(&next) || !grid.cells.contains_key(&next) {
                        continue;
                    }
                    let height = grid.mean_height(cloud, &next);
                    if (height - current_height).abs() < params.max_height_step
                        && vertical_enough(&next)
                    {
                        grown.insert(next, height);
                        queue.push_back(next);
                    }
                }
            }
        }
    }

    let mut ground = vec![false; cloud.len()];
    for (key, members) in &grid.cells {
        if grown.contains_key(key) {
            for &i in members {
                ground[i] = true;
            }
        }
    }
    Ok(GroundLabeling {
        ground,
        seed_voxels: seeds.len(),
    })
}

/// Single-linkage connected components: points closer than `link_distance`
/// belong to the same cluster. The partition does not depend on input order;
/// clusters are reported by ascending smallest member.
pub fn cluster_points(points: &[Point3], link_distance: f64) -> Vec<Cluster> {
    assert!(link_distance > 0.0);
    if points.is_empty() {
        return Vec::new();
    }
    let tree = KdTree::build(points);
    let mut parent: Vec<usize> = (0..points.len()).collect();

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    for i in 0..points.len() {
        for neighbor in tree.within_radius(&points[i], link_distance) {
            let (a, b) = (find(&mut parent, i), find(&mut parent, neighbor.index));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..points.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|members| {
            let mut bbox_min = Vector3::repeat(f64::INFINITY);
            let mut bbox_max = Vector3::repeat(f64::NEG_INFINITY);
            for &i in &members {
                bbox_min = bbox_min.inf(&points[i]);
                bbox_max = bbox_max.sup(&points[i]);
            }
            Cluster {
                members,
                bbox_min,
                bbox_max,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.members[0]);
    clusters
}

/// Outcome of small-object removal on one sweep.
#[derive(Debug, Clone)]
pub struct RemovalResult {
    /// Surviving original indices, ascending.
    pub kept: Vec<usize>,
    /// Per input point: labeled ground.
    pub ground: Vec<bool>,
    pub clusters_removed: usize,
    pub ground_found: bool,
}

/// Removes clusters that are small along every vehicle axis.
///
/// A cluster survives when its bounding box reaches `min_keep_extent_xy` in X
/// or Y, or `min_keep_extent_z` in Z. Ground points always survive.
pub fn remove_small_objects(cloud: &[Point3], params: &RemovalParams) -> RemovalResult {
    let (ground, ground_found) = match extract_ground(cloud, params) {
        Ok(labeling) => (labeling.ground, true),
        Err(NoGroundFound) => (vec![false; cloud.len()], false),
    };

    let non_ground: Vec<usize> = (0..cloud.len()).filter(|&i| !ground[i]).collect();
    let sub_cloud: Vec<Point3> = non_ground.iter().map(|&i| cloud[i]).collect();
    let clusters = cluster_points(&sub_cloud, params.link_distance);

    let mut kept: Vec<usize> = (0..cloud.len()).filter(|&i| ground[i]).collect();
    let mut clusters_removed = 0;
    for cluster in &clusters {
        let e = cluster.extents();
        let keep = e.x >= params.min_keep_extent_xy
            || e.y >= params.min_keep_extent_xy
            || e.z >= params.min_keep_extent_z;
        if keep {
            kept.extend(cluster.members.iter().map(|&local| non_ground[local]));
        } else {
            clusters_removed += 1;
        }
    }
    kept.sort_unstable();
    RemovalResult {
        kept,
        ground,
        clusters_removed,
        ground_found,
    }
}
