//! A 3D k-d tree over point indices with exact k-NN and radius queries.
//!
//! The tree is rebuilt from scratch whenever the backing cloud changes; large
//! builds split the recursion across rayon. Query results are deterministic:
//! ties are broken by ascending point index.

use nalgebra::Vector3;
use rayon::join;

/// Below this subtree size the build recursion stays on one thread.
const PARALLEL_BUILD_CUTOFF: usize = 8192;

/// Leaf bucket size; small buckets keep the tree shallow without hurting scans.
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        /// Index of the right child in `nodes`; the left child is `self + 1`.
        right: u32,
    },
}

/// Static k-d tree over a copied point set.
#[derive(Debug, Clone, Default)]
pub struct KdTree {
    nodes: Vec<Node>,
    /// (coordinates, original cloud index) in tree order.
    items: Vec<([f64; 3], u32)>,
}

/// A neighbor returned by a query: original index plus squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_squared: f64,
}

impl KdTree {
    pub fn build(cloud: &[Vector3<f64>]) -> Self {
        let mut items: Vec<([f64; 3], u32)> = cloud
            .iter()
            .enumerate()
            .map(|(i, p)| ([p.x, p.y, p.z], i as u32))
            .collect();
        let mut nodes = Vec::with_capacity(cloud.len() / LEAF_SIZE * 4 + 1);
        if !items.is_empty() {
            build_recursive(&mut items, 0, &mut nodes);
        }
        Self { nodes, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Nearest neighbor, or `None` on an empty tree.
    pub fn nearest(&self, query: &Vector3<f64>) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    /// The `k` nearest neighbors, sorted by (distance, index).
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Vec<Neighbor> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        self.knn_visit(0, &q, k, &mut best);
        best
    }

    fn knn_visit(&self, node: usize, q: &[f64; 3], k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let (p, id) = self.items[slot as usize];
                    let candidate = Neighbor {
                        index: id as usize,
                        distance_squared: dist2(&p, q),
                    };
                    let pos = best.partition_point(|n| before(n, &candidate));
                    if pos < k {
                        best.insert(pos, candidate);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { axis, value, right } => {
                let delta = q[axis as usize] - value;
                let (near, far) = if delta <= 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.knn_visit(near, q, k, best);
                if best.len() < k || delta * delta <= best[best.len() - 1].distance_squared {
                    self.knn_visit(far, q, k, best);
                }
            }
        }
    }

    /// All neighbors with distance ≤ `radius` (inclusive), sorted by (distance, index).
    pub fn within_radius(&self, query: &Vector3<f64>, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if self.is_empty() || radius < 0.0 {
            return out;
        }
        let q = [query.x, query.y, query.z];
        self.radius_visit(0, &q, radius * radius, &mut out);
        out.sort_unstable_by(|a, b| {
            a.distance_squared
                .total_cmp(&b.distance_squared)
                .then(a.index.cmp(&b.index))
        });
        out
    }

    fn radius_visit(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let (p, id) = self.items[slot as usize];
                    let d2 = dist2(&p, q);
                    if d2 <= r2 {
                        out.push(Neighbor {
                            index: id as usize,
                            distance_squared: d2,
                        });
                    }
                }
            }
            Node::Split { axis, value, right } => {
                let delta = q[axis as usize] - value;
                if delta <= 0.0 {
                    self.radius_visit(node + 1, q, r2, out);
                    if delta * delta <= r2 {
                        self.radius_visit(right as usize, q, r2, out);
                    }
                } else {
                    self.radius_visit(right as usize, q, r2, out);
                    if delta * delta <= r2 {
                        self.radius_visit(node + 1, q, r2, out);
                    }
                }
            }
        }
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn before(a: &Neighbor, b: &Neighbor) -> bool {
    (a.distance_squared, a.index) < (b.distance_squared, b.index)
}

/// Builds the subtree over `items` (a window starting at global slot `start`)
/// and appends its nodes to `nodes` in depth-first order.
fn build_recursive(items: &mut [([f64; 3], u32)], start: u32, nodes: &mut Vec<Node>) {
    let len = items.len();
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start,
            end: start + len as u32,
        });
        return;
    }

    // Split on the widest axis at the median slot.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in items.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[axis] - lo[axis] == 0.0 {
        // All points coincide; one leaf avoids endless recursion.
        nodes.push(Node::Leaf {
            start,
            end: start + len as u32,
        });
        return;
    }

    let mid = len / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    let value = items[mid].0[axis];

    let node_index = nodes.len();
    nodes.push(Node::Split {
        axis: axis as u8,
        value,
        right: 0, // patched once the left subtree size is known
    });

    let (left, right_side) = items.split_at_mut(mid);

    if len >= PARALLEL_BUILD_CUTOFF {
        let mut left_nodes = Vec::new();
        let mut right_nodes = Vec::new();
        join(
            || build_recursive(left, start, &mut left_nodes),
            || build_recursive(right_side, start + mid as u32, &mut right_nodes),
        );
        // Child `right` pointers were built against local vectors; shift them
        // into place as the sub-vectors are spliced in.
        let left_offset = (node_index + 1) as u32;
        let right_offset = left_offset + left_nodes.len() as u32;
        nodes.extend(left_nodes.into_iter().map(|n| offset_node(n, left_offset)));
        if let Node::Split { right, .. } = &mut nodes[node_index] {
            *right = right_offset;
        }
        nodes.extend(right_nodes.into_iter().map(|n| offset_node(n, right_offset)));
    } else {
        build_recursive(left, start, nodes);
        let right_root = nodes.len() as u32;
        build_recursive(right_side, start + mid as u32, nodes);
        if let Node::Split { right, .. } = &mut nodes[node_index] {
            *right = right_root;
        }
    }
}

fn offset_node(node: Node, offset: u32) -> Node {
    match node {
        Node::Split { axis, value, right } => Node::Split {
            axis,
            value,
            right: right + offset,
        },
        leaf => leaf,
    }
}
