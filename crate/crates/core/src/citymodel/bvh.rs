//! Bounding volume hierarchy over mesh triangles.
//!
//! Built with a binned surface-area heuristic; nodes are stored in a flat
//! array with the two children of an interior node adjacent.

use std::sync::Arc;

use super::{CityMesh, MeshError, SurfaceLabel};
use crate::geom::Vec3;

/// Hits closer than this are treated as self-intersections and ignored.
pub const SELF_HIT_EPSILON: f64 = 1e-4;

const BINS: usize = 16;
const MAX_LEAF: usize = 4;
const TRAVERSAL_COST: f64 = 1.0;
/// Below this depth SAH splits are replaced by median splits, bounding the
/// traversal stack.
const MAX_DEPTH: usize = 96;
const INTERSECT_COST: f64 = 1.5;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn join(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    fn area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// First triangle for leaves, first child for interior nodes.
    first: u32,
    /// Triangle count for leaves, zero for interior nodes.
    count: u32,
}

#[derive(Debug, Clone, Copy)]
struct PackedTriangle {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
    index: u32,
}

/// Nearest intersection of a ray with the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit<'a> {
    pub t: f64,
    pub label: SurfaceLabel,
    pub triangle: usize,
    pub building: Option<&'a str>,
}

/// Ray-cast acceleration structure sharing ownership of its mesh.
#[derive(Debug, Clone)]
pub struct RayAccel {
    mesh: Arc<CityMesh>,
    nodes: Vec<Node>,
    tris: Vec<PackedTriangle>,
}

pub fn build_accel(mesh: impl Into<Arc<CityMesh>>) -> Result<RayAccel, MeshError> {
    RayAccel::new(mesh)
}

struct BuildRef {
    bounds: Aabb,
    centroid: Vec3,
    index: u32,
}

impl RayAccel {
    pub fn new(mesh: impl Into<Arc<CityMesh>>) -> Result<Self, MeshError> {
        let mesh = mesh.into();
        if mesh.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let mut refs: Vec<BuildRef> = (0..mesh.triangle_count())
            .map(|t| {
                let mut bounds = Aabb::empty();
                let c = mesh.corners(t);
                c.iter().for_each(|p| bounds.grow(p));
                BuildRef {
                    bounds,
                    centroid: (c[0] + c[1] + c[2]) / 3.0,
                    index: t as u32,
                }
            })
            .collect();

        let mut nodes = Vec::with_capacity(2 * refs.len());
        nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        let len = refs.len();
        build_node(&mut nodes, &mut refs, 0, 0, len, 0);

        let tris = refs
            .iter()
            .map(|r| {
                let [a, b, c] = mesh.corners(r.index as usize);
                PackedTriangle {
                    v0: a,
                    e1: b - a,
                    e2: c - a,
                    index: r.index,
                }
            })
            .collect();
        Ok(RayAccel { mesh, nodes, tris })
    }

    pub fn mesh(&self) -> &CityMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<CityMesh> {
        &self.mesh
    }

    /// Nearest hit with `t > SELF_HIT_EPSILON`. `dir` must be unit length.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Result<Option<RayHit<'_>>, MeshError> {
        let norm = dir.norm();
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(MeshError::NonUnitDirection { norm });
        }
        Ok(self.nearest(origin, dir, f64::INFINITY).map(|(t, tri)| {
            let tri = tri as usize;
            RayHit {
                t,
                label: self.mesh.label(tri),
                triangle: tri,
                building: self.mesh.building_of(tri),
            }
        }))
    }

    /// Unchecked nearest-hit query returning `(t, triangle)`; hits at or
    /// beyond `t_max` are ignored.
    pub(crate) fn nearest(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<(f64, u32)> {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let neg = [inv.x < 0.0, inv.y < 0.0, inv.z < 0.0];
        let mut best_t = t_max;
        let mut best_tri = u32::MAX;

        slab(&self.nodes[0].bounds, origin, &inv, &neg, best_t)?;
        // Pending subtrees with their entry distance along the ray.
        let mut stack = [(0u32, 0.0f64); MAX_DEPTH + 1];
        let mut sp = 0usize;
        let mut node_idx = 0u32;
        loop {
            let node = &self.nodes[node_idx as usize];
            if node.count > 0 {
                let start = node.first as usize;
                for tri in &self.tris[start..start + node.count as usize] {
                    if let Some(t) = intersect(tri, origin, dir, best_t) {
                        best_t = t;
                        best_tri = tri.index;
                    }
                }
            } else {
                let left = node.first;
                let right = left + 1;
                let tl = slab(&self.nodes[left as usize].bounds, origin, &inv, &neg, best_t);
                let tr = slab(&self.nodes[right as usize].bounds, origin, &inv, &neg, best_t);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        let (near, far, t_far) = if a <= b { (left, right, b) } else { (right, left, a) };
                        stack[sp] = (far, t_far);
                        sp += 1;
                        node_idx = near;
                        continue;
                    }
                    (Some(_), None) => {
                        node_idx = left;
                        continue;
                    }
                    (None, Some(_)) => {
                        node_idx = right;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            // Pop the next subtree that can still hold a nearer hit.
            loop {
                if sp == 0 {
                    return (best_tri != u32::MAX).then_some((best_t, best_tri));
                }
                sp -= 1;
                if stack[sp].1 < best_t {
                    node_idx = stack[sp].0;
                    break;
                }
            }
        }
    }

    pub(crate) fn label_of(&self, tri: u32) -> SurfaceLabel {
        self.mesh.label(tri as usize)
    }
}

/// Entry distance of the ray into the box, if it enters before `t_max`.
#[inline]
fn slab(b: &Aabb, o: &Vec3, inv: &Vec3, neg: &[bool; 3], t_max: f64) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for axis in 0..3 {
        let (lo, hi) = if neg[axis] { (b.max[axis], b.min[axis]) } else { (b.min[axis], b.max[axis]) };
        let near = (lo - o[axis]) * inv[axis];
        let far = (hi - o[axis]) * inv[axis];
        // NaN (0 * inf) leaves the interval unchanged.
        if near > t0 {
            t0 = near;
        }
        if far < t1 {
            t1 = far;
        }
    }
    (t0 <= t1).then_some(t0)
}

/// Two-sided Möller–Trumbore; returns `t` in `(SELF_HIT_EPSILON, t_max)`.
#[inline]
fn intersect(tri: &PackedTriangle, o: &Vec3, d: &Vec3, t_max: f64) -> Option<f64> {
    let p = d.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det == 0.0 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = o - tri.v0;
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = d.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(&q) * inv_det;
    (t > SELF_HIT_EPSILON && t < t_max).then_some(t)
}

fn build_node(nodes: &mut Vec<Node>, refs: &mut [BuildRef], node: usize, start: usize, end: usize, depth: usize) {
    let slice = &mut refs[start..end];
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for r in slice.iter() {
        bounds.join(&r.bounds);
        cbounds.grow(&r.centroid);
    }
    nodes[node].bounds = bounds;
    let count = slice.len();

    let make_leaf = |nodes: &mut Vec<Node>| {
        nodes[node].first = start as u32;
        nodes[node].count = count as u32;
    };
    if count <= MAX_LEAF {
        return make_leaf(nodes);
    }

    // Binned SAH over the widest centroid axis.
    let extent = cbounds.max - cbounds.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    if extent[axis] <= 0.0 {
        return make_leaf(nodes);
    }
    let scale = BINS as f64 / extent[axis];
    let bin_of = |c: &Vec3| (((c[axis] - cbounds.min[axis]) * scale) as usize).min(BINS - 1);

    let mut bin_bounds = [Aabb::empty(); BINS];
    let mut bin_count = [0usize; BINS];
    for r in slice.iter() {
        let b = bin_of(&r.centroid);
        bin_bounds[b].join(&r.bounds);
        bin_count[b] += 1;
    }
    let mut left_area = [0.0; BINS];
    let mut left_count = [0usize; BINS];
    let mut acc = Aabb::empty();
    let mut n = 0;
    for i in 0..BINS {
        acc.join(&bin_bounds[i]);
        n += bin_count[i];
        left_area[i] = acc.area();
        left_count[i] = n;
    }
    let mut best = (f64::INFINITY, 0usize);
    let mut acc = Aabb::empty();
    let mut n = 0;
    for split in (1..BINS).rev() {
        acc.join(&bin_bounds[split]);
        n += bin_count[split];
        let nl = left_count[split - 1];
        if nl == 0 || n == 0 {
            continue;
        }
        let cost = left_area[split - 1] * nl as f64 + acc.area() * n as f64;
        if cost < best.0 {
            best = (cost, split);
        }
    }
    let parent_area = bounds.area().max(f64::MIN_POSITIVE);
    let split_cost = TRAVERSAL_COST + INTERSECT_COST * best.0 / parent_area;
    let leaf_cost = INTERSECT_COST * count as f64;

    let mid = if depth < MAX_DEPTH - 40 && best.0.is_finite() && split_cost < leaf_cost {
        partition(slice, |r| bin_of(&r.centroid) < best.1)
    } else if count > 4 * MAX_LEAF || depth >= MAX_DEPTH - 40 {
        // SAH prefers a leaf but the node is too large; split at the median.
        slice.sort_by(|a, b| a.centroid[axis].total_cmp(&b.centroid[axis]));
        count / 2
    } else {
        return make_leaf(nodes);
    };

    let left = nodes.len();
    let blank = Node {
        bounds: Aabb::empty(),
        first: 0,
        count: 0,
    };
    nodes.push(blank);
    nodes.push(blank);
    nodes[node].first = left as u32;
    nodes[node].count = 0;
    build_node(nodes, refs, left, start, start + mid, depth + 1);
    build_node(nodes, refs, left + 1, start + mid, end, depth + 1);
}

fn partition(slice: &mut [BuildRef], pred: impl Fn(&BuildRef) -> bool) -> usize {
    let mut i = 0;
    for j in 0..slice.len() {
        if pred(&slice[j]) {
            slice.swap(i, j);
            i += 1;
        }
    }
    i
}
