//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use floodwalk::citymodel::{CityMesh, SurfaceLabel, SELF_HIT_EPSILON};
use floodwalk::geom::{Vec2, Vec3};
use rand::Rng;

/// Nearest hit over every triangle: plane intersection followed by an
/// inside test on the three edge normals.
pub fn brute_force(mesh: &CityMesh, o: &Vec3, d: &Vec3) -> Option<(f64, SurfaceLabel)> {
    let mut best: Option<(f64, SurfaceLabel)> = None;
    for tri in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.corners(tri);
        let n = (b - a).cross(&(c - a));
        let denom = n.dot(d);
        if denom == 0.0 {
            continue;
        }
        let t = n.dot(&(a - o)) / denom;
        if t.is_nan() || t <= SELF_HIT_EPSILON || best.is_some_and(|(bt, _)| t >= bt) {
            continue;
        }
        let p = o + d * t;
        let inside = [(a, b), (b, c), (c, a)]
            .iter()
            .all(|(p0, p1)| (p1 - p0).cross(&(p - p0)).dot(&n) >= 0.0);
        if inside {
            best = Some((t, mesh.label(tri)));
        }
    }
    best
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Star-shaped polygon around `center` with one vertex per angular sector
/// at a random radius, which is always simple.
pub fn star_polygon<R: Rng>(rng: &mut R, center: Vec2, vertices: usize, r_min: f64, r_max: f64) -> Vec<Vec2> {
    let sector = std::f64::consts::TAU / vertices as f64;
    (0..vertices)
        .map(|k| {
            let a = (k as f64 + rng.gen_range(0.1..0.9)) * sector;
            center + Vec2::new(a.cos(), a.sin()) * rng.gen_range(r_min..r_max)
        })
        .collect()
}

/// Shoelace area relative to the first vertex.
pub fn shoelace(ring: &[Vec2]) -> f64 {
    let o = ring[0];
    let mut s = 0.0;
    for k in 0..ring.len() {
        let a = ring[k] - o;
        let b = ring[(k + 1) % ring.len()] - o;
        s += a.x * b.y - a.y * b.x;
    }
    0.5 * s
}

/// Enclosed volume by signed tetrahedra about `about`.
pub fn mesh_volume(mesh: &CityMesh, about: &Vec3) -> f64 {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            (a - about).dot(&(b - about).cross(&(c - about))) / 6.0
        })
        .sum()
}

/// Sum of outward normals weighted by triangle area.
pub fn weighted_normal_sum(mesh: &CityMesh) -> Vec3 {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            (b - a).cross(&(c - a)) * 0.5
        })
        .sum()
}
