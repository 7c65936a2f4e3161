//! Ear clipping for polygons with holes.
//!
//! Holes are first bridged into the exterior ring, producing one weakly
//! simple ring that is then clipped ear by ear.

use crate::geom::{orient2d, polygon_area, Vec2};

/// Triangulate a counter-clockwise polygon with clockwise holes.
///
/// Returned indices address the exterior vertices followed by each hole's
/// vertices in order. Triangles wind counter-clockwise. `None` when the
/// polygon cannot be clipped or the triangles fail to cover its area.
pub fn triangulate_polygon(exterior: &[Vec2], holes: &[Vec<Vec2>]) -> Option<Vec<[usize; 3]>> {
    let mut points: Vec<Vec2> = exterior.to_vec();
    let mut ring: Vec<usize> = (0..exterior.len()).collect();

    let mut hole_rings: Vec<Vec<usize>> = Vec::new();
    for hole in holes {
        let base = points.len();
        points.extend_from_slice(hole);
        hole_rings.push((base..base + hole.len()).collect());
    }
    hole_rings.sort_by(|a, b| {
        let ma = a.iter().map(|&i| points[i].x).fold(f64::MIN, f64::max);
        let mb = b.iter().map(|&i| points[i].x).fold(f64::MIN, f64::max);
        mb.total_cmp(&ma)
    });
    for hole in &hole_rings {
        ring = bridge_hole(&points, ring, hole)?;
    }

    let extent = points
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x.min(p.y)), hi.max(p.x.max(p.y))));
    let scale = (extent.1 - extent.0).max(1e-300);
    let eps = 1e-12 * scale * scale;

    let tris = clip_ears(&points, ring, eps)?;
    let covered: f64 = tris
        .iter()
        .map(|t| 0.5 * orient2d(points[t[0]], points[t[1]], points[t[2]]))
        .sum();
    let area = polygon_area(exterior, holes);
    ((covered - area).abs() <= 1e-9 * area.max(1e-300)).then_some(tris)
}

fn bridge_hole(points: &[Vec2], ring: Vec<usize>, hole: &[usize]) -> Option<Vec<usize>> {
    let (hpos, &m_idx) = hole
        .iter()
        .enumerate()
        .max_by(|a, b| points[*a.1].x.total_cmp(&points[*b.1].x))?;
    let m = points[m_idx];

    // Nearest edge crossed by the ray from m towards +x.
    let n = ring.len();
    let mut best: Option<(f64, usize)> = None;
    for k in 0..n {
        let a = points[ring[k]];
        let b = points[ring[(k + 1) % n]];
        if (a.y > m.y) == (b.y > m.y) && a.y != m.y && b.y != m.y {
            continue;
        }
        if a.y == b.y {
            if a.y == m.y {
                let x = a.x.min(b.x);
                if x >= m.x && best.is_none_or(|(bx, _)| x < bx) {
                    let pick = if a.x <= b.x { k } else { (k + 1) % n };
                    best = Some((x, pick));
                }
            }
            continue;
        }
        let x = a.x + (m.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if x < m.x {
            continue;
        }
        if best.is_none_or(|(bx, _)| x < bx) {
            let pick = if x == a.x && m.y == a.y {
                k
            } else if x == b.x && m.y == b.y {
                (k + 1) % n
            } else if a.x > b.x {
                k
            } else {
                (k + 1) % n
            };
            best = Some((x, pick));
        }
    }
    let (ix, mut pick) = best?;
    let i_pt = Vec2::new(ix, m.y);
    let p = points[ring[pick]];

    // A reflex vertex inside triangle (m, i, p) would block the bridge; take
    // the one closest in angle to the ray instead.
    if p != i_pt {
        let mut best_angle = f64::MAX;
        let (t0, t1, t2) = if orient2d(m, i_pt, p) > 0.0 { (m, i_pt, p) } else { (m, p, i_pt) };
        for k in 0..n {
            let r = points[ring[k]];
            if r == p {
                continue;
            }
            let prev = points[ring[(k + n - 1) % n]];
            let next = points[ring[(k + 1) % n]];
            let reflex = orient2d(prev, r, next) <= 0.0;
            if !reflex {
                continue;
            }
            if orient2d(t0, t1, r) >= 0.0 && orient2d(t1, t2, r) >= 0.0 && orient2d(t2, t0, r) >= 0.0 {
                let d = r - m;
                let angle = d.y.abs().atan2(d.x);
                if angle < best_angle || (angle == best_angle && d.norm() < (points[ring[pick]] - m).norm()) {
                    best_angle = angle;
                    pick = k;
                }
            }
        }
    }

    // Among duplicate occurrences of the bridge vertex, use the one whose
    // interior wedge contains the hole.
    let target = ring[pick];
    let occurrences: Vec<usize> = (0..n).filter(|&k| ring[k] == target).collect();
    if occurrences.len() > 1 {
        if let Some(&k) = occurrences.iter().find(|&&k| {
            let prev = points[ring[(k + n - 1) % n]];
            let cur = points[ring[k]];
            let next = points[ring[(k + 1) % n]];
            in_wedge(prev, cur, next, m)
        }) {
            pick = k;
        }
    }

    let mut out = Vec::with_capacity(n + hole.len() + 2);
    out.extend_from_slice(&ring[..=pick]);
    for s in 0..=hole.len() {
        out.push(hole[(hpos + s) % hole.len()]);
    }
    out.push(ring[pick]);
    out.extend_from_slice(&ring[pick + 1..]);
    Some(out)
}

fn in_wedge(prev: Vec2, cur: Vec2, next: Vec2, p: Vec2) -> bool {
    if orient2d(prev, cur, next) >= 0.0 {
        orient2d(prev, cur, p) > 0.0 && orient2d(cur, next, p) > 0.0
    } else {
        orient2d(prev, cur, p) > 0.0 || orient2d(cur, next, p) > 0.0
    }
}

fn clip_ears(points: &[Vec2], mut ring: Vec<usize>, eps: f64) -> Option<Vec<[usize; 3]>> {
    let mut tris = Vec::with_capacity(ring.len());
    while ring.len() > 3 {
        let n = ring.len();
        let ear = (0..n).find(|&k| is_ear(points, &ring, k, eps));
        match ear {
            Some(k) => {
                tris.push([ring[(k + n - 1) % n], ring[k], ring[(k + 1) % n]]);
                ring.remove(k);
            }
            None => {
                // Drop a collinear vertex; it contributes no area.
                let flat = (0..n).find(|&k| {
                    let prev = points[ring[(k + n - 1) % n]];
                    let next = points[ring[(k + 1) % n]];
                    orient2d(prev, points[ring[k]], next).abs() <= eps
                })?;
                ring.remove(flat);
            }
        }
    }
    if orient2d(points[ring[0]], points[ring[1]], points[ring[2]]) > eps {
        tris.push([ring[0], ring[1], ring[2]]);
    }
    Some(tris)
}

fn is_ear(points: &[Vec2], ring: &[usize], k: usize, eps: f64) -> bool {
    let n = ring.len();
    let a = points[ring[(k + n - 1) % n]];
    let b = points[ring[k]];
    let c = points[ring[(k + 1) % n]];
    if orient2d(a, b, c) <= eps {
        return false;
    }
    ring.iter().all(|&i| {
        let p = points[i];
        if p == a || p == b || p == c {
            return true;
        }
        !(orient2d(a, b, p) >= 0.0 && orient2d(b, c, p) >= 0.0 && orient2d(c, a, p) >= 0.0)
    })
}
