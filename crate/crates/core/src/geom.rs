//! Small geometry helpers shared across modules.

use nalgebra::{UnitQuaternion, Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Twice the signed area of a closed ring; positive for counter-clockwise.
/// Summed as a fan around the first vertex to stay accurate far from the
/// coordinate origin.
pub fn signed_area2(ring: &[Vec2]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    ring.windows(2).skip(1).map(|w| orient2d(o, w[0], w[1])).sum()
}

pub fn ring_area(ring: &[Vec2]) -> f64 {
    0.5 * signed_area2(ring).abs()
}

/// Area of a polygon with holes.
pub fn polygon_area(exterior: &[Vec2], holes: &[Vec<Vec2>]) -> f64 {
    ring_area(exterior) - holes.iter().map(|h| ring_area(h)).sum::<f64>()
}

/// `(b - a) x (c - a)`; positive when `a, b, c` turn left.
#[inline]
pub fn orient2d(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Even-odd point-in-ring test. Points on the boundary may go either way.
pub fn point_in_ring(p: Vec2, ring: &[Vec2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_in_polygon(p: Vec2, exterior: &[Vec2], holes: &[Vec<Vec2>]) -> bool {
    point_in_ring(p, exterior) && !holes.iter().any(|h| point_in_ring(p, h))
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching endpoints included.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient2d(c, d, a);
    let d2 = orient2d(c, d, b);
    let d3 = orient2d(a, b, c);
    let d4 = orient2d(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when any two non-adjacent edges of the polygon's rings touch.
pub fn polygon_self_intersects(exterior: &[Vec2], holes: &[Vec<Vec2>]) -> bool {
    let rings: Vec<&[Vec2]> = std::iter::once(exterior).chain(holes.iter().map(|h| h.as_slice())).collect();
    let edges: Vec<(usize, usize, Vec2, Vec2)> = rings
        .iter()
        .enumerate()
        .flat_map(|(r, ring)| {
            let n = ring.len();
            (0..n).map(move |i| (r, i, ring[i], ring[(i + 1) % n]))
        })
        .collect();
    for (k, &(r1, i1, a, b)) in edges.iter().enumerate() {
        for &(r2, i2, c, d) in &edges[k + 1..] {
            if r1 == r2 {
                let n = rings[r1].len();
                if (i1 + 1) % n == i2 || (i2 + 1) % n == i1 {
                    continue;
                }
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Rotation by `angle` radians about world +z.
pub fn yaw_rotation(angle: f64) -> Quat {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle)
}

/// Smallest rotation taking `up` onto +z.
pub fn leveling_rotation(up: &Vec3) -> Quat {
    UnitQuaternion::rotation_between(up, &Vector3::z()).unwrap_or_else(|| {
        // `up` is exactly -z: any half-turn about a horizontal axis works.
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
    })
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn square_area_and_orientation() {
        let sq = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
        assert_eq!(signed_area2(&sq), 2.0);
        assert_eq!(ring_area(&sq), 1.0);
        assert!(point_in_ring(v(0.5, 0.5), &sq));
        assert!(!point_in_ring(v(1.5, 0.5), &sq));
    }

    #[test]
    fn bowtie_self_intersects() {
        let bowtie = [v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)];
        assert!(polygon_self_intersects(&bowtie, &[]));
        let sq = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
        assert!(!polygon_self_intersects(&sq, &[]));
    }

    #[test]
    fn leveling_maps_up_to_z() {
        let up = Vec3::new(0.3, -0.2, 0.9).normalize();
        let r = leveling_rotation(&up);
        assert!((r * up - Vec3::z()).norm() < 1e-12);
        let r = leveling_rotation(&-Vec3::z());
        assert!((r * -Vec3::z() - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }
}
