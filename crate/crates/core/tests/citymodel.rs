mod common;

use common::*;
use floodwalk::citymodel::*;
use floodwalk::geom::{Vec2, Vec3};
use floodwalk::ingest::{DemGrid, Footprint, FootprintSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hilly_dem(seed: u64) -> DemGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(0.0..3.0));
    DemGrid::from_fn(Vec2::new(-100.0, -100.0), 5.0, 41, 41, |x, y| {
        50.0 + a * x + b * y + c * (x / 20.0).sin() * (y / 30.0).cos()
    })
    .unwrap()
}

fn triangle_soup(seed: u64, n: usize) -> CityMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    let mut labels = Vec::new();
    let mut owner = Vec::new();
    for k in 0..n {
        let c = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let base = vertices.len() as u32;
        for _ in 0..3 {
            vertices.push(c + Vec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)));
        }
        tris.push([base, base + 1, base + 2]);
        if k % 2 == 0 {
            labels.push(SurfaceLabel::Ground);
            owner.push(None);
        } else {
            labels.push(SurfaceLabel::Building);
            owner.push(Some(0));
        }
    }
    CityMesh::from_parts(vertices, tris, labels, owner, vec!["b".into()]).unwrap()
}

fn check_rays(mesh: CityMesh, seed: u64, rays: usize, origin: impl Fn(&mut ChaCha8Rng) -> Vec3) {
    let accel = build_accel(mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..rays {
        let o = origin(&mut rng);
        let d = random_unit(&mut rng);
        let got = accel.raycast(&o, &d).unwrap().map(|h| (h.t, h.label));
        let want = brute_force(accel.mesh(), &o, &d);
        match (got, want) {
            (None, None) => {}
            (Some((t, l)), Some((tw, lw))) => {
                assert!((t - tw).abs() <= 1e-9 * tw, "t {t} vs {tw}");
                assert_eq!(l, lw);
            }
            _ => panic!("hit mismatch from {o:?} along {d:?}: {got:?} vs {want:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn raycast_matches_brute_force_on_soup(seed in any::<u64>()) {
        check_rays(triangle_soup(seed, 500), seed ^ 1, 200, |r| {
            Vec3::new(r.gen_range(-60.0..60.0), r.gen_range(-60.0..60.0), r.gen_range(-60.0..60.0))
        });
    }

    #[test]
    fn raycast_matches_brute_force_in_city(seed in any::<u64>()) {
        let dem = hilly_dem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let footprints = (0..12)
            .map(|k| {
                let c = Vec2::new(rng.gen_range(-80.0..80.0), rng.gen_range(-80.0..80.0));
                Footprint::new(format!("b{k}"), star_polygon(&mut rng, c, 7, 3.0, 8.0), vec![]).unwrap()
            })
            .collect();
        let city = build_city_model(&FootprintSet { footprints }, &dem, DEFAULT_HEIGHT);
        let dem2 = dem.clone();
        check_rays(city.mesh, seed ^ 2, 200, move |r| {
            let (x, y) = (r.gen_range(-95.0..95.0), r.gen_range(-95.0..95.0));
            Vec3::new(x, y, terrain_elevation(&dem2, x, y).unwrap() + r.gen_range(0.5..30.0))
        });
    }

    #[test]
    fn prisms_are_closed_with_exact_volume(
        seed in any::<u64>(),
        vertices in 3usize..16,
        height in 1.0f64..60.0,
        far in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset = if far { Vec2::new(20_000.0, 30_000.0) } else { Vec2::zeros() };
        let dem = DemGrid::from_fn(offset + Vec2::new(-50.0, -50.0), 2.0, 51, 51, |x, y| {
            10.0 + 0.05 * (x - offset.x) - 0.03 * (y - offset.y)
        })
        .unwrap();
        let ring = star_polygon(&mut rng, offset, vertices, 2.0, 20.0);
        prop_assume!(ring.len() >= 3);
        let area = shoelace(&ring).abs();
        let fp = Footprint::new("p", ring, vec![]).unwrap();
        let mesh = extrude_footprint(&fp, &dem, height).unwrap();
        let about = Vec3::new(offset.x, offset.y, 0.0);
        let volume = mesh_volume(&mesh, &about);
        let expected = area * (height + BASE_EMBED);
        prop_assert!(((volume - expected) / expected).abs() < 1e-6, "volume {volume} vs {expected}");
        prop_assert!(weighted_normal_sum(&mesh).norm() < 1e-6);
        let z_base = prism_base(&fp, &dem).unwrap();
        let z_min = mesh.vertices().iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(z_min, z_base);
    }

    #[test]
    fn prism_with_hole_subtracts_hole(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dem = hilly_dem(seed);
        let outer = star_polygon(&mut rng, Vec2::zeros(), 9, 12.0, 20.0);
        let hole: Vec<Vec2> = star_polygon(&mut rng, Vec2::zeros(), 6, 3.0, 8.0).into_iter().rev().collect();
        prop_assume!(outer.len() >= 3 && hole.len() >= 3);
        let area = shoelace(&outer).abs() - shoelace(&hole).abs();
        let fp = Footprint::new("h", outer, vec![hole]).unwrap();
        let mesh = extrude_footprint(&fp, &dem, DEFAULT_HEIGHT).unwrap();
        let volume = mesh_volume(&mesh, &Vec3::zeros());
        let expected = area * (DEFAULT_HEIGHT + BASE_EMBED);
        prop_assert!(((volume - expected) / expected).abs() < 1e-6);
        prop_assert!(weighted_normal_sum(&mesh).norm() < 1e-6);
    }

    #[test]
    fn flat_terrain_mesh_is_planar(z in -100.0f64..3000.0, n in 2usize..12) {
        let dem = DemGrid::flat(Vec2::new(5.0, -3.0), 1.5, n, n + 1, z).unwrap();
        let mesh = build_terrain(&dem);
        prop_assert_eq!(mesh.triangle_count(), 2 * (n - 1) * n);
        prop_assert!(mesh.vertices().iter().all(|v| v.z == z));
    }

    #[test]
    fn terrain_elevation_stays_within_cell_corners(seed in any::<u64>(), fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
        let dem = hilly_dem(seed);
        let (x, y) = (-100.0 + 5.0 * (10.0 + fx), -100.0 + 5.0 * (20.0 + fy));
        let z = terrain_elevation(&dem, x, y).unwrap();
        let corners = [dem.raw(10, 20), dem.raw(11, 20), dem.raw(10, 21), dem.raw(11, 21)];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(z >= lo - 1e-12 && z <= hi + 1e-12);
    }
}

#[test]
fn every_triangle_is_reachable() {
    let mesh = triangle_soup(3, 300);
    let accel = build_accel(mesh).unwrap();
    for tri in 0..accel.mesh().triangle_count() {
        let [a, b, c] = accel.mesh().corners(tri);
        let centroid = (a + b + c) / 3.0;
        let n = (b - a).cross(&(c - a)).normalize();
        // Start just off the face and shoot back through the centroid.
        let o = centroid + n * 1e-3;
        let hit = accel.raycast(&o, &-n).unwrap().expect("hits something");
        let want = brute_force(accel.mesh(), &o, &-n).unwrap();
        assert_eq!(hit.t, want.0.max(hit.t).min(hit.t));
        assert!((hit.t - want.0).abs() <= 1e-9 * want.0);
    }
}

#[test]
fn city_mesh_labels_follow_footprints() {
    let dem = hilly_dem(1);
    let fp = Footprint::new(
        "tower",
        vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0), Vec2::new(0.0, 10.0)],
        vec![],
    )
    .unwrap();
    let out = build_city_model(&FootprintSet { footprints: vec![fp] }, &dem, DEFAULT_HEIGHT);
    assert!(out.skipped.is_empty());
    let mesh = &out.mesh;
    mesh.validate().unwrap();
    for t in 0..mesh.triangle_count() {
        match mesh.label(t) {
            SurfaceLabel::Ground => assert_eq!(mesh.building_of(t), None),
            SurfaceLabel::Building => assert_eq!(mesh.building_of(t), Some("tower")),
        }
    }
    let accel = build_accel(out.mesh).unwrap();
    let top = accel.raycast(&Vec3::new(5.0, 5.0, 500.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap().unwrap();
    assert_eq!(top.building, Some("tower"));
}
