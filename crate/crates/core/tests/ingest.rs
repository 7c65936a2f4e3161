use std::collections::BTreeMap;

use floodwalk::geom::{Quat, Vec2, Vec3};
use floodwalk::ingest::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits2(v: &Vec2) -> [u64; 2] {
    [v.x.to_bits(), v.y.to_bits()]
}

fn bits3(v: &Vec3) -> [u64; 3] {
    [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]
}

/// Non-overlapping rectangles with arbitrary-precision corners, some with a
/// rectangular hole.
fn footprint_set(seed: u64, n: usize) -> FootprintSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let footprints = (0..n)
        .map(|k| {
            let x0 = 500_000.0 + 100.0 * k as f64 + rng.gen_range(0.0..10.0);
            let y0 = 4_000_000.0 + rng.gen_range(0.0..10.0);
            let (w, h) = (rng.gen_range(20.0..60.0), rng.gen_range(20.0..60.0));
            let ext = vec![Vec2::new(x0, y0), Vec2::new(x0 + w, y0), Vec2::new(x0 + w, y0 + h), Vec2::new(x0, y0 + h)];
            let holes = if k % 2 == 1 {
                let (hx, hy) = (x0 + w / 3.0, y0 + h / 3.0);
                vec![vec![Vec2::new(hx, hy), Vec2::new(hx, hy + 5.0), Vec2::new(hx + 5.0, hy + 5.0), Vec2::new(hx + 5.0, hy)]]
            } else {
                vec![]
            };
            Footprint::new(format!("bldg-{k}"), ext, holes).unwrap()
        })
        .collect();
    FootprintSet { footprints }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn footprints_round_trip_bit_exact(seed in any::<u64>(), n in 1usize..8) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.geojson");
        let set = footprint_set(seed, n);
        write_footprints(&path, &set).unwrap();
        let back = load_footprints(&path, FootprintOptions::default()).unwrap();
        prop_assert_eq!(back.footprints.len(), set.footprints.len());
        for (a, b) in set.footprints.iter().zip(&back.footprints) {
            prop_assert_eq!(&a.id, &b.id);
            let va: Vec<_> = a.vertices().map(bits2).collect();
            let vb: Vec<_> = b.vertices().map(bits2).collect();
            prop_assert_eq!(va, vb);
        }
        // The written file is valid GeoJSON with closed rings.
        let text = std::fs::read_to_string(&path).unwrap();
        let gj: geojson::GeoJson = text.parse().unwrap();
        let geojson::GeoJson::FeatureCollection(fc) = gj else { panic!("not a collection") };
        prop_assert_eq!(fc.features.len(), n);
        for f in fc.features {
            let Some(geojson::Value::Polygon(rings)) = f.geometry.map(|g| g.value) else { panic!("not a polygon") };
            for r in rings {
                prop_assert_eq!(r.first(), r.last());
            }
        }
    }

    #[test]
    fn dem_round_trip_bit_exact(seed in any::<u64>(), nc in 2usize..12, nr in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = Vec2::new(rng.gen_range(-1e6..1e6), rng.gen_range(-1e6..1e6));
        let spacing = rng.gen_range(0.01..100.0);
        let mut dem = DemGrid::from_fn(origin, spacing, nc, nr, |_, _| 0.0).unwrap();
        for j in 0..nr {
            for i in 0..nc {
                dem.set(i, j, rng.gen_range(-500.0..9000.0));
            }
        }
        dem.set(nc - 1, 0, dem.nodata());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dem.asc");
        write_dem(&path, &dem).unwrap();
        let back = load_dem(&path).unwrap();
        prop_assert_eq!(bits2(&back.origin()), bits2(&dem.origin()));
        prop_assert_eq!(back.spacing().to_bits(), dem.spacing().to_bits());
        for j in 0..nr {
            for i in 0..nc {
                prop_assert_eq!(back.raw(i, j).to_bits(), dem.raw(i, j).to_bits());
            }
        }
        prop_assert_eq!(back.get(nc - 1, 0), None);
    }

    #[test]
    fn corner_header_origin_is_cell_center(
        x in -1e6f64..1e6,
        y in -1e6f64..1e6,
        cell in 0.01f64..100.0,
    ) {
        let text = format!(
            "ncols 2\nnrows 2\nxllcorner {}\nyllcorner {}\ncellsize {}\n1 2\n3 4\n",
            floodwalk::json::format_f64(x),
            floodwalk::json::format_f64(y),
            floodwalk::json::format_f64(cell),
        );
        let dem = parse_dem(&text).unwrap();
        prop_assert_eq!(dem.origin().x, x + cell / 2.0);
        prop_assert_eq!(dem.origin().y, y + cell / 2.0);
        // First text row is the northern one.
        prop_assert_eq!(dem.raw(0, 1), 1.0);
        prop_assert_eq!(dem.raw(1, 0), 4.0);
    }

    #[test]
    fn slam_round_trip_bit_exact(seed in any::<u64>(), n in 2usize..20, pts in 0usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keyframes: Vec<Keyframe> = (0..n)
            .map(|k| Keyframe {
                id: 3 * k as u64 + 1,
                position: Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-5.0..5.0)),
                orientation: Quat::from_euler_angles(rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5), rng.gen_range(-3.0..3.0)),
                video_time: k as f64 * rng.gen_range(0.1..1.0),
            })
            .collect();
        let gravity = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), 1.0);
        let traj = CameraTrajectory::new(keyframes, gravity).unwrap();
        let cloud = SlamPointCloud {
            points: (0..pts)
                .map(|_| SlamPoint {
                    position: Vec3::new(rng.gen_range(-90.0..90.0), rng.gen_range(-90.0..90.0), rng.gen_range(-9.0..9.0)),
                    keyframe_id: 3 * rng.gen_range(0..n) as u64 + 1,
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("slam.json");
        write_slam(&path, &traj, &cloud).unwrap();
        let (t2, c2) = load_slam(&path).unwrap();
        prop_assert_eq!(bits3(&t2.gravity()), bits3(&traj.gravity()));
        for (a, b) in traj.keyframes().iter().zip(t2.keyframes()) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(a.video_time.to_bits(), b.video_time.to_bits());
            prop_assert_eq!(bits3(&a.position), bits3(&b.position));
            prop_assert_eq!(a.orientation.coords.map(f64::to_bits), b.orientation.coords.map(f64::to_bits));
        }
        prop_assert_eq!(&c2, &cloud);
    }

    #[test]
    fn mask_histogram_matches_independent_decode(seed in any::<u64>(), h in 1usize..40) {
        let w = 2 * h;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids = [2u64, 5, 11];
        let dir = tempfile::tempdir().unwrap();
        for &id in &ids {
            let indices: Vec<u8> = (0..w * h).map(|_| rng.gen_range(0..3)).collect();
            let mask = SegMask::from_indices(w, h, &indices).unwrap();
            write_mask(&dir.path().join(format!("mask_{id}.png")), &mask).unwrap();
        }
        let masks: BTreeMap<u64, SegMask> = load_masks(dir.path(), &ids).unwrap();
        for &id in &ids {
            let rgb = image::open(dir.path().join(format!("mask_{id}.png"))).unwrap().to_rgb8();
            let mut counts = [0usize; 3];
            for px in rgb.pixels() {
                let k = MASK_PALETTE.iter().position(|c| *c == px.0).expect("palette color");
                counts[k] += 1;
            }
            prop_assert_eq!(masks[&id].histogram(), counts);
        }
    }
}
