use floodwalk::citymodel::terrain_elevation;
use floodwalk::flood::*;
use floodwalk::geom::Vec2;
use floodwalk::ingest::DemGrid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rising_schedule(seed: u64, n: usize) -> FloodSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut t, mut z) = (rng.gen_range(-10.0..10.0), rng.gen_range(0.0..20.0));
    let mut entries = Vec::new();
    for _ in 0..n {
        entries.push((t, z));
        t += rng.gen_range(0.01..30.0);
        z += rng.gen_range(0.0..3.0);
    }
    FloodSchedule::new(entries).unwrap()
}

fn random_dem(seed: u64) -> DemGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dem = DemGrid::flat(Vec2::new(100.0, 200.0), 2.0, 17, 13, 0.0).unwrap();
    for j in 0..13 {
        for i in 0..17 {
            dem.set(i, j, rng.gen_range(0.0..30.0));
        }
    }
    dem.set(4, 4, dem.nodata());
    dem
}

proptest! {
    #[test]
    fn rising_schedule_gives_rising_water(seed in any::<u64>(), n in 1usize..10, a in -50.0f64..400.0, b in -50.0f64..400.0) {
        let s = rising_schedule(seed, n);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(water_elevation(&s, lo) <= water_elevation(&s, hi));
    }

    #[test]
    fn depth_raster_is_per_cell_max(seed in any::<u64>(), t in -20.0f64..300.0) {
        let s = rising_schedule(seed, 6);
        let dem = random_dem(seed);
        let raster = depth_raster(&s, &dem, t);
        let w = water_elevation(&s, t);
        prop_assert_eq!(raster.len(), dem.ncols() * dem.nrows());
        for j in 0..dem.nrows() {
            for i in 0..dem.ncols() {
                let got = raster[j * dem.ncols() + i];
                match dem.get(i, j) {
                    None => prop_assert!(got.is_nan()),
                    Some(z) => {
                        let want = if w > z { w - z } else { 0.0 };
                        prop_assert_eq!(got.to_bits(), want.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn depth_is_never_negative(seed in any::<u64>(), fx in 0.0f64..1.0, fy in 0.0f64..1.0, t in -20.0f64..300.0) {
        let s = rising_schedule(seed, 5);
        let dem = DemGrid::from_fn(Vec2::zeros(), 3.0, 10, 10, |x, y| (x * 0.3).sin() * 4.0 + y * 0.2).unwrap();
        let (x, y) = (27.0 * fx, 27.0 * fy);
        let d = depth_at(&s, &dem, x, y, t).unwrap();
        let ground = terrain_elevation(&dem, x, y).unwrap();
        prop_assert!(d >= 0.0);
        if ground >= water_elevation(&s, t) {
            prop_assert_eq!(d, 0.0);
        } else {
            prop_assert_eq!(d, water_elevation(&s, t) - ground);
        }
    }

    #[test]
    fn scenario_step_is_pure(x in 0.0f64..20.0, y in 0.0f64..20.0, t in 0.0f64..200.0) {
        let sc = floodwalk::golden::scenario();
        let dem = floodwalk::golden::scenario_dem();
        let a = scenario_step(&sc, &dem, Vec2::new(x, y), t).unwrap();
        let b = scenario_step(&sc.clone(), &dem.clone(), Vec2::new(x, y), t).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn once_overtaken_after_the_limit_stays_overtaken(x in 0.0f64..20.0, y in 0.0f64..20.0, t in 60.0f64..200.0, dt in 0.0f64..100.0) {
        let sc = floodwalk::golden::scenario();
        let dem = floodwalk::golden::scenario_dem();
        let p = Vec2::new(x, y);
        if scenario_step(&sc, &dem, p, t).unwrap() == Status::Overtaken {
            prop_assert_eq!(scenario_step(&sc, &dem, p, t + dt).unwrap(), Status::Overtaken);
        }
    }
}

#[test]
fn step_schedule_jumps_at_the_given_time() {
    let s = FloodSchedule::step(120.0, 3.0, 9.0).unwrap();
    assert_eq!(water_elevation(&s, 0.0), 3.0);
    assert_eq!(water_elevation(&s, 120.0), 3.0);
    assert_eq!(water_elevation(&s, 120.0 + STEP_RAMP), 9.0);
    assert_eq!(water_elevation(&s, 1e6), 9.0);
}

#[test]
fn scenario_file_round_trip() {
    let sc = floodwalk::golden::scenario();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    write_scenario(&path, &sc).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), sc);
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    doc.as_object_mut().unwrap().remove("drown_depth").unwrap();
    let with_default = parse_scenario(&doc.to_string()).unwrap();
    assert_eq!(with_default.drown_depth, DEFAULT_DROWN_DEPTH);
}
