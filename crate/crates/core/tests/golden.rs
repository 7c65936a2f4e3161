//! The JSON files under `tests/golden/` are consumed by the viewer's own
//! test suite. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::PathBuf;

use floodwalk::flood::{parse_scenario, scenario_step, Status};
use floodwalk::geom::{Quat, Vec2, Vec3};
use floodwalk::golden::golden_files;
use floodwalk::ingest::DemGrid;
use floodwalk::pipeline::{nearest_camera, WorldKeyframe};
use serde_json::Value;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn read(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(golden_dir().join(name)).unwrap()).unwrap()
}

#[test]
fn committed_files_are_current() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, contents) in golden_files() {
        let path = golden_dir().join(name);
        if update {
            std::fs::write(&path, &contents).unwrap();
        }
        let committed = std::fs::read_to_string(&path).unwrap_or_default();
        assert!(committed == contents, "{name} is stale; rerun with UPDATE_GOLDEN=1");
    }
}

fn arr2(v: &Value) -> Vec2 {
    Vec2::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn scenario_cases_hold_when_read_back_from_json() {
    let doc = read("scenario_cases.json");
    let d = &doc["dem"];
    let values: Vec<f64> = d["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let dem = DemGrid::new(
        Vec2::new(d["xllcenter"].as_f64().unwrap(), d["yllcenter"].as_f64().unwrap()),
        d["cellsize"].as_f64().unwrap(),
        d["ncols"].as_u64().unwrap() as usize,
        d["nrows"].as_u64().unwrap() as usize,
        values,
        -9999.0,
    )
    .unwrap();
    let scenario = parse_scenario(&doc["scenario"].to_string()).unwrap();
    let cases = doc["cases"].as_array().unwrap();
    assert!(cases.len() >= 12);
    let mut seen = [false; 3];
    for case in cases {
        let got = scenario_step(&scenario, &dem, arr2(&case["avatar"]), case["t"].as_f64().unwrap());
        let expected = &case["expected"];
        match got {
            Ok(status) => {
                seen[match status {
                    Status::Ongoing => 0,
                    Status::Evacuated { .. } => 1,
                    Status::Overtaken => 2,
                }] = true;
                assert_eq!(&serde_json::to_value(&status).unwrap(), expected, "{}", case["name"]);
            }
            Err(_) => assert_eq!(expected["status"], "error", "{}", case["name"]),
        }
    }
    assert_eq!(seen, [true; 3]);
}

#[test]
fn nearest_camera_cases_hold_when_read_back_from_json() {
    let doc = read("nearest_camera_cases.json");
    let cams: Vec<WorldKeyframe> = doc["cameras"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            let p = &c["position"];
            WorldKeyframe {
                id: c["id"].as_u64().unwrap(),
                video_time: 0.0,
                position: Vec3::new(p[0].as_f64().unwrap(), p[1].as_f64().unwrap(), p[2].as_f64().unwrap()),
                orientation: Quat::identity(),
            }
        })
        .collect();
    let cases = doc["cases"].as_array().unwrap();
    assert!(cases.len() >= 12);
    for case in cases {
        let got = nearest_camera(&cams, arr2(&case["avatar"])).unwrap();
        assert_eq!(got, case["expected"].as_u64().unwrap(), "{}", case["name"]);
        let mut reversed = cams.clone();
        reversed.reverse();
        assert_eq!(nearest_camera(&reversed, arr2(&case["avatar"])).unwrap(), got);
    }
}
