//! Hand-checked test vectors for the scenario and nearest-camera rules.
//!
//! Other implementations of these rules (the browser viewer) test against
//! the JSON files produced here. Every expected value is written out by hand
//! below rather than computed.

use serde::Serialize;
use serde_json::{json, Value};

use crate::flood::{EvacuationPoint, EvacuationScenario, FloodSchedule, Status};
use crate::geom::{Quat, Vec2, Vec3};
use crate::ingest::DemGrid;
use crate::pipeline::WorldKeyframe;

/// `None` means the call must fail.
pub struct ScenarioCase {
    pub name: &'static str,
    pub avatar: [f64; 2],
    pub t: f64,
    pub expected: Option<Status>,
}

/// 21 x 21 grid at 1 m spacing with cell centers from (0, 0); elevation
/// rises 0.25 m per meter of x from 10 m.
pub fn scenario_dem() -> DemGrid {
    DemGrid::from_fn(Vec2::zeros(), 1.0, 21, 21, |x, _| 10.0 + 0.25 * x).expect("valid grid")
}

/// Water rises to 10 m at the 60 s limit, surges to 14 m at 68 s, then
/// recedes to 9 m by 100 s.
pub fn scenario() -> EvacuationScenario {
    let point = |name: &str, x: f64, y: f64, radius: f64| EvacuationPoint {
        name: name.into(),
        position: Vec2::new(x, y),
        radius,
    };
    let schedule = FloodSchedule::new(vec![(0.0, 9.0), (60.0, 10.0), (68.0, 14.0), (100.0, 9.0)]).expect("valid");
    EvacuationScenario::new(
        vec![point("school", 15.0, 15.0, 2.0), point("gym", 18.0, 15.0, 2.0), point("hill", 3.0, 17.0, 1.5)],
        60.0,
        schedule,
        0.5,
    )
    .expect("valid")
}

fn evacuated(name: &str) -> Option<Status> {
    Some(Status::Evacuated { name: name.into() })
}

pub fn scenario_cases() -> Vec<ScenarioCase> {
    use Status::{Ongoing, Overtaken};
    let case = |name, x, y, t, expected| ScenarioCase {
        name,
        avatar: [x, y],
        t,
        expected,
    };
    vec![
        case("at evacuation point center", 15.0, 15.0, 0.0, evacuated("school")),
        case("on evacuation radius", 17.0, 15.0, 0.0, evacuated("school")),
        case("just outside radius, dry", 15.0, 17.0001, 0.0, Some(Ongoing)),
        case("overlapping radii pick first listed", 16.5, 15.0, 10.0, evacuated("school")),
        case("second point only", 19.5, 15.0, 10.0, evacuated("gym")),
        case("evacuation beats deep water", 3.0, 18.5, 68.0, evacuated("hill")),
        case("evacuation long after limit", 3.0, 17.0, 500.0, evacuated("hill")),
        case("dry at start", 0.0, 0.0, 0.0, Some(Ongoing)),
        case("water at ground at limit", 0.0, 0.0, 60.0, Some(Ongoing)),
        case("shallow after limit", 0.0, 0.0, 60.5, Some(Ongoing)),
        case("depth equals drown depth", 0.0, 0.0, 61.0, Some(Overtaken)),
        case("depth equals drown depth on slope", 2.0, 0.0, 62.0, Some(Overtaken)),
        case("deep at surge peak", 4.0, 0.0, 68.0, Some(Overtaken)),
        case("receded but surge was reached", 4.0, 0.0, 100.0, Some(Overtaken)),
        case("receded long after", 0.0, 0.0, 500.0, Some(Overtaken)),
        case("high ground never floods", 20.0, 0.0, 80.0, Some(Ongoing)),
        case("rising before limit", 0.0, 0.0, 50.0, Some(Ongoing)),
        case("outside the DEM", 25.0, 0.0, 10.0, None),
        case("negative time", 0.0, 0.0, -1.0, None),
    ]
}

fn expected_json(e: &Option<Status>) -> Value {
    match e {
        Some(s) => serde_json::to_value(s).expect("status serializes"),
        None => json!({"status": "error"}),
    }
}

#[derive(Serialize)]
struct DemDoc {
    xllcenter: f64,
    yllcenter: f64,
    cellsize: f64,
    ncols: usize,
    nrows: usize,
    /// Row-major, southern row first.
    values: Vec<f64>,
}

pub fn scenario_golden() -> Value {
    let dem = scenario_dem();
    let mut values = Vec::new();
    for j in 0..dem.nrows() {
        for i in 0..dem.ncols() {
            values.push(dem.raw(i, j));
        }
    }
    let dem_doc = DemDoc {
        xllcenter: dem.origin().x,
        yllcenter: dem.origin().y,
        cellsize: dem.spacing(),
        ncols: dem.ncols(),
        nrows: dem.nrows(),
        values,
    };
    let cases: Vec<Value> = scenario_cases()
        .iter()
        .map(|c| json!({"name": c.name, "avatar": c.avatar, "t": c.t, "expected": expected_json(&c.expected)}))
        .collect();
    json!({
        "terrain": "bilinear interpolation between cell centers",
        "dem": dem_doc,
        "scenario": scenario(),
        "cases": cases,
    })
}

pub struct NearestCase {
    pub name: &'static str,
    pub avatar: [f64; 2],
    pub expected: u64,
}

/// Six cameras 2 m apart on the x axis, ids 10 to 15, at varying heights.
pub fn camera_track() -> Vec<WorldKeyframe> {
    (0..6)
        .map(|k| WorldKeyframe {
            id: 10 + k,
            video_time: k as f64,
            position: Vec3::new(2.0 * k as f64, 0.0, if k == 4 { 1000.0 } else { 50.0 + k as f64 }),
            orientation: Quat::identity(),
        })
        .collect()
}

pub fn nearest_cases() -> Vec<NearestCase> {
    let case = |name, x, y, expected| NearestCase {
        name,
        avatar: [x, y],
        expected,
    };
    vec![
        case("exactly at a camera", 4.0, 0.0, 12),
        case("midway tie takes lower id", 5.0, 0.0, 12),
        case("off-axis tie takes lower id", 5.0, 3.0, 12),
        case("first interval tie", 1.0, 0.0, 10),
        case("tie below the axis", 9.0, -4.0, 14),
        case("before the start", -100.0, 5.0, 10),
        case("past the end", 100.0, 0.0, 15),
        case("just short of midpoint", 6.9, 1.0, 13),
        case("just past midpoint", 7.1, -1.0, 14),
        case("far to the side", 0.0, 50.0, 10),
        case("height is ignored", 8.0, 0.0, 14),
        case("near second camera", 2.4, -0.3, 11),
    ]
}

pub fn nearest_golden() -> Value {
    let cameras: Vec<Value> = camera_track()
        .iter()
        .map(|k| json!({"id": k.id, "position": [k.position.x, k.position.y, k.position.z]}))
        .collect();
    let cases: Vec<Value> = nearest_cases()
        .iter()
        .map(|c| json!({"name": c.name, "avatar": c.avatar, "expected": c.expected}))
        .collect();
    json!({"distance": "horizontal", "cameras": cameras, "cases": cases})
}

/// File name and contents of each golden vector file.
pub fn golden_files() -> Vec<(&'static str, String)> {
    vec![
        ("scenario_cases.json", crate::json::to_string(&scenario_golden())),
        ("nearest_camera_cases.json", crate::json::to_string(&nearest_golden())),
    ]
}
