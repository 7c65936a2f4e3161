//! Planar flood surface, water depth and the timed evacuation scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::citymodel::terrain_elevation;
use crate::geom::Vec2;
use crate::ingest::DemGrid;

pub const DEFAULT_DROWN_DEPTH: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum FloodError {
    #[error("invalid flood schedule: {0}")]
    Schedule(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("({x}, {y}) is outside the DEM")]
    OutsideDem { x: f64, y: f64 },
    #[error("scenario time {0} is negative")]
    NegativeTime(f64),
    #[error("scenario JSON: {0}")]
    Parse(String),
}

/// Water surface elevation over time, piecewise linear between entries and
/// held constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodSchedule {
    entries: Vec<(f64, f64)>,
}

impl FloodSchedule {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self, FloodError> {
        if entries.is_empty() {
            return Err(FloodError::Schedule("no entries".into()));
        }
        if entries.iter().any(|(t, z)| !t.is_finite() || !z.is_finite()) {
            return Err(FloodError::Schedule("non-finite entry".into()));
        }
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(FloodError::Schedule("times must be strictly increasing".into()));
        }
        Ok(FloodSchedule { entries })
    }

    /// Dry until `at`, then `elevation` from `at` on.
    pub fn step(at: f64, dry: f64, elevation: f64) -> Result<Self, FloodError> {
        FloodSchedule::new(vec![(at, dry), (at + STEP_RAMP, elevation)])
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }
}

/// Rise time used by [`FloodSchedule::step`].
pub const STEP_RAMP: f64 = 1e-3;

pub fn water_elevation(s: &FloodSchedule, t: f64) -> f64 {
    let e = &s.entries;
    let k = e.partition_point(|&(ti, _)| ti <= t);
    if k == 0 {
        return e[0].1;
    }
    if k == e.len() {
        return e[e.len() - 1].1;
    }
    let (t0, z0) = e[k - 1];
    let (t1, z1) = e[k];
    let f = (t - t0) / (t1 - t0);
    z0 + (z1 - z0) * f
}

pub fn depth_at(s: &FloodSchedule, dem: &DemGrid, x: f64, y: f64, t: f64) -> Result<f64, FloodError> {
    let z = terrain_elevation(dem, x, y).map_err(|_| FloodError::OutsideDem { x, y })?;
    Ok((water_elevation(s, t) - z).max(0.0))
}

/// Per-cell depth `max(0, w - z)` in DEM storage order (row 0 south);
/// nodata cells are NaN.
pub fn depth_raster(s: &FloodSchedule, dem: &DemGrid, t: f64) -> Vec<f64> {
    let w = water_elevation(s, t);
    let mut out = Vec::with_capacity(dem.ncols() * dem.nrows());
    for j in 0..dem.nrows() {
        for i in 0..dem.ncols() {
            out.push(dem.get(i, j).map_or(f64::NAN, |z| (w - z).max(0.0)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvacuationPoint {
    pub name: String,
    pub position: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvacuationScenario {
    pub points: Vec<EvacuationPoint>,
    pub time_limit: f64,
    pub schedule: FloodSchedule,
    pub drown_depth: f64,
}

impl EvacuationScenario {
    pub fn new(
        points: Vec<EvacuationPoint>,
        time_limit: f64,
        schedule: FloodSchedule,
        drown_depth: f64,
    ) -> Result<Self, FloodError> {
        for p in &points {
            if !(p.radius > 0.0 && p.radius.is_finite()) || !p.position.iter().all(|v| v.is_finite()) {
                return Err(FloodError::Scenario(format!("evacuation point {:?} needs a positive radius", p.name)));
            }
        }
        if !(time_limit > 0.0 && time_limit.is_finite()) {
            return Err(FloodError::Scenario("time_limit must be positive".into()));
        }
        if !(drown_depth > 0.0 && drown_depth.is_finite()) {
            return Err(FloodError::Scenario("drown_depth must be positive".into()));
        }
        Ok(EvacuationScenario {
            points,
            time_limit,
            schedule,
            drown_depth,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Ongoing,
    Evacuated { name: String },
    Overtaken,
}

/// Scenario state for an avatar at `avatar` at time `t`.
///
/// Reaching any evacuation point (horizontal distance at most its radius,
/// first listed point wins) takes precedence over water. Otherwise the
/// avatar is overtaken when the depth at `t` reaches `drown_depth`, or, past
/// the time limit, when it reached `drown_depth` at any schedule time
/// between the limit and `t`.
pub fn scenario_step(sc: &EvacuationScenario, dem: &DemGrid, avatar: Vec2, t: f64) -> Result<Status, FloodError> {
    if !(t >= 0.0) {
        return Err(FloodError::NegativeTime(t));
    }
    let ground = terrain_elevation(dem, avatar.x, avatar.y).map_err(|_| FloodError::OutsideDem {
        x: avatar.x,
        y: avatar.y,
    })?;
    if let Some(p) = sc.points.iter().find(|p| (avatar - p.position).norm() <= p.radius) {
        return Ok(Status::Evacuated { name: p.name.clone() });
    }
    let depth = |t: f64| (water_elevation(&sc.schedule, t) - ground).max(0.0);
    if depth(t) >= sc.drown_depth {
        return Ok(Status::Overtaken);
    }
    if t > sc.time_limit {
        let reached = std::iter::once(sc.time_limit)
            .chain(
                sc.schedule
                    .entries()
                    .iter()
                    .map(|e| e.0)
                    .filter(|&ts| ts >= sc.time_limit && ts <= t),
            )
            .any(|ts| depth(ts) >= sc.drown_depth);
        if reached {
            return Ok(Status::Overtaken);
        }
    }
    Ok(Status::Ongoing)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    name: String,
    pos: [f64; 2],
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    points: Vec<PointDoc>,
    time_limit: f64,
    schedule: Vec<[f64; 2]>,
    #[serde(default = "default_drown_depth")]
    drown_depth: f64,
}

fn default_drown_depth() -> f64 {
    DEFAULT_DROWN_DEPTH
}

impl ScenarioDoc {
    fn from_scenario(sc: &EvacuationScenario) -> Self {
        ScenarioDoc {
            points: sc
                .points
                .iter()
                .map(|p| PointDoc {
                    name: p.name.clone(),
                    pos: [p.position.x, p.position.y],
                    radius: p.radius,
                })
                .collect(),
            time_limit: sc.time_limit,
            schedule: sc.schedule.entries().iter().map(|&(t, z)| [t, z]).collect(),
            drown_depth: sc.drown_depth,
        }
    }

    fn into_scenario(self) -> Result<EvacuationScenario, FloodError> {
        let points = self
            .points
            .into_iter()
            .map(|p| EvacuationPoint {
                name: p.name,
                position: Vec2::new(p.pos[0], p.pos[1]),
                radius: p.radius,
            })
            .collect();
        let schedule = FloodSchedule::new(self.schedule.iter().map(|e| (e[0], e[1])).collect())?;
        EvacuationScenario::new(points, self.time_limit, schedule, self.drown_depth)
    }
}

impl Serialize for EvacuationScenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ScenarioDoc::from_scenario(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for EvacuationScenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ScenarioDoc::deserialize(d)?.into_scenario().map_err(serde::de::Error::custom)
    }
}

pub fn parse_scenario(text: &str) -> Result<EvacuationScenario, FloodError> {
    serde_json::from_str(text).map_err(|e| FloodError::Parse(e.to_string()))
}

pub fn load_scenario(path: &Path) -> Result<EvacuationScenario, crate::Error> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(parse_scenario(&text)?)
}

pub fn write_scenario(path: &Path, sc: &EvacuationScenario) -> Result<(), crate::Error> {
    crate::json::write_file(path, sc)
}
