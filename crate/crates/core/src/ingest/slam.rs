use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{read_text, IngestError};
use crate::geom::{Quat, Vec3};

/// Norm deviation below which a quaternion is taken as already unit.
const UNIT_EXACT: f64 = 1e-9;
/// Norm deviation up to which a quaternion is renormalized instead of rejected.
const UNIT_REPAIR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub id: u64,
    pub position: Vec3,
    /// Camera frame to local SLAM frame.
    pub orientation: Quat,
    pub video_time: f64,
}

/// SLAM keyframe poses in an arbitrary-scale local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrajectory {
    keyframes: Vec<Keyframe>,
    gravity: Vec3,
}

impl CameraTrajectory {
    /// `gravity` is the local "up" direction (opposite to the pull of
    /// gravity) and is normalized here.
    pub fn new(keyframes: Vec<Keyframe>, gravity: Vec3) -> Result<Self, IngestError> {
        if keyframes.len() < 2 {
            return Err(IngestError::Slam("need at least 2 keyframes".into()));
        }
        if keyframes.windows(2).any(|w| w[1].id <= w[0].id) {
            return Err(IngestError::Slam("keyframe ids must be strictly increasing".into()));
        }
        for kf in &keyframes {
            if !kf.position.iter().all(|v| v.is_finite()) || !kf.video_time.is_finite() {
                return Err(IngestError::NonFinite(format!("keyframe {}", kf.id)));
            }
            let norm = kf.orientation.quaternion().norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(IngestError::NonUnitQuaternion { id: kf.id, norm });
            }
        }
        let norm = gravity.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(IngestError::Slam("gravity must be a non-zero vector".into()));
        }
        let gravity = if (norm - 1.0).abs() <= UNIT_EXACT { gravity } else { gravity / norm };
        Ok(CameraTrajectory { keyframes, gravity })
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn gravity(&self) -> Vec3 {
        self.gravity
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn first(&self) -> &Keyframe {
        &self.keyframes[0]
    }

    pub fn last(&self) -> &Keyframe {
        &self.keyframes[self.keyframes.len() - 1]
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.keyframes.binary_search_by_key(&id, |k| k.id).ok()
    }

    pub fn get(&self, id: u64) -> Option<&Keyframe> {
        self.index_of(id).map(|i| &self.keyframes[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.keyframes.iter().map(|k| k.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlamPoint {
    pub position: Vec3,
    pub keyframe_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlamPointCloud {
    pub points: Vec<SlamPoint>,
}

impl SlamPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlamDoc {
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    keyframes: Vec<KeyframeDoc>,
    #[serde(default)]
    points: Vec<PointDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyframeDoc {
    id: u64,
    t: f64,
    p: [f64; 3],
    /// `[w, x, y, z]`
    q: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    p: [f64; 3],
    kf: u64,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

pub fn load_slam(path: &Path) -> Result<(CameraTrajectory, SlamPointCloud), IngestError> {
    parse_slam(&read_text(path)?)
}

pub fn parse_slam(text: &str) -> Result<(CameraTrajectory, SlamPointCloud), IngestError> {
    let doc: SlamDoc = serde_json::from_str(text).map_err(|e| IngestError::Slam(e.to_string()))?;
    let keyframes = doc
        .keyframes
        .iter()
        .map(|k| {
            Ok(Keyframe {
                id: k.id,
                position: Vec3::from(k.p),
                orientation: unit_quaternion(k.id, k.q)?,
                video_time: k.t,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    let traj = CameraTrajectory::new(keyframes, Vec3::from(doc.gravity))?;

    let points = doc
        .points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if traj.index_of(p.kf).is_none() {
                return Err(IngestError::DanglingKeyframe { index, keyframe: p.kf });
            }
            if !p.p.iter().all(|v| v.is_finite()) {
                return Err(IngestError::NonFinite(format!("point {index}")));
            }
            Ok(SlamPoint {
                position: Vec3::from(p.p),
                keyframe_id: p.kf,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((traj, SlamPointCloud { points }))
}

fn unit_quaternion(id: u64, [w, x, y, z]: [f64; 4]) -> Result<Quat, IngestError> {
    let q = Quaternion::new(w, x, y, z);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_REPAIR {
        return Err(IngestError::NonUnitQuaternion { id, norm });
    }
    if (norm - 1.0).abs() <= UNIT_EXACT {
        Ok(UnitQuaternion::new_unchecked(q))
    } else {
        Ok(UnitQuaternion::new_normalize(q))
    }
}

pub fn slam_to_string(traj: &CameraTrajectory, cloud: &SlamPointCloud) -> String {
    let g = traj.gravity();
    let doc = SlamDoc {
        gravity: [g.x, g.y, g.z],
        keyframes: traj
            .keyframes()
            .iter()
            .map(|k| {
                let q = k.orientation.quaternion();
                KeyframeDoc {
                    id: k.id,
                    t: k.video_time,
                    p: k.position.into(),
                    q: [q.w, q.i, q.j, q.k],
                }
            })
            .collect(),
        points: cloud
            .points
            .iter()
            .map(|p| PointDoc {
                p: p.position.into(),
                kf: p.keyframe_id,
            })
            .collect(),
    };
    crate::json::to_string(&doc)
}

pub fn write_slam(path: &Path, traj: &CameraTrajectory, cloud: &SlamPointCloud) -> Result<(), crate::Error> {
    std::fs::write(path, slam_to_string(traj, cloud)).map_err(|e| crate::Error::io(path, e))
}
