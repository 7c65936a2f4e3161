use super::AlignError;
use crate::geom::{leveling_rotation, wrap_angle, yaw_rotation, Quat, Vec2, Vec3};
use crate::ingest::{CameraTrajectory, DemGrid, MapEndpoints};

/// Minimum horizontal distance between the world start and end points.
pub const MIN_CHORD: f64 = 0.1;

/// The seven optimized scalars: world start, world end and residual yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentParams {
    pub v_s: Vec3,
    pub v_e: Vec3,
    /// Extra rotation about gravity beyond the chord-aligning yaw, radians.
    pub lambda: f64,
}

impl AlignmentParams {
    pub fn new(v_s: Vec3, v_e: Vec3, lambda: f64) -> Self {
        AlignmentParams { v_s, v_e, lambda }
    }

    /// Start from map-annotated endpoints at `camera_height` above terrain
    /// with no residual yaw.
    pub fn from_endpoints(ep: &MapEndpoints, dem: &DemGrid, camera_height: f64) -> Result<Self, crate::Error> {
        ep.check_within(dem)?;
        let lift = |p: Vec2| -> Result<Vec3, crate::Error> {
            let z = crate::citymodel::terrain_elevation(dem, p.x, p.y)?;
            Ok(Vec3::new(p.x, p.y, z + camera_height))
        };
        Ok(AlignmentParams::new(lift(ep.start)?, lift(ep.end)?, 0.0))
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if !self.v_s.iter().chain(self.v_e.iter()).all(|v| v.is_finite()) || !self.lambda.is_finite() {
            return Err(AlignError::InvalidParams("non-finite parameter".into()));
        }
        let chord = (self.v_e.xy() - self.v_s.xy()).norm();
        if chord <= MIN_CHORD {
            return Err(AlignError::InvalidParams(format!(
                "horizontal chord {chord} m is not above {MIN_CHORD} m"
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.v_s.x, self.v_s.y, self.v_s.z, self.v_e.x, self.v_e.y, self.v_e.z, self.lambda]
    }

    pub fn from_array(a: &[f64]) -> Self {
        AlignmentParams::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]), a[6])
    }
}

/// Similarity about gravity plus a linear vertical drift correction,
/// mapping the local SLAM frame into the world frame:
///
/// `p_world = scale * R_yaw * (L * p) + translation + (z0 + z1 * u) * up`
///
/// where `L` levels the local gravity onto +z and `u` is the normalized
/// horizontal arc length of the keyframe the point belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTransform {
    pub yaw: f64,
    pub scale: f64,
    pub translation: Vec3,
    pub z0: f64,
    pub z1: f64,
    level: Quat,
    arc: Vec<f64>,
}

impl WorldTransform {
    /// Rotation applied to camera orientations: level, then yaw.
    pub fn rotation(&self) -> Quat {
        yaw_rotation(self.yaw) * self.level
    }

    pub fn apply(&self, p: &Vec3, u: f64) -> Vec3 {
        let mut w = self.rotation() * p * self.scale + self.translation;
        w.z += self.z0 + self.z1 * u;
        w
    }

    /// Inverse of [`apply`](Self::apply) for the same `u`.
    pub fn invert(&self, w: &Vec3, u: f64) -> Vec3 {
        let mut q = w - self.translation;
        q.z -= self.z0 + self.z1 * u;
        self.rotation().inverse() * (q / self.scale)
    }

    /// Normalized horizontal arc length of keyframe `index`.
    pub fn arc_fraction(&self, index: usize) -> f64 {
        self.arc[index]
    }

    pub fn arc_fractions(&self) -> &[f64] {
        &self.arc
    }
}

/// Normalized cumulative horizontal path length of each keyframe, measured
/// in the leveled local frame.
pub fn arc_fractions(traj: &CameraTrajectory, level: &Quat) -> Vec<f64> {
    let pts: Vec<Vec2> = traj.keyframes().iter().map(|k| (level * k.position).xy()).collect();
    let mut acc = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        acc[i] = acc[i - 1] + (pts[i] - pts[i - 1]).norm();
    }
    let total = acc[acc.len() - 1];
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

pub fn make_transform(params: &AlignmentParams, traj: &CameraTrajectory) -> Result<WorldTransform, AlignError> {
    let level = leveling_rotation(&traj.gravity());
    let ls = level * traj.first().position;
    let le = level * traj.last().position;

    let local_chord = le.xy() - ls.xy();
    let world_chord = params.v_e.xy() - params.v_s.xy();
    if local_chord.norm() == 0.0 {
        return Err(AlignError::ZeroChord("local"));
    }
    if world_chord.norm() == 0.0 || !world_chord.norm().is_finite() {
        return Err(AlignError::ZeroChord("world"));
    }

    let scale = world_chord.norm() / local_chord.norm();
    let yaw = wrap_angle(world_chord.y.atan2(world_chord.x) - local_chord.y.atan2(local_chord.x) + params.lambda);
    let rot = yaw_rotation(yaw);
    let translation = params.v_s - rot * ls * scale;
    let end_z = (rot * le * scale + translation).z;

    Ok(WorldTransform {
        yaw,
        scale,
        translation,
        z0: 0.0,
        z1: params.v_e.z - end_z,
        level,
        arc: arc_fractions(traj, &level),
    })
}
