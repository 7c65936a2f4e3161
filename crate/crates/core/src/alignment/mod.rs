//! Seven-parameter alignment of a SLAM trajectory to the city model.

mod frames;
mod loss;
mod optimize;
mod transform;

use serde::Serialize;

pub use frames::sample_frames;
pub use loss::{
    filter_building_points, ground_loss, ground_tally, point_loss, point_tally, GroundTally, LossWeights, PointTally,
};
pub(crate) use loss::point_residual;
pub use optimize::{align, align_levels, AlignConfig, AlignLevel, AlignmentOutcome, AlignmentProblem, LossReport};
pub use transform::{arc_fractions, make_transform, AlignmentParams, WorldTransform, MIN_CHORD};

use crate::geom::wrap_angle;
use crate::ingest::CameraTrajectory;

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("invalid alignment parameters: {0}")]
    InvalidParams(String),
    #[error("{0} horizontal chord has zero length")]
    ZeroChord(&'static str),
    #[error("mask is {mask:?} but render is {render:?}")]
    SizeMismatch { mask: (usize, usize), render: (usize, usize) },
    #[error("{masks} masks for {renders} renders")]
    FrameCount { masks: usize, renders: usize },
    #[error("no mask for sampled keyframe {0}")]
    MissingMask(u64),
    #[error("invalid alignment configuration: {0}")]
    Config(String),
    #[error("loss diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Optimizer(#[from] crate::cmaes::CmaError),
}

/// Disagreement between two transforms over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryError {
    /// Mean world distance between corresponding keyframe positions.
    pub mean_position: f64,
    pub max_position: f64,
    /// Absolute yaw difference, radians in `[0, pi]`.
    pub yaw: f64,
}

pub fn trajectory_error(traj: &CameraTrajectory, a: &WorldTransform, b: &WorldTransform) -> TrajectoryError {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (i, kf) in traj.keyframes().iter().enumerate() {
        let d = (a.apply(&kf.position, a.arc_fraction(i)) - b.apply(&kf.position, b.arc_fraction(i))).norm();
        sum += d;
        max = max.max(d);
    }
    TrajectoryError {
        mean_position: sum / traj.len() as f64,
        max_position: max,
        yaw: wrap_angle(a.yaw - b.yaw).abs(),
    }
}
