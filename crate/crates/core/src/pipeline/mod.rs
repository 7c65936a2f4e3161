//! Command-line orchestration and export of the viewer scene bundle.

mod cli;
mod config;
mod glb;
mod manifest;

use std::path::PathBuf;

pub use cli::run;
pub use config::{load_config, RunConfig};
pub use glb::{glb_origin, write_glb, GlbSidecar, SidecarBuilding};
pub use manifest::{
    export_scene, frame_file_name, load_alignment_result, load_manifest, AlignmentProvenance, AlignmentResult,
    LossSummary, ManifestKeyframe, MeshRef, SceneManifest, WorldKeyframe, FRAME_PATTERN, MANIFEST_SCHEMA_VERSION,
};

use crate::geom::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("no frame image for keyframe {id} at {}", path.display())]
    MissingFrame { id: u64, path: PathBuf },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid alignment result: {0}")]
    AlignmentResult(String),
}

/// Keyframe whose camera is horizontally nearest to `avatar`; ties go to the
/// lower id.
pub fn nearest_camera(traj_world: &[WorldKeyframe], avatar: Vec2) -> Result<u64, ExportError> {
    traj_world
        .iter()
        .map(|k| ((k.position.xy() - avatar).norm_squared(), k.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or(ExportError::EmptyTrajectory)
}
