//! Scene manifest: the JSON entry point of an exported bundle.
//!
//! Layout of an export directory:
//!
//! ```text
//! manifest.json
//! scene.glb
//! scene.buildings.json
//! frames/frame_<id>.jpg
//! ```
//!
//! All world coordinates are full-precision meters; the mesh stores offsets
//! from `mesh.origin`.

use std::path::Path;

use nalgebra::Quaternion;
use serde::{Deserialize, Serialize};

use super::{write_glb, ExportError};
use crate::alignment::{AlignmentOutcome, AlignmentParams};
use crate::citymodel::CityMesh;
use crate::flood::EvacuationScenario;
use crate::geom::{Quat, Vec3};
use crate::Error;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const FRAME_PATTERN: &str = "frame_{id}.jpg";

pub fn frame_file_name(id: u64) -> String {
    format!("frame_{id}.jpg")
}

/// A keyframe camera in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldKeyframe {
    pub id: u64,
    pub video_time: f64,
    pub position: Vec3,
    pub orientation: Quat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSummary {
    pub ground: f64,
    pub point: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentProvenance {
    pub v_s: [f64; 3],
    pub v_e: [f64; 3],
    pub lambda: f64,
    pub loss: LossSummary,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRef {
    pub glb: String,
    pub sidecar: String,
    pub origin: [f64; 3],
    pub up_axis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestKeyframe {
    pub id: u64,
    pub video_time: f64,
    pub position: [f64; 3],
    /// Camera-to-world rotation as `[w, x, y, z]`.
    pub orientation: [f64; 4],
    /// Frame image path relative to the manifest.
    pub frame: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub generator: String,
    pub mesh: MeshRef,
    pub frames_dir: String,
    pub frame_pattern: String,
    pub trajectory: Vec<ManifestKeyframe>,
    pub scenario: Option<EvacuationScenario>,
    pub alignment: Option<AlignmentProvenance>,
}

impl SceneManifest {
    pub fn world_trajectory(&self) -> Vec<WorldKeyframe> {
        self.trajectory
            .iter()
            .map(|k| {
                let [w, x, y, z] = k.orientation;
                WorldKeyframe {
                    id: k.id,
                    video_time: k.video_time,
                    position: Vec3::from(k.position),
                    orientation: Quat::new_unchecked(Quaternion::new(w, x, y, z)),
                }
            })
            .collect()
    }

    fn check(&self, dir: &Path) -> Result<(), ExportError> {
        let bad = |m: String| Err(ExportError::Manifest(m));
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return bad(format!("unsupported schema version {}", self.schema_version));
        }
        if self.trajectory.is_empty() {
            return bad("trajectory is empty".into());
        }
        if self.trajectory.windows(2).any(|w| w[1].id <= w[0].id) {
            return bad("keyframe ids must increase".into());
        }
        for k in &self.trajectory {
            let expected = format!("{}/{}", self.frames_dir, frame_file_name(k.id));
            if k.frame != expected {
                return bad(format!("keyframe {} references {}, expected {expected}", k.id, k.frame));
            }
            let n = k.orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !((n - 1.0).abs() <= 1e-9) || !k.position.iter().all(|v| v.is_finite()) {
                return bad(format!("keyframe {} has an invalid pose", k.id));
            }
        }
        let files = [&self.mesh.glb, &self.mesh.sidecar]
            .into_iter()
            .chain(self.trajectory.iter().map(|k| &k.frame));
        for f in files {
            if !dir.join(f).is_file() {
                return bad(format!("referenced file {f} does not exist"));
            }
        }
        Ok(())
    }
}

/// Write a scene bundle into `out_dir`: the mesh as GLB plus sidecar,
/// copies of `frames_dir/frame_<id>.jpg` for every keyframe, and
/// `manifest.json`. Every frame is checked before anything is written.
pub fn export_scene(
    out_dir: &Path,
    mesh: &CityMesh,
    traj_world: &[WorldKeyframe],
    frames_dir: &Path,
    scenario: Option<&EvacuationScenario>,
    alignment: Option<&AlignmentProvenance>,
) -> Result<SceneManifest, Error> {
    if traj_world.is_empty() {
        return Err(ExportError::EmptyTrajectory.into());
    }
    for k in traj_world {
        let path = frames_dir.join(frame_file_name(k.id));
        if !path.is_file() {
            return Err(ExportError::MissingFrame { id: k.id, path }.into());
        }
    }

    let frames_out = out_dir.join("frames");
    std::fs::create_dir_all(&frames_out).map_err(|e| Error::io(&frames_out, e))?;
    for k in traj_world {
        let from = frames_dir.join(frame_file_name(k.id));
        let to = frames_out.join(frame_file_name(k.id));
        std::fs::copy(&from, &to).map_err(|e| Error::io(&from, e))?;
    }

    let sidecar = write_glb(&out_dir.join("scene.glb"), mesh)?;
    crate::json::write_file(&out_dir.join("scene.buildings.json"), &sidecar)?;

    let manifest = SceneManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        generator: concat!("floodwalk ", env!("CARGO_PKG_VERSION")).to_string(),
        mesh: MeshRef {
            glb: "scene.glb".into(),
            sidecar: "scene.buildings.json".into(),
            origin: sidecar.origin,
            up_axis: sidecar.up_axis.into(),
        },
        frames_dir: "frames".into(),
        frame_pattern: FRAME_PATTERN.into(),
        trajectory: traj_world
            .iter()
            .map(|k| ManifestKeyframe {
                id: k.id,
                video_time: k.video_time,
                position: k.position.into(),
                orientation: crate::synth::quat_wxyz(&k.orientation),
                frame: format!("frames/{}", frame_file_name(k.id)),
            })
            .collect(),
        scenario: scenario.cloned(),
        alignment: alignment.cloned(),
    };
    crate::json::write_file(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Read and validate a manifest, including that every file it references
/// exists next to it.
pub fn load_manifest(path: &Path) -> Result<SceneManifest, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: SceneManifest =
        serde_json::from_str(&text).map_err(|e| ExportError::Manifest(format!("{}: {e}", path.display())))?;
    manifest.check(path.parent().unwrap_or(Path::new(".")))?;
    Ok(manifest)
}

/// Output of `align`: the optimized parameters, their loss and the
/// best-so-far loss after the initial evaluation and each generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentResult {
    pub v_s: [f64; 3],
    pub v_e: [f64; 3],
    pub lambda: f64,
    pub loss: LossSummary,
    pub history: Vec<f64>,
}

impl AlignmentResult {
    pub fn from_outcome(o: &AlignmentOutcome) -> Self {
        AlignmentResult {
            v_s: o.params.v_s.into(),
            v_e: o.params.v_e.into(),
            lambda: o.params.lambda,
            loss: LossSummary {
                ground: o.loss.ground,
                point: o.loss.point,
                total: o.loss.total,
            },
            history: o.history.clone(),
        }
    }

    pub fn params(&self) -> AlignmentParams {
        AlignmentParams::new(Vec3::from(self.v_s), Vec3::from(self.v_e), self.lambda)
    }

    pub fn provenance(&self) -> AlignmentProvenance {
        AlignmentProvenance {
            v_s: self.v_s,
            v_e: self.v_e,
            lambda: self.lambda,
            loss: self.loss,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

pub fn load_alignment_result(path: &Path) -> Result<AlignmentResult, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r: AlignmentResult =
        serde_json::from_str(&text).map_err(|e| ExportError::AlignmentResult(format!("{}: {e}", path.display())))?;
    r.params()
        .validate()
        .map_err(|e| ExportError::AlignmentResult(format!("{}: {e}", path.display())))?;
    Ok(r)
}
