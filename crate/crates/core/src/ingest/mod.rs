//! Parsers and validated domain types for every external input.
//!
//! All loaders are pure: they read one file (or one directory of masks) and
//! either return a value whose invariants hold or an [`IngestError`].

mod dem;
mod endpoints;
mod footprints;
mod masks;
mod slam;

use std::path::PathBuf;

pub use dem::{load_dem, parse_dem, write_dem, DemGrid};
pub use endpoints::{load_endpoints, write_endpoints, MapEndpoints};
pub use footprints::{load_footprints, parse_footprints, write_footprints, Footprint, FootprintOptions, FootprintSet};
pub use masks::{load_mask, load_masks, write_indexed_png, write_mask, MaskLabel, SegMask, MASK_PALETTE};
pub use slam::{load_slam, parse_slam, write_slam, CameraTrajectory, Keyframe, SlamPoint, SlamPointCloud};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("coordinates look geographic (all magnitudes < 360); reproject to a metric CRS or pass the geographic override")]
    GeographicCoordinates,
    #[error("footprint {id}: ring has fewer than 3 distinct vertices")]
    DegenerateRing { id: String },
    #[error("footprint {id}: polygon self-intersects")]
    SelfIntersection { id: String },
    #[error("footprint {id}: hole lies outside the exterior ring")]
    HoleOutside { id: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("malformed DEM header: {0}")]
    DemHeader(String),
    #[error("DEM has {found} values, expected {expected}")]
    DemValueCount { expected: usize, found: usize },
    #[error("invalid DEM: {0}")]
    DemInvalid(String),
    #[error("invalid SLAM document: {0}")]
    Slam(String),
    #[error("keyframe {id}: quaternion norm {norm} is not within 1e-3 of 1")]
    NonUnitQuaternion { id: u64, norm: f64 },
    #[error("point {index} references unknown keyframe {keyframe}")]
    DanglingKeyframe { index: usize, keyframe: u64 },
    #[error("mask for keyframe {id} not found at {path}")]
    MaskMissing { id: u64, path: PathBuf },
    #[error("mask {width}x{height} is not 2:1 equirectangular")]
    MaskAspect { width: usize, height: usize },
    #[error("mask contains unknown label index {value}")]
    MaskLabel { value: u8 },
    #[error("unsupported mask PNG: {0}")]
    MaskFormat(String),
    #[error("mask for keyframe {id} is {found:?}, expected {expected:?}")]
    MaskSizeMismatch {
        id: u64,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid endpoints: {0}")]
    Endpoints(String),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))
}
