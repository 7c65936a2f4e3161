use std::path::PathBuf;

use crate::alignment::AlignError;
use crate::citymodel::MeshError;
use crate::cmaes::CmaError;
use crate::flood::FloodError;
use crate::ingest::IngestError;
use crate::pipeline::ExportError;
use crate::spherical::ProjectionError;

/// Whether a failure was caused by bad input or by the run itself.
///
/// The CLI maps these onto exit codes 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Cma(#[from] CmaError),
    #[error(transparent)]
    Flood(#[from] FloodError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Ingest(e) if e.is_io() => ErrorKind::Runtime,
            Error::Ingest(_) | Error::Config(_) | Error::Flood(_) => ErrorKind::Validation,
            Error::Projection(_) | Error::Mesh(_) => ErrorKind::Validation,
            Error::Align(AlignError::Divergence { .. }) => ErrorKind::Runtime,
            Error::Align(_) => ErrorKind::Validation,
            Error::Export(ExportError::MissingFrame { .. }) => ErrorKind::Validation,
            Error::Export(_) | Error::Cma(_) | Error::Io { .. } => ErrorKind::Runtime,
        }
    }
}
