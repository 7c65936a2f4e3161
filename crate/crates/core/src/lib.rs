//! Footprint-extruded 3D city models aligned to 360° walkthrough video.
//!
//! The crate covers the whole offline side of a flood-evacuation walkthrough:
//!
//! * [`ingest`] parses footprints, DEM grids, SLAM trajectories and
//!   segmentation masks into validated domain types.
//! * [`citymodel`] turns a DEM and footprints into a labeled triangle mesh
//!   and answers ray queries against it.
//! * [`spherical`] is the equirectangular camera model and label renderer.
//! * [`alignment`] registers a local SLAM trajectory to the city model by
//!   minimizing a ground-region loss and a point distance loss with
//!   [`cmaes`].
//! * [`flood`] holds the flood surface and the evacuation scenario rules.
//! * [`pipeline`] wires everything into the CLI and exports viewer scenes.
//! * [`synth`] generates synthetic scenes with known ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod citymodel;
pub mod cmaes;
mod error;
pub mod flood;
pub mod geom;
pub mod golden;
pub mod ingest;
pub mod json;
pub mod pipeline;
pub mod spherical;
pub mod synth;

pub use error::{Error, ErrorKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;
