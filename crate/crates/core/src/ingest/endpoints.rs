use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, DemGrid, IngestError};
use crate::geom::Vec2;

/// Map-annotated start and end of a walkthrough video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapEndpoints {
    pub start: Vec2,
    pub end: Vec2,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointsDoc {
    start: [f64; 2],
    end: [f64; 2],
}

impl MapEndpoints {
    pub fn new(start: Vec2, end: Vec2) -> Result<Self, IngestError> {
        if !start.iter().chain(end.iter()).all(|v| v.is_finite()) {
            return Err(IngestError::NonFinite("endpoints".into()));
        }
        if start == end {
            return Err(IngestError::Endpoints("start and end coincide".into()));
        }
        Ok(MapEndpoints { start, end })
    }

    pub fn check_within(&self, dem: &DemGrid) -> Result<(), IngestError> {
        for (name, p) in [("start", self.start), ("end", self.end)] {
            if !dem.contains(p.x, p.y) {
                return Err(IngestError::Endpoints(format!("{name} ({}, {}) lies outside the DEM", p.x, p.y)));
            }
        }
        Ok(())
    }
}

pub fn load_endpoints(path: &Path) -> Result<MapEndpoints, IngestError> {
    let doc: EndpointsDoc =
        serde_json::from_str(&read_text(path)?).map_err(|e| IngestError::Endpoints(e.to_string()))?;
    MapEndpoints::new(Vec2::from(doc.start), Vec2::from(doc.end))
}

pub fn write_endpoints(path: &Path, ep: &MapEndpoints) -> Result<(), crate::Error> {
    let doc = EndpointsDoc {
        start: ep.start.into(),
        end: ep.end.into(),
    };
    crate::json::write_file(path, &doc)
}
