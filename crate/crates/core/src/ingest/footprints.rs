use std::path::Path;

use serde_json::{json, Value};

use super::{read_text, IngestError};
use crate::geom::{point_in_ring, polygon_self_intersects, signed_area2, Vec2};

/// One building outline in a projected metric CRS.
///
/// Rings are stored open (first vertex not repeated). The exterior winds
/// counter-clockwise and holes clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub id: String,
    pub exterior: Vec<Vec2>,
    pub holes: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FootprintSet {
    pub footprints: Vec<Footprint>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FootprintOptions {
    /// Accept inputs whose coordinates all look like degrees.
    pub allow_geographic: bool,
}

impl Footprint {
    /// Normalize and validate one polygon: strips closing and repeated
    /// vertices, fixes winding, and rejects degenerate or self-intersecting
    /// rings.
    pub fn new(id: impl Into<String>, exterior: Vec<Vec2>, holes: Vec<Vec<Vec2>>) -> Result<Self, IngestError> {
        let id = id.into();
        let exterior = normalize_ring(&id, exterior, true)?;
        let holes = holes
            .into_iter()
            .map(|h| normalize_ring(&id, h, false))
            .collect::<Result<Vec<_>, _>>()?;
        if polygon_self_intersects(&exterior, &holes) {
            return Err(IngestError::SelfIntersection { id });
        }
        if holes.iter().any(|h| !point_in_ring(h[0], &exterior)) {
            return Err(IngestError::HoleOutside { id });
        }
        Ok(Footprint { id, exterior, holes })
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vec2> {
        self.exterior.iter().chain(self.holes.iter().flatten())
    }

    pub fn area(&self) -> f64 {
        crate::geom::polygon_area(&self.exterior, &self.holes)
    }
}

fn normalize_ring(id: &str, mut ring: Vec<Vec2>, ccw: bool) -> Result<Vec<Vec2>, IngestError> {
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(IngestError::NonFinite(format!("footprint {id}")));
    }
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(IngestError::DegenerateRing { id: id.to_string() });
    }
    let area2 = signed_area2(&ring);
    if area2 == 0.0 {
        return Err(IngestError::DegenerateRing { id: id.to_string() });
    }
    if (area2 > 0.0) != ccw {
        ring.reverse();
    }
    Ok(ring)
}

pub fn load_footprints(path: &Path, opts: FootprintOptions) -> Result<FootprintSet, IngestError> {
    parse_footprints(&read_text(path)?, opts)
}

pub fn parse_footprints(text: &str, opts: FootprintOptions) -> Result<FootprintSet, IngestError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IngestError::Parse("expected a GeoJSON FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Parse("FeatureCollection without features".into()))?;

    let mut footprints = Vec::new();
    for (index, feature) in features.iter().enumerate() {
        let id = feature_id(feature, index);
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| IngestError::Parse(format!("feature {id} has no geometry")))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| IngestError::Parse(format!("feature {id} has no coordinates")))?;
        match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => footprints.push(polygon(&id, coords)?),
            Some("MultiPolygon") => {
                let parts = coords
                    .as_array()
                    .ok_or_else(|| IngestError::Parse(format!("feature {id}: bad MultiPolygon")))?;
                for (k, part) in parts.iter().enumerate() {
                    footprints.push(polygon(&format!("{id}-{k}"), part)?);
                }
            }
            other => {
                return Err(IngestError::Parse(format!(
                    "feature {id}: unsupported geometry type {other:?}"
                )))
            }
        }
    }

    let all_small = footprints.iter().flat_map(|f| f.vertices()).all(|p| p.x.abs() < 360.0 && p.y.abs() < 360.0);
    if !footprints.is_empty() && all_small && !opts.allow_geographic {
        return Err(IngestError::GeographicCoordinates);
    }
    Ok(FootprintSet { footprints })
}

fn feature_id(feature: &Value, index: usize) -> String {
    let id = feature
        .get("id")
        .or_else(|| feature.get("properties").and_then(|p| p.get("id")));
    match id {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("f{index}"),
    }
}

fn polygon(id: &str, coords: &Value) -> Result<Footprint, IngestError> {
    let rings = coords
        .as_array()
        .ok_or_else(|| IngestError::Parse(format!("feature {id}: polygon is not an array of rings")))?;
    let mut parsed = rings.iter().map(|r| ring(id, r));
    let exterior = parsed
        .next()
        .ok_or_else(|| IngestError::DegenerateRing { id: id.to_string() })??;
    let holes = parsed.collect::<Result<Vec<_>, _>>()?;
    Footprint::new(id, exterior, holes)
}

fn ring(id: &str, value: &Value) -> Result<Vec<Vec2>, IngestError> {
    let bad = || IngestError::Parse(format!("feature {id}: malformed ring"));
    value
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|pos| {
            let pos = pos.as_array().ok_or_else(bad)?;
            match (pos.first().and_then(Value::as_f64), pos.get(1).and_then(Value::as_f64)) {
                (Some(x), Some(y)) => Ok(Vec2::new(x, y)),
                _ => Err(bad()),
            }
        })
        .collect()
}

fn ring_json(ring: &[Vec2]) -> Value {
    let mut coords: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    coords.push(json!([ring[0].x, ring[0].y]));
    Value::Array(coords)
}

pub fn footprints_to_geojson(set: &FootprintSet) -> Value {
    let features: Vec<Value> = set
        .footprints
        .iter()
        .map(|f| {
            let rings: Vec<Value> = std::iter::once(ring_json(&f.exterior))
                .chain(f.holes.iter().map(|h| ring_json(h)))
                .collect();
            json!({
                "type": "Feature",
                "id": f.id,
                "properties": {},
                "geometry": {"type": "Polygon", "coordinates": rings},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_footprints(path: &Path, set: &FootprintSet) -> Result<(), crate::Error> {
    crate::json::write_file(path, &footprints_to_geojson(set))
}
