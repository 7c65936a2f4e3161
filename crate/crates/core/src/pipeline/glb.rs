//! Binary glTF export of the city mesh.
//!
//! Positions are float32 offsets from an integer-meter origin, mapped to
//! glTF's y-up frame as `(x, z, -y)`. Ground and building triangles are two
//! primitives of one mesh; building triangles are grouped by footprint and
//! the sidecar JSON lists each footprint's triangle range.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::ExportError;
use crate::citymodel::{CityMesh, SurfaceLabel};
use crate::geom::Vec3;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SidecarBuilding {
    pub id: String,
    /// Range in the building primitive, in triangles.
    pub first_triangle: usize,
    pub triangle_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlbSidecar {
    pub origin: [f64; 3],
    pub up_axis: &'static str,
    pub ground_triangles: usize,
    pub building_triangles: usize,
    pub buildings: Vec<SidecarBuilding>,
}

/// Whole-meter point at or below every vertex.
pub fn glb_origin(mesh: &CityMesh) -> Vec3 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    for v in mesh.vertices() {
        lo = lo.inf(v);
    }
    lo.map(f64::floor)
}

fn pad(buf: &mut Vec<u8>, byte: u8) {
    while !buf.len().is_multiple_of(4) {
        buf.push(byte);
    }
}

/// Write `mesh` to `path` and return the sidecar describing it.
pub fn write_glb(path: &Path, mesh: &CityMesh) -> Result<GlbSidecar, Error> {
    if mesh.is_empty() {
        return Err(ExportError::EmptyMesh.into());
    }
    let origin = glb_origin(mesh);

    let mut positions = Vec::with_capacity(mesh.vertices().len() * 12);
    let mut min = [f32::INFINITY; 3];
    let mut max = [f32::NEG_INFINITY; 3];
    for v in mesh.vertices() {
        let d = v - origin;
        let p = [d.x as f32, d.z as f32, -d.y as f32];
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
            positions.extend_from_slice(&p[k].to_le_bytes());
        }
    }

    let mut ground = Vec::new();
    let mut building: Vec<(u32, usize)> = Vec::new();
    for t in 0..mesh.triangle_count() {
        match mesh.label(t) {
            SurfaceLabel::Ground => ground.push(t),
            SurfaceLabel::Building => building.push((mesh.building_index(t).unwrap_or(u32::MAX), t)),
        }
    }
    // Stable sort keeps each footprint's triangles in mesh order.
    building.sort_by_key(|&(b, _)| b);

    let mut buildings: Vec<SidecarBuilding> = Vec::new();
    for (k, &(b, _)) in building.iter().enumerate() {
        let id = mesh.building_ids().get(b as usize).cloned().unwrap_or_default();
        match buildings.last_mut() {
            Some(last) if last.id == id && last.first_triangle + last.triangle_count == k => last.triangle_count += 1,
            _ => buildings.push(SidecarBuilding {
                id,
                first_triangle: k,
                triangle_count: 1,
            }),
        }
    }

    let index_bytes = |tris: &mut dyn Iterator<Item = usize>| -> Vec<u8> {
        tris.flat_map(|t| mesh.triangles()[t])
            .flat_map(|i| i.to_le_bytes())
            .collect()
    };
    let ground_idx = index_bytes(&mut ground.iter().copied());
    let building_idx = index_bytes(&mut building.iter().map(|&(_, t)| t));

    let mut bin = positions;
    let pos_len = bin.len();
    let ground_off = bin.len();
    bin.extend_from_slice(&ground_idx);
    let building_off = bin.len();
    bin.extend_from_slice(&building_idx);
    pad(&mut bin, 0);

    let mut views = vec![json!({"buffer": 0, "byteOffset": 0, "byteLength": pos_len, "target": 34962})];
    let mut accessors = vec![json!({
        "bufferView": 0, "componentType": 5126, "count": mesh.vertices().len(),
        "type": "VEC3", "min": min, "max": max,
    })];
    let mut primitives = Vec::new();
    for (material, offset, bytes) in [(0, ground_off, &ground_idx), (1, building_off, &building_idx)] {
        if bytes.is_empty() {
            continue;
        }
        views.push(json!({"buffer": 0, "byteOffset": offset, "byteLength": bytes.len(), "target": 34963}));
        accessors.push(json!({
            "bufferView": views.len() - 1, "componentType": 5125, "count": bytes.len() / 4, "type": "SCALAR",
        }));
        primitives.push(json!({
            "attributes": {"POSITION": 0}, "indices": accessors.len() - 1, "material": material, "mode": 4,
        }));
    }
    let doc = json!({
        "asset": {"version": "2.0", "generator": concat!("floodwalk ", env!("CARGO_PKG_VERSION"))},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0, "name": "city"}],
        "meshes": [{"name": "city", "primitives": primitives}],
        "materials": [
            {"name": "ground", "doubleSided": true, "pbrMetallicRoughness": {"baseColorFactor": [0.5, 0.5, 0.5, 1.0], "metallicFactor": 0.0}},
            {"name": "building", "doubleSided": true, "pbrMetallicRoughness": {"baseColorFactor": [0.85, 0.85, 0.8, 1.0], "metallicFactor": 0.0}},
        ],
        "buffers": [{"byteLength": bin.len()}],
        "bufferViews": views,
        "accessors": accessors,
        "extras": {"origin": [origin.x, origin.y, origin.z]},
    });
    let mut json_bytes = serde_json::to_vec(&doc).expect("glTF JSON serializes");
    pad(&mut json_bytes, b' ');

    let total = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(b"glTF");
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(b"JSON");
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(b"BIN\0");
    out.extend_from_slice(&bin);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))?;

    Ok(GlbSidecar {
        origin: origin.into(),
        up_axis: "y",
        ground_triangles: ground.len(),
        building_triangles: building.len(),
        buildings,
    })
}
