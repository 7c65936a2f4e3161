//! Labeled terrain + extruded-building mesh and ray queries against it.

mod bvh;
mod extrude;
mod terrain;
mod triangulate;

pub use bvh::{build_accel, RayAccel, RayHit, SELF_HIT_EPSILON};
pub use extrude::{build_city_model, extrude_footprint, extrude_footprints, prism_base, ExtrudeOutput, SkippedFootprint, BASE_EMBED, DEFAULT_HEIGHT};
pub use terrain::{build_terrain, terrain_elevation};
pub use triangulate::triangulate_polygon;

use crate::geom::Vec3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("({x}, {y}) lies outside the DEM cell-center hull")]
    OutOfBounds { x: f64, y: f64 },
    #[error("({x}, {y}) touches a nodata cell")]
    Nodata { x: f64, y: f64 },
    #[error("footprint {id} extends outside the DEM")]
    FootprintOutsideDem { id: String },
    #[error("footprint {id} could not be triangulated")]
    Triangulation { id: String },
    #[error("cannot build a ray accelerator over an empty mesh")]
    EmptyMesh,
    #[error("ray direction has norm {norm}, expected 1")]
    NonUnitDirection { norm: f64 },
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceLabel {
    Ground,
    Building,
}

/// Triangle soup with a surface label per triangle.
///
/// Building triangles reference an entry of `building_ids`; ground
/// triangles reference none.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CityMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    labels: Vec<SurfaceLabel>,
    tri_building: Vec<Option<u32>>,
    building_ids: Vec<String>,
}

impl CityMesh {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from raw arrays, checking every invariant.
    pub fn from_parts(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        labels: Vec<SurfaceLabel>,
        tri_building: Vec<Option<u32>>,
        building_ids: Vec<String>,
    ) -> Result<Self, MeshError> {
        let mesh = CityMesh {
            vertices,
            triangles,
            labels,
            tri_building,
            building_ids,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.triangles.len();
        if self.labels.len() != n || self.tri_building.len() != n {
            return Err(MeshError::Invalid("per-triangle arrays differ in length".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= self.vertices.len()) {
                return Err(MeshError::Invalid(format!("triangle {t} index out of range")));
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(MeshError::Invalid(format!("triangle {t} is degenerate")));
            }
            match (self.labels[t], self.tri_building[t]) {
                (SurfaceLabel::Ground, None) => {}
                (SurfaceLabel::Building, Some(b)) if (b as usize) < self.building_ids.len() => {}
                _ => return Err(MeshError::Invalid(format!("triangle {t} label/building mismatch"))),
            }
        }
        Ok(())
    }

    pub fn push_vertex(&mut self, v: Vec3) -> u32 {
        self.vertices.push(v);
        (self.vertices.len() - 1) as u32
    }

    pub fn add_building(&mut self, id: impl Into<String>) -> u32 {
        self.building_ids.push(id.into());
        (self.building_ids.len() - 1) as u32
    }

    pub(crate) fn push_triangle(&mut self, tri: [u32; 3], label: SurfaceLabel, building: Option<u32>) {
        self.triangles.push(tri);
        self.labels.push(label);
        self.tri_building.push(building);
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn labels(&self) -> &[SurfaceLabel] {
        &self.labels
    }

    pub fn building_ids(&self) -> &[String] {
        &self.building_ids
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn label(&self, tri: usize) -> SurfaceLabel {
        self.labels[tri]
    }

    /// Footprint id of a building triangle.
    pub fn building_of(&self, tri: usize) -> Option<&str> {
        self.tri_building[tri].map(|b| self.building_ids[b as usize].as_str())
    }

    pub fn building_index(&self, tri: usize) -> Option<u32> {
        self.tri_building[tri]
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        self.triangles[tri].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

/// Concatenate meshes, reindexing vertices and building ids.
pub fn merge(parts: &[CityMesh]) -> CityMesh {
    let mut out = CityMesh::new();
    for part in parts {
        let vbase = out.vertices.len() as u32;
        let bbase = out.building_ids.len() as u32;
        out.vertices.extend_from_slice(&part.vertices);
        out.building_ids.extend(part.building_ids.iter().cloned());
        out.triangles
            .extend(part.triangles.iter().map(|t| t.map(|i| i + vbase)));
        out.labels.extend_from_slice(&part.labels);
        out.tri_building
            .extend(part.tri_building.iter().map(|b| b.map(|b| b + bbase)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_triangle(label: SurfaceLabel) -> CityMesh {
        let mut m = CityMesh::new();
        let b = (label == SurfaceLabel::Building).then(|| m.add_building("b"));
        let a = m.push_vertex(Vec3::new(0.0, 0.0, 0.0));
        let bb = m.push_vertex(Vec3::new(1.0, 0.0, 0.0));
        let c = m.push_vertex(Vec3::new(0.0, 1.0, 0.0));
        m.push_triangle([a, bb, c], label, b);
        m
    }

    #[test]
    fn merge_empty_and_identity() {
        assert!(merge(&[]).is_empty());
        let t = one_triangle(SurfaceLabel::Ground);
        assert_eq!(merge(std::slice::from_ref(&t)), t);
    }

    #[test]
    fn merge_reindexes() {
        let a = one_triangle(SurfaceLabel::Ground);
        let b = one_triangle(SurfaceLabel::Building);
        let m = merge(&[a.clone(), b.clone()]);
        assert_eq!(m.triangle_count(), a.triangle_count() + b.triangle_count());
        assert_eq!(m.triangles()[1], [3, 4, 5]);
        assert_eq!(m.building_of(1), Some("b"));
        assert_eq!(m.building_of(0), None);
        m.validate().unwrap();
    }

    #[test]
    fn validate_catches_bad_meshes() {
        let degenerate = CityMesh::from_parts(
            vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            vec![[0, 1, 2]],
            vec![SurfaceLabel::Ground],
            vec![None],
            vec![],
        );
        assert!(degenerate.is_err());
        let unlabeled_building = CityMesh::from_parts(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
            vec![SurfaceLabel::Building],
            vec![None],
            vec![],
        );
        assert!(unlabeled_building.is_err());
    }
}
