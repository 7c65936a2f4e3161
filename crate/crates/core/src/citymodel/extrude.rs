use rayon::prelude::*;

use super::{merge, terrain_elevation, triangulate_polygon, CityMesh, MeshError, SurfaceLabel};
use crate::geom::{point_in_polygon, Vec2, Vec3};
use crate::ingest::{DemGrid, Footprint, FootprintSet};

/// Building height above the embedded base, in meters.
pub const DEFAULT_HEIGHT: f64 = 20.0;
/// Depth the prism base is sunk below the lowest terrain contact.
pub const BASE_EMBED: f64 = 1.0;
/// Pitch of the interior terrain scan used to find the lowest contact.
const INTERIOR_PITCH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedFootprint {
    pub id: String,
    pub reason: MeshError,
}

#[derive(Debug, Clone, Default)]
pub struct ExtrudeOutput {
    pub mesh: CityMesh,
    pub skipped: Vec<SkippedFootprint>,
}

/// Lowest terrain under the footprint minus the embed depth.
pub fn prism_base(fp: &Footprint, dem: &DemGrid) -> Result<f64, MeshError> {
    if fp.vertices().any(|p| !dem.contains(p.x, p.y)) {
        return Err(MeshError::FootprintOutsideDem { id: fp.id.clone() });
    }
    let mut lowest = f64::INFINITY;
    for p in fp.vertices() {
        lowest = lowest.min(terrain_elevation(dem, p.x, p.y)?);
    }

    let (min, max) = fp.exterior.iter().fold(
        (Vec2::repeat(f64::MAX), Vec2::repeat(f64::MIN)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let nx = ((max.x - min.x) / INTERIOR_PITCH).floor() as usize;
    let ny = ((max.y - min.y) / INTERIOR_PITCH).floor() as usize;
    for j in 0..=ny {
        for i in 0..=nx {
            let p = min + Vec2::new(i as f64, j as f64) * INTERIOR_PITCH;
            if point_in_polygon(p, &fp.exterior, &fp.holes) {
                lowest = lowest.min(terrain_elevation(dem, p.x, p.y)?);
            }
        }
    }
    Ok(lowest - BASE_EMBED)
}

/// Closed prism for one footprint: walls for every ring edge plus top and
/// bottom caps, all labeled with the footprint id.
pub fn extrude_footprint(fp: &Footprint, dem: &DemGrid, height: f64) -> Result<CityMesh, MeshError> {
    let z_base = prism_base(fp, dem)?;
    let z_top = z_base + BASE_EMBED + height;
    let caps = triangulate_polygon(&fp.exterior, &fp.holes).ok_or_else(|| MeshError::Triangulation { id: fp.id.clone() })?;

    let mut mesh = CityMesh::new();
    let b = mesh.add_building(fp.id.clone());
    let ring_pts: Vec<Vec2> = fp.vertices().copied().collect();
    let bottom: Vec<u32> = ring_pts.iter().map(|p| mesh.push_vertex(Vec3::new(p.x, p.y, z_base))).collect();
    let top: Vec<u32> = ring_pts.iter().map(|p| mesh.push_vertex(Vec3::new(p.x, p.y, z_top))).collect();

    let building = SurfaceLabel::Building;
    for t in &caps {
        mesh.push_triangle([top[t[0]], top[t[1]], top[t[2]]], building, Some(b));
        mesh.push_triangle([bottom[t[0]], bottom[t[2]], bottom[t[1]]], building, Some(b));
    }

    // Exterior runs CCW and holes CW, so the solid is always on the left of
    // each edge and (a, b, up) faces outwards.
    let mut offset = 0;
    for ring in std::iter::once(&fp.exterior).chain(fp.holes.iter()) {
        let n = ring.len();
        for k in 0..n {
            let a = offset + k;
            let c = offset + (k + 1) % n;
            mesh.push_triangle([bottom[a], bottom[c], top[c]], building, Some(b));
            mesh.push_triangle([bottom[a], top[c], top[a]], building, Some(b));
        }
        offset += n;
    }
    Ok(mesh)
}

/// Extrude every footprint. Footprints that fail are skipped and reported;
/// the rest are merged in input order.
pub fn extrude_footprints(set: &FootprintSet, dem: &DemGrid, height: f64) -> ExtrudeOutput {
    let results: Vec<Result<CityMesh, MeshError>> =
        set.footprints.par_iter().map(|fp| extrude_footprint(fp, dem, height)).collect();
    let mut parts = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (fp, result) in set.footprints.iter().zip(results) {
        match result {
            Ok(mesh) => parts.push(mesh),
            Err(reason) => {
                log::warn!("skipping footprint {}: {reason}", fp.id);
                skipped.push(SkippedFootprint { id: fp.id.clone(), reason });
            }
        }
    }
    ExtrudeOutput {
        mesh: merge(&parts),
        skipped,
    }
}

/// Terrain followed by every extruded footprint, in one mesh.
pub fn build_city_model(set: &FootprintSet, dem: &DemGrid, height: f64) -> ExtrudeOutput {
    let buildings = extrude_footprints(set, dem, height);
    ExtrudeOutput {
        mesh: merge(&[super::build_terrain(dem), buildings.mesh]),
        skipped: buildings.skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, x0: f64, y0: f64, size: f64) -> Footprint {
        Footprint::new(
            id,
            vec![
                Vec2::new(x0, y0),
                Vec2::new(x0 + size, y0),
                Vec2::new(x0 + size, y0 + size),
                Vec2::new(x0, y0 + size),
            ],
            vec![],
        )
        .unwrap()
    }

    fn z_range(mesh: &CityMesh) -> (f64, f64) {
        mesh.vertices()
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v.z), hi.max(v.z)))
    }

    #[test]
    fn square_on_flat_terrain() {
        let dem = DemGrid::flat(Vec2::new(0.0, 0.0), 5.0, 10, 10, 50.0).unwrap();
        let mesh = extrude_footprint(&square("a", 10.0, 10.0, 10.0), &dem, DEFAULT_HEIGHT).unwrap();
        assert_eq!(mesh.triangle_count(), 12);
        assert_eq!(z_range(&mesh), (49.0, 70.0));
        mesh.validate().unwrap();
        assert!((0..12).all(|t| mesh.building_of(t) == Some("a")));
    }

    #[test]
    fn raised_corner_keeps_minimum() {
        let mut dem = DemGrid::flat(Vec2::new(0.0, 0.0), 5.0, 10, 10, 50.0).unwrap();
        dem.set(4, 4, 52.0);
        let mesh = extrude_footprint(&square("a", 10.0, 10.0, 10.0), &dem, DEFAULT_HEIGHT).unwrap();
        assert_eq!(z_range(&mesh), (49.0, 70.0));
    }

    #[test]
    fn interior_dip_lowers_base() {
        // Dip at a cell center strictly inside the footprint, invisible to
        // the vertices alone.
        let mut dem = DemGrid::flat(Vec2::new(0.0, 0.0), 5.0, 10, 10, 50.0).unwrap();
        dem.set(3, 3, 46.0);
        let fp = square("a", 10.0, 10.0, 10.0);
        assert_eq!(prism_base(&fp, &dem).unwrap(), 45.0);
    }

    #[test]
    fn outside_footprint_skipped() {
        let dem = DemGrid::flat(Vec2::new(0.0, 0.0), 5.0, 4, 4, 0.0).unwrap();
        let set = FootprintSet {
            footprints: vec![square("in", 1.0, 1.0, 5.0), square("out", 12.0, 12.0, 5.0)],
        };
        let out = extrude_footprints(&set, &dem, DEFAULT_HEIGHT);
        assert_eq!(out.mesh.triangle_count(), 12);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].id, "out");
    }

    #[test]
    fn invalid_polygon_skipped_and_processing_continues() {
        let dem = DemGrid::flat(Vec2::new(0.0, 0.0), 5.0, 10, 10, 0.0).unwrap();
        let bowtie = Footprint {
            id: "bow".into(),
            exterior: vec![Vec2::new(1.0, 1.0), Vec2::new(9.0, 9.0), Vec2::new(9.0, 1.0), Vec2::new(1.0, 9.0)],
            holes: vec![],
        };
        let set = FootprintSet {
            footprints: vec![bowtie, square("ok", 20.0, 20.0, 5.0)],
        };
        let out = extrude_footprints(&set, &dem, DEFAULT_HEIGHT);
        assert_eq!(out.skipped.len(), 1);
        assert!(matches!(out.skipped[0].reason, MeshError::Triangulation { .. }));
        assert_eq!(out.mesh.building_ids(), ["ok"]);
    }
}
