use super::{CityMesh, MeshError, SurfaceLabel};
use crate::geom::Vec3;
use crate::ingest::DemGrid;

/// Bilinear interpolation between the four cell centers around `(x, y)`.
pub fn terrain_elevation(dem: &DemGrid, x: f64, y: f64) -> Result<f64, MeshError> {
    if !dem.contains(x, y) {
        return Err(MeshError::OutOfBounds { x, y });
    }
    let o = dem.origin();
    let s = dem.spacing();
    let gx = (x - o.x) / s;
    let gy = (y - o.y) / s;
    let i = (gx.floor() as usize).min(dem.ncols() - 2);
    let j = (gy.floor() as usize).min(dem.nrows() - 2);
    let fx = gx - i as f64;
    let fy = gy - j as f64;

    let corner = |di: usize, dj: usize| dem.get(i + di, j + dj).ok_or(MeshError::Nodata { x, y });
    let z00 = corner(0, 0)?;
    let z10 = corner(1, 0)?;
    let z01 = corner(0, 1)?;
    let z11 = corner(1, 1)?;

    // Exact at cell centers and on constant stretches.
    let lerp = |a: f64, b: f64, f: f64| if f >= 1.0 { b } else { a + (b - a) * f };
    let bottom = lerp(z00, z10, fx);
    let top = lerp(z01, z11, fx);
    Ok(lerp(bottom, top, fy))
}

/// Ground mesh with one vertex per cell center and two triangles per quad of
/// valid cells, split along the `(i, j) -> (i + 1, j + 1)` diagonal.
pub fn build_terrain(dem: &DemGrid) -> CityMesh {
    let (nc, nr) = (dem.ncols(), dem.nrows());
    let mut mesh = CityMesh::new();
    let mut index = vec![u32::MAX; nc * nr];
    let mut vertex = |mesh: &mut CityMesh, i: usize, j: usize| {
        let slot = &mut index[j * nc + i];
        if *slot == u32::MAX {
            let c = dem.cell_center(i, j);
            *slot = mesh.push_vertex(Vec3::new(c.x, c.y, dem.raw(i, j)));
        }
        *slot
    };

    for j in 0..nr - 1 {
        for i in 0..nc - 1 {
            let valid = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
                .iter()
                .all(|&(a, b)| dem.get(a, b).is_some());
            if !valid {
                continue;
            }
            let v00 = vertex(&mut mesh, i, j);
            let v10 = vertex(&mut mesh, i + 1, j);
            let v11 = vertex(&mut mesh, i + 1, j + 1);
            let v01 = vertex(&mut mesh, i, j + 1);
            mesh.push_triangle([v00, v10, v11], SurfaceLabel::Ground, None);
            mesh.push_triangle([v00, v11, v01], SurfaceLabel::Ground, None);
        }
    }
    mesh
}
