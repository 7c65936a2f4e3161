use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, IngestError};
use crate::geom::Vec2;
use crate::json::format_f64;

/// Regular elevation grid.
///
/// `origin` is the center of cell `(0, 0)`, the south-west cell. Row `j`
/// increases northwards; storage is row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    origin: Vec2,
    spacing: f64,
    ncols: usize,
    nrows: usize,
    elevation: Vec<f64>,
    nodata: f64,
}

impl DemGrid {
    pub fn new(
        origin: Vec2,
        spacing: f64,
        ncols: usize,
        nrows: usize,
        elevation: Vec<f64>,
        nodata: f64,
    ) -> Result<Self, IngestError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(IngestError::DemInvalid(format!("cell size {spacing} must be positive")));
        }
        if ncols < 2 || nrows < 2 {
            return Err(IngestError::DemInvalid(format!("{ncols}x{nrows} grid is smaller than 2x2")));
        }
        if !origin.x.is_finite() || !origin.y.is_finite() {
            return Err(IngestError::NonFinite("DEM origin".into()));
        }
        if elevation.len() != ncols * nrows {
            return Err(IngestError::DemValueCount {
                expected: ncols * nrows,
                found: elevation.len(),
            });
        }
        if elevation.iter().any(|&z| z != nodata && !z.is_finite()) {
            return Err(IngestError::NonFinite("DEM elevation".into()));
        }
        Ok(DemGrid {
            origin,
            spacing,
            ncols,
            nrows,
            elevation,
            nodata,
        })
    }

    /// A grid where every cell has the same elevation.
    pub fn flat(origin: Vec2, spacing: f64, ncols: usize, nrows: usize, z: f64) -> Result<Self, IngestError> {
        Self::new(origin, spacing, ncols, nrows, vec![z; ncols * nrows], -9999.0)
    }

    pub fn from_fn(
        origin: Vec2,
        spacing: f64,
        ncols: usize,
        nrows: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, IngestError> {
        let mut elevation = Vec::with_capacity(ncols * nrows);
        for j in 0..nrows {
            for i in 0..ncols {
                let c = origin + Vec2::new(i as f64, j as f64) * spacing;
                elevation.push(f(c.x, c.y));
            }
        }
        Self::new(origin, spacing, ncols, nrows, elevation, -9999.0)
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    /// Raw stored value of cell `(i, j)`, nodata sentinel included.
    pub fn raw(&self, i: usize, j: usize) -> f64 {
        self.elevation[j * self.ncols + i]
    }

    /// Elevation of cell `(i, j)`, or `None` for nodata.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let z = self.raw(i, j);
        (z != self.nodata).then_some(z)
    }

    pub fn set(&mut self, i: usize, j: usize, z: f64) {
        self.elevation[j * self.ncols + i] = z;
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.spacing
    }

    /// Extent of the cell-center hull: `(min, max)` corners.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let max = self.cell_center(self.ncols - 1, self.nrows - 1);
        (self.origin, max)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (min, max) = self.bounds();
        x >= min.x && x <= max.x && y >= min.y && y <= max.y
    }
}

pub fn load_dem(path: &Path) -> Result<DemGrid, IngestError> {
    parse_dem(&read_text(path)?)
}

/// Parse an Esri ASCII grid. Accepts both `xllcorner`/`yllcorner` and the
/// `xllcenter`/`yllcenter` variants; `NODATA_value` defaults to -9999.
pub fn parse_dem(text: &str) -> Result<DemGrid, IngestError> {
    let mut tokens = text.split_whitespace().peekable();
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut center = None;
    let mut cellsize = None;
    let mut nodata = -9999.0;

    while let Some(tok) = tokens.peek() {
        if tok.parse::<f64>().is_ok() {
            break;
        }
        let key = tokens.next().unwrap().to_ascii_lowercase();
        let value = tokens
            .next()
            .ok_or_else(|| IngestError::DemHeader(format!("{key} has no value")))?;
        let num: f64 = value
            .parse()
            .map_err(|_| IngestError::DemHeader(format!("{key} = {value:?} is not a number")))?;
        match key.as_str() {
            "ncols" => ncols = Some(as_count(&key, num)?),
            "nrows" => nrows = Some(as_count(&key, num)?),
            "xllcorner" | "xllcenter" => {
                xll = Some(num);
                center = Some(key == "xllcenter");
            }
            "yllcorner" | "yllcenter" => yll = Some(num),
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = num,
            _ => return Err(IngestError::DemHeader(format!("unknown key {key}"))),
        }
    }

    let missing = |k: &str| IngestError::DemHeader(format!("missing {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let yll = yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;

    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|_| IngestError::Parse(format!("bad DEM value {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != ncols * nrows {
        return Err(IngestError::DemValueCount {
            expected: ncols * nrows,
            found: values.len(),
        });
    }

    // File rows run north to south.
    let mut elevation = Vec::with_capacity(values.len());
    for row in values.chunks(ncols).rev() {
        elevation.extend_from_slice(row);
    }
    let half = if center == Some(true) { 0.0 } else { cellsize / 2.0 };
    DemGrid::new(Vec2::new(xll + half, yll + half), cellsize, ncols, nrows, elevation, nodata)
}

fn as_count(key: &str, v: f64) -> Result<usize, IngestError> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(IngestError::DemHeader(format!("{key} = {v} is not a count")))
    }
}

/// Serialize with the `*llcenter` header variant so the origin round-trips
/// without arithmetic.
pub fn dem_to_string(dem: &DemGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", dem.ncols);
    let _ = writeln!(out, "nrows {}", dem.nrows);
    let _ = writeln!(out, "xllcenter {}", format_f64(dem.origin.x));
    let _ = writeln!(out, "yllcenter {}", format_f64(dem.origin.y));
    let _ = writeln!(out, "cellsize {}", format_f64(dem.spacing));
    let _ = writeln!(out, "NODATA_value {}", format_f64(dem.nodata));
    for j in (0..dem.nrows).rev() {
        let row: Vec<String> = (0..dem.ncols).map(|i| format_f64(dem.raw(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_dem(path: &Path, dem: &DemGrid) -> Result<(), crate::Error> {
    std::fs::write(path, dem_to_string(dem)).map_err(|e| crate::Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_zeros() {
        let dem = parse_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\nNODATA_value -9999\n0 0\n0 0\n").unwrap();
        assert_eq!(dem.spacing(), 5.0);
        assert_eq!((dem.ncols(), dem.nrows()), (2, 2));
        assert!((0..2).all(|j| (0..2).all(|i| dem.get(i, j) == Some(0.0))));
    }

    #[test]
    fn origin_is_cell_center() {
        let dem = parse_dem("ncols 2\nnrows 2\nxllcorner 100\nyllcorner 200\ncellsize 5\n1 2\n3 4\n").unwrap();
        assert_eq!(dem.origin(), Vec2::new(102.5, 202.5));
        // First file row is the northern one.
        assert_eq!(dem.get(0, 1), Some(1.0));
        assert_eq!(dem.get(0, 0), Some(3.0));
    }

    #[test]
    fn nodata_cell_preserved() {
        let dem = parse_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -1\n5 -1\n5 5\n").unwrap();
        assert_eq!(dem.get(1, 1), None);
        assert_eq!(dem.get(0, 1), Some(5.0));
        assert_eq!(dem.raw(1, 1), -1.0);
    }

    #[test]
    fn value_count_checked() {
        let err = parse_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n").unwrap_err();
        assert!(matches!(err, IngestError::DemValueCount { expected: 4, found: 3 }));
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(
            parse_dem("ncols 2\nnrows 2\ncellsize 1\n1 2 3 4\n"),
            Err(IngestError::DemHeader(_))
        ));
        assert!(matches!(
            parse_dem("ncols two\nnrows 2\n"),
            Err(IngestError::DemHeader(_))
        ));
        assert!(matches!(
            parse_dem("ncols 1\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n"),
            Err(IngestError::DemInvalid(_))
        ));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dem = DemGrid::from_fn(Vec2::new(20_000.1, 30_000.7), 5.0, 4, 3, |x, y| 0.013 * x - 0.007 * y + 1.0 / 3.0)
            .unwrap();
        let back = parse_dem(&dem_to_string(&dem)).unwrap();
        assert_eq!(dem, back);
    }
}
