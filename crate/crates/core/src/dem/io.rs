//! DEM1 grid files and profile CSV export.
//!
//! DEM1 layout (little-endian): `"DEM1"`, origin x and y (f64), cell size
//! (f64), rows and cols (u32), crs label length (u32) and UTF-8 bytes, then
//! row-major f32 elevations with NaN marking missing cells.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DemError, DemGrid, GridGeometry, SurfaceProfile};

const MAGIC: &[u8; 4] = b"DEM1";

pub fn encode_dem(grid: &DemGrid) -> Result<Vec<u8>, DemError> {
    let g = &grid.geometry;
    let rows = u32::try_from(g.n_rows).map_err(|_| DemError::MalformedDem("too many rows".into()))?;
    let cols = u32::try_from(g.n_cols).map_err(|_| DemError::MalformedDem("too many columns".into()))?;
    let label = grid.crs_label.as_bytes();
    let mut out = Vec::with_capacity(40 + label.len() + 4 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&g.origin_x.to_le_bytes());
    out.extend_from_slice(&g.origin_y.to_le_bytes());
    out.extend_from_slice(&g.cell_size.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&(label.len() as u32).to_le_bytes());
    out.extend_from_slice(label);
    for v in &grid.elevations {
        let f = v.map_or(f32::NAN, |z| z as f32);
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DemError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| DemError::MalformedDem("truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64, DemError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DemError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_dem(data: &[u8]) -> Result<DemGrid, DemError> {
    let mut cur = Cursor { data, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(DemError::MalformedDem("bad magic".into()));
    }
    let origin_x = cur.f64()?;
    let origin_y = cur.f64()?;
    let cell_size = cur.f64()?;
    let n_rows = cur.u32()? as usize;
    let n_cols = cur.u32()? as usize;
    let label_len = cur.u32()? as usize;
    let crs_label = std::str::from_utf8(cur.take(label_len)?)
        .map_err(|_| DemError::MalformedDem("crs label is not UTF-8".into()))?
        .to_string();
    if !(origin_x.is_finite() && origin_y.is_finite()) {
        return Err(DemError::MalformedDem("non-finite origin".into()));
    }
    let count = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| DemError::MalformedDem("grid too large".into()))?;
    if data.len() - cur.pos != count.saturating_mul(4) {
        return Err(DemError::MalformedDem(format!(
            "expected {count} elevations, found {} bytes",
            data.len() - cur.pos
        )));
    }
    let mut elevations = Vec::with_capacity(count);
    for _ in 0..count {
        let f = f32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        elevations.push(if f.is_nan() { None } else { Some(f as f64) });
    }
    let geometry = GridGeometry {
        origin_x,
        origin_y,
        cell_size,
        n_rows,
        n_cols,
    };
    DemGrid::new(geometry, elevations, crs_label)
}

pub fn write_dem(path: &Path, grid: &DemGrid) -> std::io::Result<()> {
    let bytes = encode_dem(grid).map_err(std::io::Error::other)?;
    fs::write(path, bytes)
}

pub fn read_dem(path: &Path) -> Result<DemGrid, ReadDemError> {
    let bytes = fs::read(path)?;
    Ok(decode_dem(&bytes)?)
}

#[derive(Debug, thiserror::Error)]
pub enum ReadDemError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dem(#[from] DemError),
}

/// `station_m,elevation_m`, empty elevation for missing samples.
pub fn profile_csv(profile: &SurfaceProfile) -> String {
    let mut out = String::from("station_m,elevation_m\n");
    for s in &profile.samples {
        match s.elevation_m {
            Some(z) => writeln!(out, "{:.3},{:.4}", s.station_m, z),
            None => writeln!(out, "{:.3},", s.station_m),
        }
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_grid() -> DemGrid {
        let g = GridGeometry {
            origin_x: 385000.0,
            origin_y: 7210000.5,
            cell_size: 0.1,
            n_rows: 3,
            n_cols: 4,
        };
        let mut grid = DemGrid::from_fn(g, "EPSG:3067", |x, y| Some((x - 385000.0) + (y - 7210000.0)));
        grid.elevations[5] = None;
        grid
    }

    #[test]
    fn round_trip() {
        let grid = sample_grid();
        let back = decode_dem(&encode_dem(&grid).unwrap()).unwrap();
        assert_eq!(back.geometry, grid.geometry);
        assert_eq!(back.crs_label, "EPSG:3067");
        for (a, b) in grid.elevations.iter().zip(&back.elevations) {
            match (a, b) {
                (Some(a), Some(b)) => assert_eq!(*b, *a as f32 as f64),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_dem(&sample_grid()).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode_dem(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_dem(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_dem(&long).is_err());
    }

    #[test]
    fn csv_marks_nodata() {
        let p = SurfaceProfile::from_elevations("t", 0.5, [Some(1.0), None, Some(2.25)]);
        assert_eq!(profile_csv(&p), "station_m,elevation_m\n0.000,1.0000\n0.500,\n1.000,2.2500\n");
    }
}
