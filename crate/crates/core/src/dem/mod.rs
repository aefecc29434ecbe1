//! Elevation grids: rasterization from point clouds, hole filling, bilinear
//! sampling, transect profiles, epoch differencing and volume integration.
//!
//! Grids are row-major with row 0 at the southern edge: cell `(row, col)`
//! covers `[x0 + col·c, x0 + (col+1)·c) × [y0 + row·c, y0 + (row+1)·c)` and its
//! center sits half a cell inside that square. Missing cells are `None`;
//! arithmetic involving a missing cell yields a missing cell.

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::PointCloud;

pub mod io;

pub use io::{decode_dem, encode_dem, profile_csv, read_dem, write_dem, ReadDemError};

/// Default raster resolution for road-scale work.
pub const DEFAULT_CELL_SIZE_M: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("cell size must be positive, got {0}")]
    NonPositiveCell(f64),
    #[error("profile spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid transect: {0}")]
    InvalidTransect(String),
    #[error("malformed DEM file: {0}")]
    MalformedDem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Mean,
    /// Resists ground bleed-through when the surface of interest is a snow top.
    Max,
    Min,
}

impl std::str::FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "max" => Ok(Aggregator::Max),
            "min" => Ok(Aggregator::Min),
            other => Err(format!("unknown aggregator `{other}` (mean|max|min)")),
        }
    }
}

impl Aggregator {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Max => "max",
            Aggregator::Min => "min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    /// Lower-left corner of cell (0, 0).
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridGeometry {
    /// Smallest grid aligned to multiples of `cell_size` that contains the
    /// given bounds.
    pub fn covering(
        min_x: f64,
        min_y: f64,
        max_x: f64,
        max_y: f64,
        cell_size: f64,
    ) -> Result<Self, DemError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(DemError::NonPositiveCell(cell_size));
        }
        let origin_x = (min_x / cell_size).floor() * cell_size;
        let origin_y = (min_y / cell_size).floor() * cell_size;
        let n_cols = ((max_x - origin_x) / cell_size).floor().max(0.0) as usize + 1;
        let n_rows = ((max_y - origin_y) / cell_size).floor().max(0.0) as usize + 1;
        Ok(GridGeometry {
            origin_x,
            origin_y,
            cell_size,
            n_rows,
            n_cols,
        })
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Fractional cell coordinates (col, row) of a point; floor gives the cell.
    fn cell_coords(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.cell_size,
            (y - self.origin_y) / self.cell_size,
        )
    }

    /// Cell containing (x, y), if inside the grid.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (fc, fr) = self.cell_coords(x, y);
        if fc < 0.0 || fr < 0.0 {
            return None;
        }
        let (col, row) = (fc.floor() as usize, fr.floor() as usize);
        (row < self.n_rows && col < self.n_cols).then_some((row, col))
    }

    pub fn area_per_cell(&self) -> f64 {
        self.cell_size * self.cell_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    pub geometry: GridGeometry,
    pub elevations: Vec<Option<f64>>,
    pub crs_label: String,
}

impl DemGrid {
    pub fn new(
        geometry: GridGeometry,
        elevations: Vec<Option<f64>>,
        crs_label: impl Into<String>,
    ) -> Result<Self, DemError> {
        if !(geometry.cell_size > 0.0 && geometry.cell_size.is_finite()) {
            return Err(DemError::NonPositiveCell(geometry.cell_size));
        }
        if elevations.len() != geometry.len() {
            return Err(DemError::GridMismatch(format!(
                "{} elevations for a {}x{} grid",
                elevations.len(),
                geometry.n_rows,
                geometry.n_cols
            )));
        }
        if elevations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DemError::MalformedDem("non-finite elevation".into()));
        }
        Ok(DemGrid {
            geometry,
            elevations,
            crs_label: crs_label.into(),
        })
    }

    /// Grid whose cell values are `f(center_x, center_y)`.
    pub fn from_fn(
        geometry: GridGeometry,
        crs_label: impl Into<String>,
        f: impl Fn(f64, f64) -> Option<f64>,
    ) -> Self {
        let mut elevations = Vec::with_capacity(geometry.len());
        for row in 0..geometry.n_rows {
            for col in 0..geometry.n_cols {
                let (x, y) = geometry.cell_center(row, col);
                elevations.push(f(x, y));
            }
        }
        DemGrid {
            geometry,
            elevations,
            crs_label: crs_label.into(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.elevations[self.geometry.index(row, col)]
    }

    pub fn valid_count(&self) -> usize {
        self.elevations.iter().filter(|v| v.is_some()).count()
    }
}

fn check_cell(cell_size: f64) -> Result<(), DemError> {
    if cell_size > 0.0 && cell_size.is_finite() {
        Ok(())
    } else {
        Err(DemError::NonPositiveCell(cell_size))
    }
}

/// Rasterizes over the cloud's own bounds, snapped outward to cell multiples.
pub fn rasterize(
    cloud: &PointCloud,
    cell_size: f64,
    aggregator: Aggregator,
) -> Result<DemGrid, DemError> {
    check_cell(cell_size)?;
    let bounds = cloud.bounds().ok_or(DemError::EmptyCloud)?;
    let geometry = GridGeometry::covering(
        bounds.min_x,
        bounds.min_y,
        bounds.max_x,
        bounds.max_y,
        cell_size,
    )?;
    Ok(bin_points(cloud, geometry, aggregator, true))
}

/// Rasterizes onto a caller-declared grid; points outside it are ignored.
/// Use this to put several epochs on one registration for [`diff`].
pub fn rasterize_onto(
    cloud: &PointCloud,
    geometry: GridGeometry,
    aggregator: Aggregator,
) -> Result<DemGrid, DemError> {
    check_cell(geometry.cell_size)?;
    if cloud.is_empty() {
        return Err(DemError::EmptyCloud);
    }
    Ok(bin_points(cloud, geometry, aggregator, false))
}

fn bin_points(
    cloud: &PointCloud,
    geometry: GridGeometry,
    aggregator: Aggregator,
    clamp: bool,
) -> DemGrid {
    let (n_rows, n_cols) = (geometry.n_rows as i64, geometry.n_cols as i64);
    // (cell, z) sorted totally: the aggregate is independent of input order
    // and of the number of worker threads.
    let mut keyed: Vec<(usize, f64)> = cloud
        .points
        .par_iter()
        .filter_map(|p| {
            let (fc, fr) = geometry.cell_coords(p.x, p.y);
            let (mut col, mut row) = (fc.floor() as i64, fr.floor() as i64);
            if clamp {
                // rounding at the snapped bounds can push an edge point out by one
                col = col.clamp(0, n_cols - 1);
                row = row.clamp(0, n_rows - 1);
            } else if col < 0 || row < 0 || col >= n_cols || row >= n_rows {
                return None;
            }
            Some(((row * n_cols + col) as usize, p.z))
        })
        .collect();
    keyed.par_sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut elevations = vec![None; geometry.len()];
    for run in keyed.chunk_by(|a, b| a.0 == b.0) {
        let cell = run[0].0;
        let value = match aggregator {
            Aggregator::Mean => run.iter().map(|(_, z)| z).sum::<f64>() / run.len() as f64,
            Aggregator::Min => run[0].1,
            Aggregator::Max => run[run.len() - 1].1,
        };
        elevations[cell] = Some(value);
    }
    DemGrid {
        geometry,
        elevations,
        crs_label: cloud.crs_label.clone(),
    }
}

/// Fills missing cells by inverse-distance-squared weighting of the original
/// valid cells within `max_radius_cells` (Euclidean, in cells). Holes with no
/// valid cell in range stay missing; valid cells are never modified.
pub fn fill_holes(grid: &DemGrid, max_radius_cells: usize) -> DemGrid {
    if max_radius_cells == 0 {
        return grid.clone();
    }
    let g = grid.geometry;
    let r = max_radius_cells as i64;
    let r2 = r * r;
    let offsets: Vec<(i64, i64, f64)> = (-r..=r)
        .flat_map(|dr| (-r..=r).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| {
            let d2 = dr * dr + dc * dc;
            d2 > 0 && d2 <= r2
        })
        .map(|(dr, dc)| (dr, dc, 1.0 / (dr * dr + dc * dc) as f64))
        .collect();

    let elevations: Vec<Option<f64>> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            if let Some(v) = grid.elevations[idx] {
                return Some(v);
            }
            let (row, col) = ((idx / g.n_cols) as i64, (idx % g.n_cols) as i64);
            let mut weighted = 0.0;
            let mut weights = 0.0;
            for &(dr, dc, w) in &offsets {
                let (nr, nc) = (row + dr, col + dc);
                if nr < 0 || nc < 0 || nr >= g.n_rows as i64 || nc >= g.n_cols as i64 {
                    continue;
                }
                if let Some(v) = grid.get(nr as usize, nc as usize) {
                    weighted += w * v;
                    weights += w;
                }
            }
            (weights > 0.0).then(|| weighted / weights)
        })
        .collect();
    DemGrid {
        geometry: g,
        elevations,
        crs_label: grid.crs_label.clone(),
    }
}

/// Bilinear interpolation between the four surrounding cell centers.
///
/// Missing if the query is outside the grid or any contributing cell is
/// missing. In the half-cell margin between the outermost centers and the
/// grid edge the interpolation position is clamped to the outermost center.
/// A query that lands exactly on a center row/column only reads that row/column.
pub fn sample_bilinear(grid: &DemGrid, x: f64, y: f64) -> Option<f64> {
    let g = &grid.geometry;
    let (fc, fr) = g.cell_coords(x, y);
    if !(fc >= 0.0 && fr >= 0.0 && fc <= g.n_cols as f64 && fr <= g.n_rows as f64) {
        return None;
    }
    let fx = (fc - 0.5).clamp(0.0, (g.n_cols - 1) as f64);
    let fy = (fr - 0.5).clamp(0.0, (g.n_rows - 1) as f64);
    let (c0, r0) = (fx.floor() as usize, fy.floor() as usize);
    let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
    let c1 = if tx > 0.0 { c0 + 1 } else { c0 };
    let r1 = if ty > 0.0 { r0 + 1 } else { r0 };

    let v00 = grid.get(r0, c0)?;
    let v10 = grid.get(r0, c1)?;
    let v01 = grid.get(r1, c0)?;
    let v11 = grid.get(r1, c1)?;
    Some(
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty,
    )
}

/// Straight sampling line across the road.
#[derive(Debug, Clone, PartialEq)]
pub struct Transect {
    pub id: String,
    pub start: (f64, f64),
    /// Unit vector.
    pub direction: (f64, f64),
    pub length_m: f64,
}

impl Transect {
    /// Normalizes `direction`.
    pub fn new(
        id: impl Into<String>,
        start: (f64, f64),
        direction: (f64, f64),
        length_m: f64,
    ) -> Result<Self, DemError> {
        let norm = direction.0.hypot(direction.1);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(DemError::InvalidTransect("zero or non-finite direction".into()));
        }
        if !(length_m > 0.0 && length_m.is_finite()) {
            return Err(DemError::InvalidTransect(format!("length {length_m} is not positive")));
        }
        if !(start.0.is_finite() && start.1.is_finite()) {
            return Err(DemError::InvalidTransect("non-finite start".into()));
        }
        Ok(Transect {
            id: id.into(),
            start,
            direction: (direction.0 / norm, direction.1 / norm),
            length_m,
        })
    }

    pub fn point_at(&self, station_m: f64) -> (f64, f64) {
        (
            self.start.0 + self.direction.0 * station_m,
            self.start.1 + self.direction.1 * station_m,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub station_m: f64,
    pub elevation_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    pub transect_id: String,
    pub spacing_m: f64,
    pub samples: Vec<ProfileSample>,
}

impl SurfaceProfile {
    /// Builds a profile with stations `i·spacing` from a list of elevations.
    pub fn from_elevations(
        transect_id: impl Into<String>,
        spacing_m: f64,
        elevations: impl IntoIterator<Item = Option<f64>>,
    ) -> Self {
        SurfaceProfile {
            transect_id: transect_id.into(),
            spacing_m,
            samples: elevations
                .into_iter()
                .enumerate()
                .map(|(i, elevation_m)| ProfileSample {
                    station_m: i as f64 * spacing_m,
                    elevation_m,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn stations(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.station_m)
    }

    pub fn elevations(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.samples.iter().map(|s| s.elevation_m)
    }
}

/// Number of stations `0, s, 2s, …` that fit in `length` (tolerant to the
/// representation error of `length / s`).
pub fn station_count(length_m: f64, spacing_m: f64) -> usize {
    (length_m / spacing_m + 1e-9).floor() as usize + 1
}

pub fn extract_profile(
    grid: &DemGrid,
    transect: &Transect,
    spacing_m: f64,
) -> Result<SurfaceProfile, DemError> {
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(DemError::NonPositiveSpacing(spacing_m));
    }
    let n = station_count(transect.length_m, spacing_m);
    let samples = (0..n)
        .map(|i| {
            let station_m = i as f64 * spacing_m;
            let (x, y) = transect.point_at(station_m);
            ProfileSample {
                station_m,
                elevation_m: sample_bilinear(grid, x, y),
            }
        })
        .collect();
    Ok(SurfaceProfile {
        transect_id: transect.id.clone(),
        spacing_m,
        samples,
    })
}

/// Cellwise `winter − reference`. Both grids must share one registration.
pub fn diff(winter: &DemGrid, reference: &DemGrid) -> Result<DemGrid, DemError> {
    if winter.geometry != reference.geometry {
        return Err(DemError::GridMismatch(format!(
            "winter {:?} vs reference {:?}",
            winter.geometry, reference.geometry
        )));
    }
    let elevations = winter
        .elevations
        .par_iter()
        .zip(reference.elevations.par_iter())
        .map(|(w, r)| Some((*w)? - (*r)?))
        .collect();
    Ok(DemGrid {
        geometry: winter.geometry,
        elevations,
        crs_label: winter.crs_label.clone(),
    })
}

/// Sum of `depth × cell area` over cells deeper than `min_depth_m`.
pub fn volume(depth_grid: &DemGrid, min_depth_m: f64) -> f64 {
    let area = depth_grid.geometry.area_per_cell();
    depth_grid
        .elevations
        .iter()
        .flatten()
        .filter(|&&d| d > min_depth_m)
        .map(|d| d * area)
        .sum()
}
