//! Grid-based region growing of the drivable surface from a seed point.

use std::collections::{HashMap, VecDeque};

use super::AnalysisError;
use crate::ingest::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub cell_m: f64,
    /// Largest median elevation step between neighboring cells.
    pub max_step_m: f64,
    /// Largest fitted surface slope inside a cell (rise over run).
    pub max_slope: f64,
    /// Inclusive band on the cell's median intensity.
    pub intensity_band: Option<(f32, f32)>,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            cell_m: 0.25,
            max_step_m: 0.05,
            max_slope: 0.15,
            intensity_band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Sorted indices into the input cloud.
    pub member_indices: Vec<usize>,
    pub seed: (f64, f64, f64),
    pub params: SegmentParams,
    pub cell_count: usize,
}

struct Cell {
    members: Vec<usize>,
    median_z: f64,
    median_intensity: Option<f32>,
    /// `None` when too few points for a plane fit.
    slope: Option<f64>,
}

fn median_f64(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gradient magnitude of the least-squares plane through the points.
fn plane_slope(pts: &[(f64, f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my, mz) = pts.iter().fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2));
    let (mx, my, mz) = (mx / n, my / n, mz / n);
    let (mut sxx, mut syy, mut sxy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, z) in pts {
        let (dx, dy, dz) = (x - mx, y - my, z - mz);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() <= 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE) {
        return None;
    }
    let b = (sxz * syy - syz * sxy) / det;
    let c = (syz * sxx - sxz * sxy) / det;
    Some(b.hypot(c))
}

/// Grows the road region over a grid anchored at the seed (the seed sits at
/// a cell center). A 4-neighbor cell joins when its median elevation is
/// within `max_step_m` of an accepted neighbor, its fitted slope (or, with
/// fewer than 3 points, the step slope to that neighbor) is at most
/// `max_slope`, and its median intensity lies in the band when one is given.
/// The result is the full closure, so it does not depend on visiting order.
pub fn segment_road(
    cloud: &PointCloud,
    seed: (f64, f64, f64),
    params: SegmentParams,
) -> Result<SegmentationResult, AnalysisError> {
    if !(params.cell_m > 0.0 && params.cell_m.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!(
            "cell size must be positive, got {}",
            params.cell_m
        )));
    }
    let bounds = cloud.bounds().ok_or(AnalysisError::SeedOutsideCloud)?;
    if !bounds.contains(seed.0, seed.1) {
        return Err(AnalysisError::SeedOutsideCloud);
    }

    let key = |x: f64, y: f64| -> (i64, i64) {
        (
            ((x - seed.0) / params.cell_m + 0.5).floor() as i64,
            ((y - seed.1) / params.cell_m + 0.5).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        buckets.entry(key(p.x, p.y)).or_default().push(i);
    }

    let mut cells: HashMap<(i64, i64), Cell> = HashMap::with_capacity(buckets.len());
    for (k, members) in buckets {
        let mut pts: Vec<(f64, f64, f64)> = members
            .iter()
            .map(|&i| {
                let p = &cloud.points[i];
                (p.x - seed.0, p.y - seed.1, p.z)
            })
            .collect();
        // canonical order keeps the fit independent of input order
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
        let slope = plane_slope(&pts);
        let mut zs: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let median_z = median_f64(&mut zs);
        let mut intens: Vec<f64> = members
            .iter()
            .filter_map(|&i| cloud.points[i].intensity.map(f64::from))
            .collect();
        let median_intensity = (intens.len() == members.len()).then(|| median_f64(&mut intens) as f32);
        cells.insert(
            k,
            Cell {
                members,
                median_z,
                median_intensity,
                slope,
            },
        );
    }

    if !cells.contains_key(&(0, 0)) {
        return Err(AnalysisError::EmptyResult);
    }
    let in_band = |c: &Cell| match params.intensity_band {
        None => true,
        Some((lo, hi)) => c.median_intensity.is_some_and(|v| v >= lo && v <= hi),
    };

    let mut accepted: HashMap<(i64, i64), ()> = HashMap::new();
    accepted.insert((0, 0), ());
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    while let Some((cx, cy)) = queue.pop_front() {
        let from = &cells[&(cx, cy)];
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let nk = (cx + dx, cy + dy);
            if accepted.contains_key(&nk) {
                continue;
            }
            let Some(to) = cells.get(&nk) else { continue };
            let step = (to.median_z - from.median_z).abs();
            let slope = to.slope.unwrap_or(step / params.cell_m);
            if step <= params.max_step_m && slope <= params.max_slope && in_band(to) {
                accepted.insert(nk, ());
                queue.push_back(nk);
            }
        }
    }

    let mut member_indices: Vec<usize> = accepted
        .keys()
        .flat_map(|k| cells[k].members.iter().copied())
        .collect();
    member_indices.sort_unstable();
    Ok(SegmentationResult {
        member_indices,
        seed,
        params,
        cell_count: accepted.len(),
    })
}
