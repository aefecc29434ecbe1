//! Width between snow-banks measured on perpendicular strips of a map cloud.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::AnalysisError;
use crate::ingest::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnowbankParams {
    /// Bin width across the strip.
    pub cell_m: f64,
    /// Half-width of the strip along the centerline.
    pub strip_half_width_m: f64,
    /// Farthest offset from the centerline searched for a bank.
    pub max_half_span_m: f64,
    /// Offsets within this distance of the centerline define the road level.
    pub level_band_m: f64,
    /// Height above the road level that marks a bank toe.
    pub toe_rise_m: f64,
}

impl Default for SnowbankParams {
    fn default() -> Self {
        SnowbankParams {
            cell_m: 0.1,
            strip_half_width_m: 0.25,
            max_half_span_m: 15.0,
            level_band_m: 1.0,
            toe_rise_m: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankWidth {
    pub station_m: f64,
    /// Toe-to-toe distance; `None` when either side shows no bank.
    pub width_m: Option<f64>,
}

struct Polyline {
    vertices: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(vertices: &[(f64, f64)]) -> Result<Self, AnalysisError> {
        if vertices.len() < 2 {
            return Err(AnalysisError::InvalidParameter("centerline needs at least 2 vertices".into()));
        }
        let mut cumulative = vec![0.0];
        for w in vertices.windows(2) {
            let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            if !(d > 0.0 && d.is_finite()) {
                return Err(AnalysisError::InvalidParameter("repeated or non-finite centerline vertex".into()));
            }
            cumulative.push(cumulative.last().unwrap() + d);
        }
        Ok(Polyline {
            vertices: vertices.to_vec(),
            cumulative,
        })
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position and unit tangent at arc length `s`.
    fn at(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        let seg = self
            .cumulative
            .partition_point(|&c| c <= s)
            .clamp(1, self.vertices.len() - 1)
            - 1;
        let (a, b) = (self.vertices[seg], self.vertices[seg + 1]);
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let t = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        let d = s - self.cumulative[seg];
        ((a.0 + t.0 * d, a.1 + t.1 * d), t)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Inner toe offset on one side: the first bin outward whose elevation rises
/// `bank_height_m` above `level` marks a bank; the toe is where the surface,
/// walking back inward, drops to `level + toe_rise_m` (interpolated).
fn toe(bins: &BTreeMap<i64, f64>, sign: i64, level: f64, bank_height_m: f64, p: &SnowbankParams) -> Option<f64> {
    let max_k = (p.max_half_span_m / p.cell_m).floor() as i64;
    let rise_k = (1..=max_k).find(|&k| bins.get(&(sign * k)).is_some_and(|&z| z >= level + bank_height_m))?;
    let toe_level = level + p.toe_rise_m;
    let mut outer = (rise_k, bins[&(sign * rise_k)]);
    for k in (0..rise_k).rev() {
        let Some(&z) = bins.get(&(sign * k)) else { continue };
        if z <= toe_level {
            let t = (outer.1 - toe_level) / (outer.1 - z);
            let offset = outer.0 as f64 - t * (outer.0 - k) as f64;
            return Some(offset * p.cell_m);
        }
        outer = (k, z);
    }
    Some(outer.0 as f64 * p.cell_m)
}

/// Width between the inner toes of the banks on both sides of `centerline`
/// at stations `0, step, 2·step, …` along it.
pub fn snowbank_width(
    map_cloud: &PointCloud,
    centerline: &[(f64, f64)],
    station_step_m: f64,
    bank_height_m: f64,
    params: &SnowbankParams,
) -> Result<Vec<BankWidth>, AnalysisError> {
    for (name, v) in [
        ("station step", station_step_m),
        ("bank height", bank_height_m),
        ("cell size", params.cell_m),
        ("strip half-width", params.strip_half_width_m),
        ("max half-span", params.max_half_span_m),
        ("level band", params.level_band_m),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(AnalysisError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(params.toe_rise_m >= 0.0 && params.toe_rise_m < bank_height_m) {
        return Err(AnalysisError::InvalidParameter(
            "toe rise must be non-negative and below the bank height".into(),
        ));
    }
    let line = Polyline::new(centerline)?;

    let bucket = params.strip_half_width_m.max(params.cell_m) * 2.0;
    let bkey = |x: f64, y: f64| ((x / bucket).floor() as i64, (y / bucket).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in map_cloud.points.iter().enumerate() {
        buckets.entry(bkey(p.x, p.y)).or_default().push(i);
    }

    let n = (line.length() / station_step_m + 1e-9).floor() as usize + 1;
    let results: Vec<(BankWidth, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let station_m = i as f64 * station_step_m;
            let ((px, py), (tx, ty)) = line.at(station_m);
            // right-hand normal
            let (nx, ny) = (ty, -tx);

            let mut keys: Vec<(i64, i64)> = Vec::new();
            let reach = params.max_half_span_m + bucket;
            let steps = (reach / (bucket * 0.5)).ceil() as i64;
            for k in -steps..=steps {
                let a = k as f64 * bucket * 0.5;
                let (cx, cy) = bkey(px + nx * a, py + ny * a);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        keys.push((cx + dx, cy + dy));
                    }
                }
            }
            keys.sort_unstable();
            keys.dedup();

            let mut bins: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
            for key in &keys {
                let Some(members) = buckets.get(key) else { continue };
                for &j in members {
                    let p = &map_cloud.points[j];
                    let (dx, dy) = (p.x - px, p.y - py);
                    let along = dx * tx + dy * ty;
                    let across = dx * nx + dy * ny;
                    if along.abs() <= params.strip_half_width_m && across.abs() <= params.max_half_span_m {
                        bins.entry((across / params.cell_m + 0.5).floor() as i64)
                            .or_default()
                            .push(p.z);
                    }
                }
            }
            let found_points = !bins.is_empty();
            let bins: BTreeMap<i64, f64> = bins.into_iter().map(|(k, mut v)| (k, median(&mut v))).collect();

            let band = (params.level_band_m / params.cell_m).floor() as i64;
            let mut central: Vec<f64> = bins.range(-band..=band).map(|(_, &z)| z).collect();
            let width_m = if central.is_empty() {
                None
            } else {
                let level = median(&mut central);
                let right = toe(&bins, 1, level, bank_height_m, params);
                let left = toe(&bins, -1, level, bank_height_m, params);
                left.zip(right).map(|(l, r)| l + r)
            };
            (BankWidth { station_m, width_m }, found_points)
        })
        .collect();

    if !results.iter().any(|r| r.1) {
        return Err(AnalysisError::EmptyCorridor);
    }
    Ok(results.into_iter().map(|r| r.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Point;

    /// Flat road with 1:1 banks rising from |u| = 3 to 0.4 m.
    fn banked(right_bank: bool) -> PointCloud {
        let mut pts = Vec::new();
        for j in 0..200 {
            for i in 0..200 {
                let u = -10.0 + (i as f64 + 0.37) * 0.1;
                let y = (j as f64 + 0.61) * 0.1;
                let a = u.abs();
                let bank = if u < 0.0 || right_bank { (a - 3.0).clamp(0.0, 0.4) } else { 0.0 };
                pts.push(Point::new(u, y, bank));
            }
        }
        PointCloud::new("local", pts)
    }

    #[test]
    fn symmetric_banks() {
        let cloud = banked(true);
        let w = snowbank_width(&cloud, &[(0.0, 1.0), (0.0, 19.0)], 1.0, 0.2, &SnowbankParams::default()).unwrap();
        assert_eq!(w.len(), 19);
        for b in &w {
            let width = b.width_m.unwrap();
            assert!((width - 6.0).abs() <= 0.2, "{width}");
        }
    }

    #[test]
    fn one_sided_bank_is_none() {
        let cloud = banked(false);
        let w = snowbank_width(&cloud, &[(0.0, 1.0), (0.0, 19.0)], 2.0, 0.2, &SnowbankParams::default()).unwrap();
        assert!(w.iter().all(|b| b.width_m.is_none()));
    }

    #[test]
    fn empty_corridor() {
        let cloud = banked(true);
        assert_eq!(
            snowbank_width(&cloud, &[(100.0, 100.0), (100.0, 120.0)], 1.0, 0.2, &SnowbankParams::default())
                .unwrap_err(),
            AnalysisError::EmptyCorridor
        );
    }

    #[test]
    fn polyline_lookup() {
        let line = Polyline::new(&[(0.0, 0.0), (3.0, 4.0), (3.0, 10.0)]).unwrap();
        assert_eq!(line.length(), 11.0);
        let (p, t) = line.at(7.0);
        assert!((p.0 - 3.0).abs() < 1e-12 && (p.1 - 6.0).abs() < 1e-12);
        assert_eq!(t, (0.0, 1.0));
        let (p, _) = line.at(11.0);
        assert!((p.1 - 10.0).abs() < 1e-12);
    }
}
