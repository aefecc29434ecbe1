//! Detectors working on a winter profile and its snow-free reference.

use super::AnalysisError;
use crate::dem::{ProfileSample, SurfaceProfile};
use crate::roadspec::DesignCrossSection;

const STATION_TOLERANCE_M: f64 = 1e-9;
const COVERAGE_TOLERANCE_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnowFeature {
    pub start_station_m: f64,
    pub end_station_m: f64,
    pub max_depth_m: f64,
    pub area_m2: f64,
    /// Index of the first over-threshold sample.
    pub first_sample: usize,
    /// Index of the last over-threshold sample.
    pub last_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthMeasurement {
    pub transect_id: String,
    pub effective_width_m: f64,
    pub design_roadway_width_m: f64,
    /// `design − effective`, negative when the clear span is wider than designed.
    pub deficit_m: f64,
    pub clear_span: Option<(f64, f64)>,
    pub fully_blocked: bool,
}

/// `profile − reference` per station; missing where either side is missing.
pub fn depth_samples(
    profile: &SurfaceProfile,
    reference: &SurfaceProfile,
) -> Result<Vec<ProfileSample>, AnalysisError> {
    if profile.len() != reference.len() {
        return Err(AnalysisError::ProfileMismatch(format!(
            "{} samples vs {} in the reference",
            profile.len(),
            reference.len()
        )));
    }
    profile
        .samples
        .iter()
        .zip(&reference.samples)
        .enumerate()
        .map(|(i, (p, r))| {
            if (p.station_m - r.station_m).abs() > STATION_TOLERANCE_M {
                return Err(AnalysisError::ProfileMismatch(format!(
                    "sample {i} at station {} vs {} in the reference",
                    p.station_m, r.station_m
                )));
            }
            Ok(ProfileSample {
                station_m: p.station_m,
                elevation_m: match (p.elevation_m, r.elevation_m) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                },
            })
        })
        .collect()
}

/// Station where the depth crosses `level` between a sample inside a run and
/// its neighbor outside it; the inside station when the neighbor is missing
/// or absent.
fn crossing(depth: &[ProfileSample], inside: usize, outside: Option<usize>, level: f64) -> f64 {
    let a = depth[inside];
    let Some(o) = outside.map(|o| depth[o]) else { return a.station_m };
    match (a.elevation_m, o.elevation_m) {
        (Some(da), Some(doe)) if da != doe => {
            let t = (level - doe) / (da - doe);
            o.station_m + t.clamp(0.0, 1.0) * (a.station_m - o.station_m)
        }
        _ => a.station_m,
    }
}

/// Maximal index runs where `pred(depth)` holds; missing samples break runs.
fn runs(depth: &[ProfileSample], pred: impl Fn(f64) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, s) in depth.iter().enumerate() {
        let hit = s.elevation_m.is_some_and(&pred);
        match (hit, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                out.push((a, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((a, depth.len() - 1));
    }
    out
}

/// Run bounds, interpolated to the level crossing at both ends.
fn run_bounds(depth: &[ProfileSample], a: usize, b: usize, level: f64) -> (f64, f64) {
    let before = a.checked_sub(1);
    let after = (b + 1 < depth.len()).then_some(b + 1);
    (crossing(depth, a, before, level), crossing(depth, b, after, level))
}

/// Contiguous spans deeper than `min_depth_m`, at least `min_extent_m` long,
/// ordered by station. Span ends are interpolated to the threshold crossing;
/// at a missing sample or the profile end the span stops at the last
/// over-threshold station.
pub fn detect_snow_features(
    profile: &SurfaceProfile,
    reference: &SurfaceProfile,
    min_depth_m: f64,
    min_extent_m: f64,
) -> Result<Vec<SnowFeature>, AnalysisError> {
    if !(min_depth_m > 0.0 && min_depth_m.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!(
            "min_depth_m must be positive, got {min_depth_m}"
        )));
    }
    let depth = depth_samples(profile, reference)?;
    let mut features = Vec::new();
    for (a, b) in runs(&depth, |d| d > min_depth_m) {
        let (start, end) = run_bounds(&depth, a, b, min_depth_m);
        if end <= start || end - start < min_extent_m {
            continue;
        }
        let mut pts = Vec::with_capacity(b - a + 3);
        if start < depth[a].station_m {
            pts.push((start, min_depth_m));
        }
        pts.extend(depth[a..=b].iter().map(|s| (s.station_m, s.elevation_m.unwrap())));
        if end > depth[b].station_m {
            pts.push((end, min_depth_m));
        }
        let area_m2 = pts
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        let max_depth_m = depth[a..=b]
            .iter()
            .filter_map(|s| s.elevation_m)
            .fold(f64::MIN, f64::max);
        features.push(SnowFeature {
            start_station_m: start,
            end_station_m: end,
            max_depth_m,
            area_m2,
            first_sample: a,
            last_sample: b,
        });
    }
    Ok(features)
}

/// Longest clear span (depth ≤ `min_depth_m`) inside the designed roadway,
/// which occupies stations `[roadway_start_m, roadway_start_m + W]`.
/// Missing samples are treated as not drivable. Ties go to the leftmost span.
pub fn effective_width(
    profile: &SurfaceProfile,
    reference: &SurfaceProfile,
    design: &DesignCrossSection,
    min_depth_m: f64,
    roadway_start_m: f64,
) -> Result<WidthMeasurement, AnalysisError> {
    if !(min_depth_m >= 0.0 && min_depth_m.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!(
            "min_depth_m must be non-negative, got {min_depth_m}"
        )));
    }
    if !(roadway_start_m >= 0.0 && roadway_start_m.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!(
            "roadway start must be non-negative, got {roadway_start_m}"
        )));
    }
    let depth = depth_samples(profile, reference)?;
    let design_w = design.roadway_width.meters();
    let (lo, hi) = (roadway_start_m, roadway_start_m + design_w);
    let available_m = depth.last().map_or(0.0, |s| s.station_m);
    if depth.is_empty() || available_m + COVERAGE_TOLERANCE_M < hi {
        return Err(AnalysisError::TransectTooShort {
            needed_m: hi,
            available_m,
        });
    }

    let mut best: Option<(f64, f64)> = None;
    for (a, b) in runs(&depth, |d| d <= min_depth_m) {
        let (start, end) = run_bounds(&depth, a, b, min_depth_m);
        let (start, end) = (start.max(lo), end.min(hi));
        if end <= start {
            continue;
        }
        if best.is_none_or(|(s, e)| end - start > e - s) {
            best = Some((start, end));
        }
    }
    let effective = best.map_or(0.0, |(s, e)| e - s);
    Ok(WidthMeasurement {
        transect_id: profile.transect_id.clone(),
        effective_width_m: effective,
        design_roadway_width_m: design_w,
        deficit_m: design_w - effective,
        clear_span: best,
        fully_blocked: best.is_none(),
    })
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Roadway ends: scanning outward from the middle, the station where the
/// surface first falls `drop_m` below the median level of the central third,
/// interpolated between samples. Both sides must show the drop.
pub fn detect_profile_edges(profile: &SurfaceProfile, drop_m: f64) -> Result<(f64, f64), AnalysisError> {
    if !(drop_m > 0.0 && drop_m.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!("drop must be positive, got {drop_m}")));
    }
    let s = &profile.samples;
    if s.iter().filter(|x| x.elevation_m.is_some()).count() < 3 {
        return Err(AnalysisError::EdgesNotFound("fewer than 3 valid samples".into()));
    }
    let n = s.len();
    let mut central: Vec<f64> = s[n / 3..(2 * n).div_ceil(3)]
        .iter()
        .filter_map(|x| x.elevation_m)
        .collect();
    let level = median(&mut central)
        .ok_or_else(|| AnalysisError::EdgesNotFound("central third has no valid samples".into()))?;
    let floor = level - drop_m;

    let find = |indices: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut last_above: Option<usize> = None;
        for i in indices {
            let Some(z) = s[i].elevation_m else { continue };
            if z <= floor {
                return Some(match last_above {
                    Some(j) => {
                        let zj = s[j].elevation_m.unwrap();
                        let t = (zj - floor) / (zj - z);
                        s[j].station_m + t * (s[i].station_m - s[j].station_m)
                    }
                    None => s[i].station_m,
                });
            }
            last_above = Some(i);
        }
        None
    };
    let mid = n / 2;
    let left = find(&mut (0..=mid).rev());
    let right = find(&mut (mid..n));
    match (left, right) {
        (Some(l), Some(r)) => Ok((l, r)),
        (None, _) => Err(AnalysisError::EdgesNotFound(format!(
            "no {drop_m} m drop left of the center"
        ))),
        (_, None) => Err(AnalysisError::EdgesNotFound(format!(
            "no {drop_m} m drop right of the center"
        ))),
    }
}

/// Snow-free reference when no bare-season surface exists: a Theil–Sen line
/// through the valid samples of the profile's central third, evaluated at
/// every station.
pub fn fallback_reference(profile: &SurfaceProfile) -> Result<SurfaceProfile, AnalysisError> {
    let n = profile.len();
    let pts: Vec<(f64, f64)> = profile.samples[n / 3..(2 * n).div_ceil(3)]
        .iter()
        .filter_map(|s| s.elevation_m.map(|z| (s.station_m, z)))
        .collect();
    if pts.len() < 2 {
        return Err(AnalysisError::ProfileMismatch(
            "central third needs at least 2 valid samples for a reference fit".into(),
        ));
    }
    let mut slopes = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            slopes.push((b.1 - a.1) / (b.0 - a.0));
        }
    }
    let slope = median(&mut slopes).unwrap();
    let mut intercepts: Vec<f64> = pts.iter().map(|(x, z)| z - slope * x).collect();
    let intercept = median(&mut intercepts).unwrap();
    Ok(SurfaceProfile {
        transect_id: profile.transect_id.clone(),
        spacing_m: profile.spacing_m,
        samples: profile
            .samples
            .iter()
            .map(|s| ProfileSample {
                station_m: s.station_m,
                elevation_m: Some(intercept + slope * s.station_m),
            })
            .collect(),
    })
}
