//! Deterministic synthetic roads with closed-form surfaces: crowned roadway,
//! fore slopes, Gaussian snow heaps and ridges, trapezoidal snow-banks and
//! box obstacles. Every generated point carries a ground-truth label.
//!
//! Road coordinates: `u` is the signed offset from the centerline (negative
//! on the left when facing the direction of travel), `s` the distance along
//! the centerline. Transect station is `u + roadway_width / 2`, so the
//! roadway occupies stations `[0, roadway_width]`. A straight road maps
//! `(u, s)` to world `(u, s)`; a curved road bends left around the center
//! `(-R, 0)`.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dem::{station_count, ProfileSample, SurfaceProfile, Transect};
use crate::ingest::{Point, PointCloud};
use crate::kv::{self, Section};

/// Winter depth above which a point is labeled snow.
pub const SNOW_LABEL_MIN_DEPTH_M: f64 = 0.01;
pub const DEFAULT_JITTER_M: f64 = 0.005;
pub const DEFAULT_MARGIN_M: f64 = 2.0;
pub const DEFAULT_FORE_SLOPE_GRADIENT: f64 = 4.0;

const MAX_GRID_POINTS: u64 = 500_000_000;
const WINTER_STREAM_SALT: u64 = 0x5eed_0f_5a0d_1ce5;
const BARE_STREAM_SALT: u64 = 0x0b4e_ea27_6a11_0b0e;

pub const INTENSITY_ROAD: f32 = 0.15;
pub const INTENSITY_SNOW: f32 = 0.7;
pub const INTENSITY_OFF_ROAD: f32 = 0.3;
pub const INTENSITY_OBSTACLE: f32 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("synthetic spec line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epoch {
    Bare,
    Winter,
}

impl FromStr for Epoch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bare" => Ok(Epoch::Bare),
            "winter" => Ok(Epoch::Winter),
            other => Err(format!("unknown epoch `{other}` (bare|winter)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceLabel {
    Road,
    Snow,
    OffRoad,
    Obstacle,
}

impl SurfaceLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceLabel::Road => "road",
            SurfaceLabel::Snow => "snow",
            SurfaceLabel::OffRoad => "off_road",
            SurfaceLabel::Obstacle => "obstacle",
        }
    }
}

/// Gaussian snow deposit. Without `along_extent_m` it is an isotropic heap
/// centered at (`center_station_m`, `center_along_m`); with it, a ridge of
/// constant cross-section spanning `along_extent_m` centered on `center_along_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnowHeap {
    pub center_station_m: f64,
    pub center_along_m: f64,
    pub peak_m: f64,
    pub sigma_m: f64,
    pub along_extent_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankSides {
    Both,
    Left,
    Right,
}

impl FromStr for BankSides {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(BankSides::Both),
            "left" => Ok(BankSides::Left),
            "right" => Ok(BankSides::Right),
            other => Err(format!("unknown bank sides `{other}` (both|left|right)")),
        }
    }
}

/// Trapezoidal snow-banks along the full road length. Inner toes sit
/// `gap_m / 2` from the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankSpec {
    pub gap_m: f64,
    pub height_m: f64,
    pub top_width_m: f64,
    /// Rise per horizontal meter on both faces.
    pub face_gradient: f64,
    pub sides: BankSides,
}

/// Rigid box present in every epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleSpec {
    pub center_station_m: f64,
    pub center_along_m: f64,
    pub across_m: f64,
    pub along_m: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRoadSpec {
    pub roadway_width_m: f64,
    /// Cross slope falling from the centerline on both sides.
    pub crown_slope: f64,
    pub fore_slope_drop_m: f64,
    /// Fall per horizontal meter from the roadway edge down the fore slope.
    pub fore_slope_gradient: f64,
    /// Generated ground beyond each roadway edge.
    pub margin_m: f64,
    pub length_m: f64,
    /// Left-hand curve of this centerline radius; straight when absent.
    pub curve_radius_m: Option<f64>,
    pub snow: Vec<SnowHeap>,
    pub bank: Option<BankSpec>,
    pub obstacles: Vec<ObstacleSpec>,
    /// Points per square meter of plan area.
    pub point_density: f64,
    /// Half-width of uniform vertical noise.
    pub jitter_m: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCloud {
    pub cloud: PointCloud,
    pub labels: Vec<SurfaceLabel>,
}

fn positive(name: &str, v: f64) -> Result<(), SynthError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), SynthError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("{name} must be non-negative, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<(), SynthError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("{name} must be finite")))
    }
}

impl SyntheticRoadSpec {
    /// Flat straight road with default fore slopes, no snow, no noise.
    pub fn new(roadway_width_m: f64, length_m: f64, point_density: f64, seed: u64) -> Self {
        SyntheticRoadSpec {
            roadway_width_m,
            crown_slope: 0.0,
            fore_slope_drop_m: 0.3,
            fore_slope_gradient: DEFAULT_FORE_SLOPE_GRADIENT,
            margin_m: DEFAULT_MARGIN_M,
            length_m,
            curve_radius_m: None,
            snow: Vec::new(),
            bank: None,
            obstacles: Vec::new(),
            point_density,
            jitter_m: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        positive("roadway_width_m", self.roadway_width_m)?;
        non_negative("crown_slope", self.crown_slope)?;
        positive("fore_slope_drop_m", self.fore_slope_drop_m)?;
        positive("fore_slope_gradient", self.fore_slope_gradient)?;
        non_negative("margin_m", self.margin_m)?;
        positive("length_m", self.length_m)?;
        positive("point_density", self.point_density)?;
        non_negative("jitter_m", self.jitter_m)?;
        if let Some(r) = self.curve_radius_m {
            positive("curve_radius_m", r)?;
            if r <= self.half_extent() {
                return Err(SynthError::InvalidSpec(format!(
                    "curve radius {r} must exceed the corridor half-width {}",
                    self.half_extent()
                )));
            }
        }
        for h in &self.snow {
            finite("snow center_station_m", h.center_station_m)?;
            finite("snow center_along_m", h.center_along_m)?;
            positive("snow peak_m", h.peak_m)?;
            positive("snow sigma_m", h.sigma_m)?;
            if let Some(l) = h.along_extent_m {
                positive("snow along_extent_m", l)?;
            }
        }
        if let Some(b) = &self.bank {
            positive("bank gap_m", b.gap_m)?;
            positive("bank height_m", b.height_m)?;
            non_negative("bank top_width_m", b.top_width_m)?;
            positive("bank face_gradient", b.face_gradient)?;
        }
        for o in &self.obstacles {
            finite("obstacle center_station_m", o.center_station_m)?;
            finite("obstacle center_along_m", o.center_along_m)?;
            positive("obstacle across_m", o.across_m)?;
            positive("obstacle along_m", o.along_m)?;
            positive("obstacle height_m", o.height_m)?;
        }
        Ok(())
    }

    /// Distance from the centerline to the outer edge of generated ground.
    pub fn half_extent(&self) -> f64 {
        self.roadway_width_m / 2.0 + self.margin_m
    }

    pub fn road_to_world(&self, u: f64, s: f64) -> (f64, f64) {
        match self.curve_radius_m {
            None => (u, s),
            Some(r) => {
                let theta = s / r;
                (-r + (r + u) * theta.cos(), (r + u) * theta.sin())
            }
        }
    }

    /// Road coordinates of a world point inside the generated corridor.
    pub fn world_to_road(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (u, s) = match self.curve_radius_m {
            None => (x, y),
            Some(r) => {
                let (vx, vy) = (x + r, y);
                let theta = vy.atan2(vx);
                (vx.hypot(vy) - r, r * theta)
            }
        };
        let inside = u.abs() <= self.half_extent() && (0.0..=self.length_m).contains(&s);
        inside.then_some((u, s))
    }

    /// Unit vector pointing toward increasing `u` at distance `s`.
    pub fn across_direction(&self, s: f64) -> (f64, f64) {
        match self.curve_radius_m {
            None => (1.0, 0.0),
            Some(r) => ((s / r).cos(), (s / r).sin()),
        }
    }

    pub fn station_of(&self, u: f64) -> f64 {
        u + self.roadway_width_m / 2.0
    }

    pub fn bare_z(&self, u: f64) -> f64 {
        let half = self.roadway_width_m / 2.0;
        let a = u.abs();
        if a <= half {
            -self.crown_slope * a
        } else {
            let edge = -self.crown_slope * half;
            edge - (self.fore_slope_gradient * (a - half)).min(self.fore_slope_drop_m)
        }
    }

    pub fn bank_depth(&self, u: f64) -> f64 {
        let Some(b) = &self.bank else { return 0.0 };
        let on_side = match b.sides {
            BankSides::Both => true,
            BankSides::Left => u < 0.0,
            BankSides::Right => u > 0.0,
        };
        if !on_side {
            return 0.0;
        }
        let inner = b.gap_m / 2.0;
        let ramp = b.height_m / b.face_gradient;
        let outer = inner + 2.0 * ramp + b.top_width_m;
        let a = u.abs();
        (b.face_gradient * (a - inner))
            .min(b.face_gradient * (outer - a))
            .min(b.height_m)
            .max(0.0)
    }

    /// Total winter snow depth: heaps, ridges and banks.
    pub fn snow_depth(&self, u: f64, s: f64) -> f64 {
        let station = self.station_of(u);
        let heaps: f64 = self
            .snow
            .iter()
            .map(|h| {
                let dx = station - h.center_station_m;
                let two_var = 2.0 * h.sigma_m * h.sigma_m;
                match h.along_extent_m {
                    None => {
                        let ds = s - h.center_along_m;
                        h.peak_m * (-(dx * dx + ds * ds) / two_var).exp()
                    }
                    Some(l) if (s - h.center_along_m).abs() <= l / 2.0 => {
                        h.peak_m * (-(dx * dx) / two_var).exp()
                    }
                    Some(_) => 0.0,
                }
            })
            .sum();
        heaps + self.bank_depth(u)
    }

    fn obstacle_height(&self, u: f64, s: f64) -> Option<f64> {
        let station = self.station_of(u);
        self.obstacles
            .iter()
            .filter(|o| {
                (station - o.center_station_m).abs() <= o.across_m / 2.0
                    && (s - o.center_along_m).abs() <= o.along_m / 2.0
            })
            .map(|o| o.height_m)
            .reduce(f64::max)
    }

    /// Exact surface elevation and label at road coordinates.
    pub fn surface(&self, epoch: Epoch, u: f64, s: f64) -> (f64, SurfaceLabel) {
        let bare = self.bare_z(u);
        if let Some(h) = self.obstacle_height(u, s) {
            return (bare + h, SurfaceLabel::Obstacle);
        }
        let ground = if u.abs() <= self.roadway_width_m / 2.0 {
            SurfaceLabel::Road
        } else {
            SurfaceLabel::OffRoad
        };
        match epoch {
            Epoch::Bare => (bare, ground),
            Epoch::Winter => {
                let depth = self.snow_depth(u, s);
                let label = if depth > SNOW_LABEL_MIN_DEPTH_M {
                    SurfaceLabel::Snow
                } else {
                    ground
                };
                (bare + depth, label)
            }
        }
    }

    /// Exact surface elevation at a world point, if inside the corridor.
    pub fn analytic_z(&self, epoch: Epoch, x: f64, y: f64) -> Option<f64> {
        let (u, s) = self.world_to_road(x, y)?;
        Some(self.surface(epoch, u, s).0)
    }

    /// World-space bounding box of the corridor.
    pub fn world_bounds(&self) -> (f64, f64, f64, f64) {
        let h = self.half_extent();
        match self.curve_radius_m {
            None => (-h, 0.0, h, self.length_m),
            Some(r) => {
                let sweep = self.length_m / r;
                let mut angles = vec![0.0, sweep];
                let mut k = 1.0;
                while k * FRAC_PI_2 < sweep {
                    angles.push(k * FRAC_PI_2);
                    k += 1.0;
                }
                let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
                for &theta in &angles {
                    for u in [-h, h] {
                        let (x, y) = self.road_to_world(u, theta * r);
                        x0 = x0.min(x);
                        y0 = y0.min(y);
                        x1 = x1.max(x);
                        y1 = y1.max(y);
                    }
                }
                (x0, y0, x1, y1)
            }
        }
    }

    /// `count` transects perpendicular to the road at evenly spaced distances,
    /// each starting `pad_m` outside the left roadway edge and ending `pad_m`
    /// outside the right one. Station `pad_m` is the left roadway edge.
    pub fn cross_transects(&self, count: usize, pad_m: f64) -> Vec<Transect> {
        (0..count)
            .map(|i| {
                let s = self.length_m * (i as f64 + 0.5) / count as f64;
                let start = self.road_to_world(-self.roadway_width_m / 2.0 - pad_m, s);
                Transect::new(
                    format!("T{i:03}"),
                    start,
                    self.across_direction(s),
                    self.roadway_width_m + 2.0 * pad_m,
                )
                .expect("valid spec yields valid transects")
            })
            .collect()
    }
}

fn row_rng(seed: u64, salt: u64, row: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(row);
    rng
}

/// Stratified jittered-grid sampling of the corridor. Plan positions depend
/// only on the seed, so both epochs share them; vertical noise is drawn from
/// an epoch-specific stream. Output is identical for any thread count.
pub fn generate_cloud(spec: &SyntheticRoadSpec, epoch: Epoch) -> Result<GeneratedCloud, SynthError> {
    spec.validate()?;
    let (x0, y0, x1, y1) = spec.world_bounds();
    let step = 1.0 / spec.point_density.sqrt();
    let n_x = (((x1 - x0) / step).round() as u64).max(1);
    let n_y = (((y1 - y0) / step).round() as u64).max(1);
    if n_x.saturating_mul(n_y) > MAX_GRID_POINTS {
        return Err(SynthError::InvalidSpec(format!(
            "{} candidate points exceed the generator limit",
            n_x.saturating_mul(n_y)
        )));
    }
    let (step_x, step_y) = ((x1 - x0) / n_x as f64, (y1 - y0) / n_y as f64);
    let z_salt = match epoch {
        Epoch::Bare => BARE_STREAM_SALT,
        Epoch::Winter => WINTER_STREAM_SALT,
    };

    let rows: Vec<Vec<(Point, SurfaceLabel)>> = (0..n_y)
        .into_par_iter()
        .map(|j| {
            let mut xy = row_rng(spec.seed, 0, j);
            let mut zn = row_rng(spec.seed, z_salt, j);
            let mut out = Vec::with_capacity(n_x as usize);
            for i in 0..n_x {
                let x = x0 + (i as f64 + xy.random::<f64>()) * step_x;
                let y = y0 + (j as f64 + xy.random::<f64>()) * step_y;
                let noise = (2.0 * zn.random::<f64>() - 1.0) * spec.jitter_m;
                let Some((u, s)) = spec.world_to_road(x, y) else { continue };
                let (z, label) = spec.surface(epoch, u, s);
                let intensity = match label {
                    SurfaceLabel::Road => INTENSITY_ROAD,
                    SurfaceLabel::Snow => INTENSITY_SNOW,
                    SurfaceLabel::OffRoad => INTENSITY_OFF_ROAD,
                    SurfaceLabel::Obstacle => INTENSITY_OBSTACLE,
                };
                out.push((Point::new(x, y, z + noise).with_intensity(intensity), label));
            }
            out
        })
        .collect();

    let total = rows.iter().map(Vec::len).sum();
    let mut points = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (p, l) in rows.into_iter().flatten() {
        points.push(p);
        labels.push(l);
    }
    Ok(GeneratedCloud {
        cloud: PointCloud::new("local", points),
        labels,
    })
}

/// Closed-form surface sampled at the same stations `extract_profile` uses.
/// Stations outside the corridor are missing.
pub fn analytic_profile(
    spec: &SyntheticRoadSpec,
    epoch: Epoch,
    transect: &Transect,
    spacing_m: f64,
) -> SurfaceProfile {
    let n = station_count(transect.length_m, spacing_m);
    let samples = (0..n)
        .map(|i| {
            let station_m = i as f64 * spacing_m;
            let (x, y) = transect.point_at(station_m);
            ProfileSample {
                station_m,
                elevation_m: spec.analytic_z(epoch, x, y),
            }
        })
        .collect();
    SurfaceProfile {
        transect_id: transect.id.clone(),
        spacing_m,
        samples,
    }
}

const ROAD_KEYS: &[&str] = &[
    "roadway_width_m",
    "crown_slope",
    "fore_slope_drop_m",
    "fore_slope_gradient",
    "margin_m",
    "length_m",
    "curve_radius_m",
    "point_density",
    "jitter_m",
    "seed",
];
const SNOW_KEYS: &[&str] = &["center_station_m", "center_along_m", "peak_m", "sigma_m", "along_extent_m"];
const BANK_KEYS: &[&str] = &["gap_m", "height_m", "top_width_m", "face_gradient", "sides"];
const OBSTACLE_KEYS: &[&str] = &["center_station_m", "center_along_m", "across_m", "along_m", "height_m"];

fn malformed(e: kv::KvError) -> SynthError {
    SynthError::Malformed {
        line: e.line,
        message: e.message,
    }
}

fn optional<T: FromStr>(section: &Section, key: &str) -> Result<Option<T>, SynthError> {
    match section.get(key) {
        None => Ok(None),
        Some(_) => section.parse(key).map(Some).map_err(malformed),
    }
}

/// Parses a spec file: one `[road]` section, any number of `[snow]` and
/// `[obstacle]` sections, and at most one `[bank]`.
pub fn parse_synth_spec(text: &str) -> Result<SyntheticRoadSpec, SynthError> {
    let sections = kv::parse_document(text).map_err(malformed)?;
    let mut road: Option<&Section> = None;
    let mut snow = Vec::new();
    let mut bank = None;
    let mut obstacles = Vec::new();
    for section in &sections {
        let dup = |what: &str| SynthError::Malformed {
            line: section.line,
            message: format!("duplicate [{what}] section"),
        };
        match section.name.as_str() {
            "road" => {
                if road.is_some() {
                    return Err(dup("road"));
                }
                section.check_keys(ROAD_KEYS).map_err(malformed)?;
                road = Some(section);
            }
            "snow" => {
                section.check_keys(SNOW_KEYS).map_err(malformed)?;
                snow.push(SnowHeap {
                    center_station_m: section.parse("center_station_m").map_err(malformed)?,
                    center_along_m: section.parse("center_along_m").map_err(malformed)?,
                    peak_m: section.parse("peak_m").map_err(malformed)?,
                    sigma_m: section.parse("sigma_m").map_err(malformed)?,
                    along_extent_m: optional(section, "along_extent_m")?,
                });
            }
            "bank" => {
                if bank.is_some() {
                    return Err(dup("bank"));
                }
                section.check_keys(BANK_KEYS).map_err(malformed)?;
                let sides = match section.get("sides") {
                    None => BankSides::Both,
                    Some(e) => e.value.parse().map_err(|message| SynthError::Malformed {
                        line: e.line,
                        message,
                    })?,
                };
                bank = Some(BankSpec {
                    gap_m: section.parse("gap_m").map_err(malformed)?,
                    height_m: section.parse("height_m").map_err(malformed)?,
                    top_width_m: section.parse_or("top_width_m", 0.5).map_err(malformed)?,
                    face_gradient: section.parse_or("face_gradient", 1.0).map_err(malformed)?,
                    sides,
                });
            }
            "obstacle" => {
                section.check_keys(OBSTACLE_KEYS).map_err(malformed)?;
                obstacles.push(ObstacleSpec {
                    center_station_m: section.parse("center_station_m").map_err(malformed)?,
                    center_along_m: section.parse("center_along_m").map_err(malformed)?,
                    across_m: section.parse("across_m").map_err(malformed)?,
                    along_m: section.parse("along_m").map_err(malformed)?,
                    height_m: section.parse("height_m").map_err(malformed)?,
                });
            }
            other => {
                return Err(SynthError::Malformed {
                    line: section.line,
                    message: format!("unknown section [{other}]"),
                })
            }
        }
    }
    let road = road.ok_or_else(|| SynthError::InvalidSpec("missing [road] section".into()))?;
    let spec = SyntheticRoadSpec {
        roadway_width_m: road.parse("roadway_width_m").map_err(malformed)?,
        crown_slope: road.parse_or("crown_slope", 0.0).map_err(malformed)?,
        fore_slope_drop_m: road.parse_or("fore_slope_drop_m", 0.3).map_err(malformed)?,
        fore_slope_gradient: road
            .parse_or("fore_slope_gradient", DEFAULT_FORE_SLOPE_GRADIENT)
            .map_err(malformed)?,
        margin_m: road.parse_or("margin_m", DEFAULT_MARGIN_M).map_err(malformed)?,
        length_m: road.parse("length_m").map_err(malformed)?,
        curve_radius_m: optional(road, "curve_radius_m")?,
        snow,
        bank,
        obstacles,
        point_density: road.parse("point_density").map_err(malformed)?,
        jitter_m: road.parse_or("jitter_m", DEFAULT_JITTER_M).map_err(malformed)?,
        seed: road.parse_or("seed", 0).map_err(malformed)?,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heap(station: f64, along: f64) -> SnowHeap {
        SnowHeap {
            center_station_m: station,
            center_along_m: along,
            peak_m: 0.4,
            sigma_m: 0.5,
            along_extent_m: None,
        }
    }

    #[test]
    fn point_count_matches_density() {
        let spec = SyntheticRoadSpec::new(8.0, 50.0, 100.0, 1);
        let g = generate_cloud(&spec, Epoch::Bare).unwrap();
        let road = g.labels.iter().filter(|l| **l == SurfaceLabel::Road).count() as f64;
        assert!((road - 40_000.0).abs() / 40_000.0 < 0.01, "{road}");
        assert_eq!(g.labels.len(), g.cloud.len());
    }

    #[test]
    fn bare_has_no_snow() {
        let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 50.0, 2);
        spec.snow.push(heap(4.0, 10.0));
        let bare = generate_cloud(&spec, Epoch::Bare).unwrap();
        assert!(!bare.labels.contains(&SurfaceLabel::Snow));
        let winter = generate_cloud(&spec, Epoch::Winter).unwrap();
        assert!(winter.labels.contains(&SurfaceLabel::Snow));
    }

    #[test]
    fn winter_minus_bare_is_gaussian_sum() {
        let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 50.0, 3);
        spec.crown_slope = 0.03;
        spec.snow.push(heap(3.0, 5.0));
        spec.snow.push(SnowHeap {
            sigma_m: 0.3,
            along_extent_m: Some(8.0),
            ..heap(6.5, 12.0)
        });
        for k in 0..200 {
            let x = -4.0 + 8.0 * (k as f64 * 0.6180339887).fract();
            let y = 20.0 * (k as f64 * 0.7548776662).fract();
            let d = spec.analytic_z(Epoch::Winter, x, y).unwrap()
                - spec.analytic_z(Epoch::Bare, x, y).unwrap();
            let st = x + 4.0;
            let mut expect = 0.4 * (-((st - 3.0).powi(2) + (y - 5.0).powi(2)) / 0.5).exp();
            if (y - 12.0).abs() <= 4.0 {
                expect += 0.4 * (-(st - 6.5).powi(2) / 0.18).exp();
            }
            assert!((d - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_shared_plan_positions() {
        let mut spec = SyntheticRoadSpec::new(6.0, 10.0, 80.0, 42);
        spec.jitter_m = 0.005;
        spec.snow.push(heap(3.0, 5.0));
        let a = generate_cloud(&spec, Epoch::Winter).unwrap();
        let b = generate_cloud(&spec, Epoch::Winter).unwrap();
        assert_eq!(a, b);
        let bare = generate_cloud(&spec, Epoch::Bare).unwrap();
        assert_eq!(a.cloud.len(), bare.cloud.len());
        assert!(a
            .cloud
            .points
            .iter()
            .zip(&bare.cloud.points)
            .all(|(p, q)| p.x == q.x && p.y == q.y));
        let mut other = spec.clone();
        other.seed = 43;
        assert_ne!(generate_cloud(&other, Epoch::Winter).unwrap(), a);
    }

    #[test]
    fn jitter_bounded() {
        let mut spec = SyntheticRoadSpec::new(6.0, 10.0, 80.0, 5);
        spec.jitter_m = 0.005;
        let g = generate_cloud(&spec, Epoch::Bare).unwrap();
        for p in &g.cloud.points {
            let exact = spec.analytic_z(Epoch::Bare, p.x, p.y).unwrap();
            assert!((p.z - exact).abs() <= 0.005 + 1e-12);
        }
    }

    #[test]
    fn crown_and_fore_slope() {
        let mut spec = SyntheticRoadSpec::new(8.0, 10.0, 10.0, 0);
        spec.crown_slope = 0.03;
        assert_eq!(spec.bare_z(0.0), 0.0);
        assert!((spec.bare_z(4.0) + 0.12).abs() < 1e-12);
        assert!((spec.bare_z(-4.05) + 0.12 + 0.2).abs() < 1e-12);
        assert!((spec.bare_z(5.0) + 0.12 + 0.3).abs() < 1e-12);
    }

    #[test]
    fn bank_profile() {
        let mut spec = SyntheticRoadSpec::new(8.0, 10.0, 10.0, 0);
        spec.bank = Some(BankSpec {
            gap_m: 6.0,
            height_m: 0.4,
            top_width_m: 0.5,
            face_gradient: 1.0,
            sides: BankSides::Right,
        });
        assert_eq!(spec.bank_depth(3.0), 0.0);
        assert!((spec.bank_depth(3.2) - 0.2).abs() < 1e-12);
        assert_eq!(spec.bank_depth(3.6), 0.4);
        assert!((spec.bank_depth(3.9) - 0.4).abs() < 1e-12);
        assert!((spec.bank_depth(4.1) - 0.2).abs() < 1e-12);
        assert_eq!(spec.bank_depth(5.0), 0.0);
        assert_eq!(spec.bank_depth(-3.6), 0.0);
    }

    #[test]
    fn curved_mapping_round_trips() {
        let mut spec = SyntheticRoadSpec::new(6.0, 40.0, 10.0, 0);
        spec.curve_radius_m = Some(30.0);
        for (u, s) in [(0.0, 0.0), (-4.0, 10.0), (3.5, 39.0), (1.0, 20.0)] {
            let (x, y) = spec.road_to_world(u, s);
            let (u2, s2) = spec.world_to_road(x, y).unwrap();
            assert!((u - u2).abs() < 1e-9 && (s - s2).abs() < 1e-9);
        }
        let g = generate_cloud(&spec, Epoch::Bare).unwrap();
        let area = 2.0 * spec.half_extent() * spec.length_m;
        assert!((g.cloud.len() as f64 - area * 10.0).abs() / (area * 10.0) < 0.02);
    }

    #[test]
    fn analytic_profile_tent() {
        let mut spec = SyntheticRoadSpec::new(8.0, 10.0, 10.0, 0);
        spec.crown_slope = 0.03;
        let t = &spec.cross_transects(1, 0.0)[0];
        let p = analytic_profile(&spec, Epoch::Bare, t, 0.5);
        assert_eq!(p.len(), 17);
        let zs: Vec<f64> = p.elevations().map(Option::unwrap).collect();
        let apex = zs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(p.samples[apex].station_m, 4.0);
        assert!((zs[0] - zs[16]).abs() < 1e-12);
    }

    #[test]
    fn parses_spec_file() {
        let text = "\
[road]
roadway_width_m = 8.0
length_m = 50
point_density = 100
crown_slope = 0.03
seed = 7

[snow]
center_station_m = 3.0
center_along_m = 25
peak_m = 0.4
sigma_m = 0.5

[bank]
gap_m = 6
height_m = 0.4
sides = left

[obstacle]
center_station_m = 4
center_along_m = 10
across_m = 1
along_m = 1
height_m = 0.5
";
        let spec = parse_synth_spec(text).unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.jitter_m, DEFAULT_JITTER_M);
        assert_eq!(spec.snow.len(), 1);
        assert_eq!(spec.bank.unwrap().sides, BankSides::Left);
        assert_eq!(spec.obstacles[0].height_m, 0.5);

        assert!(parse_synth_spec("[snow]\npeak_m = 1\n").is_err());
        let err = parse_synth_spec("[road]\nroadway_width_m = 8\nlength_m = 1\npoint_density = 1\nbogus = 1\n");
        assert!(matches!(err, Err(SynthError::Malformed { line: 5, .. })));
        assert!(matches!(
            parse_synth_spec("[road]\nroadway_width_m = -8\nlength_m = 1\npoint_density = 1\n"),
            Err(SynthError::InvalidSpec(_))
        ));
    }
}
