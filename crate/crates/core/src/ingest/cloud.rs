//! Point clouds and their two file formats.
//!
//! `xyz_ascii`:
//! ```text
//! # crs=<label> imax=<number>
//! x y z [intensity [beam [t_ns]]]
//! ```
//! Raw intensities are divided by `imax` on load. Every row carries the same
//! number of columns.
//!
//! `pointrec_binary` (little-endian):
//! ```text
//! "PTR1" | u32 crs_len | crs bytes | u64 count | u32 field_mask
//! per point: f64 x, f64 y, f64 z, [f32 intensity], [u16 beam], [u64 t_ns]
//! ```
//! Mask bit 0 = intensity (already normalized), bit 1 = beam, bit 2 = t_ns.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::IngestError;

pub const PTR_MAGIC: &[u8; 4] = b"PTR1";
const FIELD_INTENSITY: u32 = 1;
const FIELD_BEAM: u32 = 2;
const FIELD_TIME: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: Option<f32>,
    pub beam: Option<u16>,
    pub t_ns: Option<u64>,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point {
            x,
            y,
            z,
            ..Default::default()
        }
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = Some(intensity);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub crs_label: String,
}

/// Axis-aligned XY bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds2 {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds2 {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

impl PointCloud {
    pub fn new(crs_label: impl Into<String>, points: Vec<Point>) -> Self {
        PointCloud {
            points,
            crs_label: crs_label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Option<Bounds2> {
        let first = self.points.first()?;
        let mut b = Bounds2 {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in &self.points[1..] {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(format!("point {i} has non-finite coordinates"));
            }
            if let Some(v) = p.intensity {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("point {i} intensity {v} outside [0,1]"));
                }
            }
        }
        Ok(())
    }

    fn field_mask(&self) -> Result<u32, IngestError> {
        let mask_of = |p: &Point| {
            (if p.intensity.is_some() { FIELD_INTENSITY } else { 0 })
                | (if p.beam.is_some() { FIELD_BEAM } else { 0 })
                | (if p.t_ns.is_some() { FIELD_TIME } else { 0 })
        };
        let mask = self.points.first().map(mask_of).unwrap_or(0);
        if self.points.iter().any(|p| mask_of(p) != mask) {
            return Err(cloud_error(None, "points carry inconsistent optional fields"));
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    PointrecBinary,
}

impl CloudFormat {
    /// `.xyz`/`.txt` are ASCII, `.ptr` is binary.
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") | Some("txt") => Ok(CloudFormat::XyzAscii),
            Some("ptr") => Ok(CloudFormat::PointrecBinary),
            _ => Err(IngestError::UnknownFormat(path.display().to_string())),
        }
    }
}

impl FromStr for CloudFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, IngestError> {
        match s {
            "xyz_ascii" => Ok(CloudFormat::XyzAscii),
            "pointrec_binary" => Ok(CloudFormat::PointrecBinary),
            other => Err(IngestError::UnknownFormat(other.to_string())),
        }
    }
}

fn cloud_error(line: Option<usize>, msg: impl Into<String>) -> IngestError {
    IngestError::MalformedCloudFile {
        line,
        message: msg.into(),
    }
}

pub fn load_point_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    match format {
        CloudFormat::XyzAscii => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| cloud_error(None, "file is not valid UTF-8"))?;
            parse_xyz(text)
        }
        CloudFormat::PointrecBinary => decode_pointrec(&bytes),
    }
}

pub fn save_point_cloud(
    cloud: &PointCloud,
    path: &Path,
    format: CloudFormat,
) -> Result<(), IngestError> {
    let bytes = match format {
        CloudFormat::XyzAscii => format_xyz(cloud)?.into_bytes(),
        CloudFormat::PointrecBinary => encode_pointrec(cloud)?,
    };
    let io = |e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    out.write_all(&bytes).map_err(io)?;
    out.flush().map_err(io)
}

fn parse_finite(tok: &str, line: usize, what: &str) -> Result<f64, IngestError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| cloud_error(Some(line), format!("{what} `{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(cloud_error(Some(line), format!("{what} `{tok}` is not finite")));
    }
    Ok(v)
}

pub fn parse_xyz(text: &str) -> Result<PointCloud, IngestError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| cloud_error(None, "missing header line"))?;
    let header_line = header_idx + 1;
    let body = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| cloud_error(Some(header_line), "header must start with `#`"))?;
    let mut crs = None;
    let mut imax = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("crs=") {
            crs = Some(v.to_string());
        } else if let Some(v) = tok.strip_prefix("imax=") {
            let m = parse_finite(v, header_line, "imax")?;
            if m <= 0.0 {
                return Err(cloud_error(Some(header_line), "imax must be positive"));
            }
            imax = Some(m);
        }
    }
    let crs_label = crs.ok_or_else(|| cloud_error(Some(header_line), "header lacks `crs=`"))?;
    let imax = imax.ok_or_else(|| cloud_error(Some(header_line), "header lacks `imax=`"))?;

    let mut points = Vec::new();
    let mut columns = None;
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !(3..=6).contains(&toks.len()) {
            return Err(cloud_error(Some(line), format!("expected 3-6 columns, found {}", toks.len())));
        }
        match columns {
            None => columns = Some(toks.len()),
            Some(n) if n != toks.len() => {
                return Err(cloud_error(Some(line), format!("expected {n} columns, found {}", toks.len())))
            }
            _ => {}
        }
        let mut p = Point::new(
            parse_finite(toks[0], line, "x")?,
            parse_finite(toks[1], line, "y")?,
            parse_finite(toks[2], line, "z")?,
        );
        if let Some(tok) = toks.get(3) {
            let v = parse_finite(tok, line, "intensity")? / imax;
            if !(0.0..=1.0).contains(&v) {
                return Err(cloud_error(Some(line), format!("intensity `{tok}` outside [0, imax]")));
            }
            p.intensity = Some(v as f32);
        }
        if let Some(tok) = toks.get(4) {
            p.beam = Some(tok.parse().map_err(|_| cloud_error(Some(line), format!("bad beam `{tok}`")))?);
        }
        if let Some(tok) = toks.get(5) {
            p.t_ns = Some(tok.parse().map_err(|_| cloud_error(Some(line), format!("bad t_ns `{tok}`")))?);
        }
        points.push(p);
    }
    Ok(PointCloud { points, crs_label })
}

/// Writes with `imax=1`, so normalized intensities round-trip exactly.
pub fn format_xyz(cloud: &PointCloud) -> Result<String, IngestError> {
    check_writable(cloud)?;
    cloud.field_mask()?;
    let mut out = String::with_capacity(cloud.len() * 48 + 32);
    let _ = writeln!(out, "# crs={} imax=1", cloud.crs_label);
    for p in &cloud.points {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(i) = p.intensity {
            let _ = write!(out, " {i}");
        }
        if let Some(b) = p.beam {
            let _ = write!(out, " {b}");
        }
        if let Some(t) = p.t_ns {
            let _ = write!(out, " {t}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn check_writable(cloud: &PointCloud) -> Result<(), IngestError> {
    if cloud.crs_label.chars().any(char::is_whitespace) {
        return Err(cloud_error(None, "crs label must not contain whitespace"));
    }
    cloud.validate().map_err(|m| cloud_error(None, m))
}

pub fn encode_pointrec(cloud: &PointCloud) -> Result<Vec<u8>, IngestError> {
    check_writable(cloud)?;
    let mask = cloud.field_mask()?;
    let per_point = 24
        + if mask & FIELD_INTENSITY != 0 { 4 } else { 0 }
        + if mask & FIELD_BEAM != 0 { 2 } else { 0 }
        + if mask & FIELD_TIME != 0 { 8 } else { 0 };
    let crs = cloud.crs_label.as_bytes();
    let mut out = Vec::with_capacity(20 + crs.len() + per_point * cloud.len());
    out.extend_from_slice(PTR_MAGIC);
    out.extend_from_slice(&(crs.len() as u32).to_le_bytes());
    out.extend_from_slice(crs);
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    out.extend_from_slice(&mask.to_le_bytes());
    for p in &cloud.points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
        if let Some(i) = p.intensity {
            out.extend_from_slice(&i.to_le_bytes());
        }
        if let Some(b) = p.beam {
            out.extend_from_slice(&b.to_le_bytes());
        }
        if let Some(t) = p.t_ns {
            out.extend_from_slice(&t.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IngestError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| cloud_error(None, format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], IngestError> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}

pub fn decode_pointrec(data: &[u8]) -> Result<PointCloud, IngestError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4).ok() != Some(PTR_MAGIC.as_slice()) {
        return Err(cloud_error(None, "missing PTR1 magic"));
    }
    let crs_len = u32::from_le_bytes(r.array()?) as usize;
    let crs_label = std::str::from_utf8(r.take(crs_len)?)
        .map_err(|_| cloud_error(None, "crs label is not UTF-8"))?
        .to_string();
    let count = u64::from_le_bytes(r.array()?);
    let mask = u32::from_le_bytes(r.array()?);
    if mask & !(FIELD_INTENSITY | FIELD_BEAM | FIELD_TIME) != 0 {
        return Err(cloud_error(None, format!("unknown field mask bits {mask:#x}")));
    }
    let per_point = 24
        + if mask & FIELD_INTENSITY != 0 { 4 } else { 0 }
        + if mask & FIELD_BEAM != 0 { 2 } else { 0 }
        + if mask & FIELD_TIME != 0 { 8 } else { 0 };
    let remaining = (data.len() - r.pos) as u64;
    if count.checked_mul(per_point as u64) != Some(remaining) {
        return Err(cloud_error(
            None,
            format!("{count} points need {} bytes, found {remaining}", count.saturating_mul(per_point as u64)),
        ));
    }
    let mut points = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut p = Point::new(
            f64::from_le_bytes(r.array()?),
            f64::from_le_bytes(r.array()?),
            f64::from_le_bytes(r.array()?),
        );
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(cloud_error(None, format!("point {i} has non-finite coordinates")));
        }
        if mask & FIELD_INTENSITY != 0 {
            let v = f32::from_le_bytes(r.array()?);
            if !(0.0..=1.0).contains(&v) {
                return Err(cloud_error(None, format!("point {i} intensity {v} outside [0,1]")));
            }
            p.intensity = Some(v);
        }
        if mask & FIELD_BEAM != 0 {
            p.beam = Some(u16::from_le_bytes(r.array()?));
        }
        if mask & FIELD_TIME != 0 {
            p.t_ns = Some(u64::from_le_bytes(r.array()?));
        }
        points.push(p);
    }
    Ok(PointCloud { points, crs_label })
}
