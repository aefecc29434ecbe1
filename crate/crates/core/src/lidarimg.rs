//! Panoramic intensity images from multi-beam lidar frames: per-beam column
//! destaggering, percentile normalization, 16-bit PGM export and frame import
//! from record envelopes.
//!
//! Shift convention: destaggering rotates row `r` left by `pixel_shift[r]`,
//! so output column `c` takes input column `(c + shift) mod n_cols`.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{Channel, SensorRecord};

pub const DEFAULT_LOW_PERCENTILE: f64 = 1.0;
pub const DEFAULT_HIGH_PERCENTILE: f64 = 99.0;

#[derive(Debug, Error)]
pub enum LidarImageError {
    #[error("beam {beam} shift {shift} is out of range for {n_cols} columns")]
    ShiftOutOfRange { beam: usize, shift: i32, n_cols: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid percentiles {low}/{high}")]
    InvalidPercentiles { low: f64, high: f64 },
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error("I/O failure on {}: {source}", path.display())]
    IoFailure {
        path: std::path::PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLidarFrame {
    pub n_beams: usize,
    pub n_cols: usize,
    /// Row-major raw counts, one row per beam.
    pub intensities: Vec<u32>,
    pub pixel_shift: Vec<i32>,
}

impl RawLidarFrame {
    pub fn new(
        n_beams: usize,
        n_cols: usize,
        intensities: Vec<u32>,
        pixel_shift: Vec<i32>,
    ) -> Result<Self, LidarImageError> {
        let frame = RawLidarFrame {
            n_beams,
            n_cols,
            intensities,
            pixel_shift,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<(), LidarImageError> {
        if self.n_beams == 0 || self.n_cols == 0 {
            return Err(LidarImageError::InvalidFrame("empty frame".into()));
        }
        if self.intensities.len() != self.n_beams * self.n_cols {
            return Err(LidarImageError::InvalidFrame(format!(
                "{} intensities for {}x{}",
                self.intensities.len(),
                self.n_beams,
                self.n_cols
            )));
        }
        if self.pixel_shift.len() != self.n_beams {
            return Err(LidarImageError::InvalidFrame(format!(
                "{} shifts for {} beams",
                self.pixel_shift.len(),
                self.n_beams
            )));
        }
        for (beam, &shift) in self.pixel_shift.iter().enumerate() {
            if shift.unsigned_abs() as usize >= self.n_cols {
                return Err(LidarImageError::ShiftOutOfRange {
                    beam,
                    shift,
                    n_cols: self.n_cols,
                });
            }
        }
        Ok(())
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.intensities[r * self.n_cols..(r + 1) * self.n_cols]
    }
}

fn rotate_rows(frame: &RawLidarFrame, sign: i64) -> Result<RawLidarFrame, LidarImageError> {
    frame.validate()?;
    let n = frame.n_cols;
    let mut out = vec![0u32; frame.intensities.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        let shift = (sign * frame.pixel_shift[r] as i64).rem_euclid(n as i64) as usize;
        let src = frame.row(r);
        row[..n - shift].copy_from_slice(&src[shift..]);
        row[n - shift..].copy_from_slice(&src[..shift]);
    });
    Ok(RawLidarFrame {
        n_beams: frame.n_beams,
        n_cols: n,
        intensities: out,
        pixel_shift: vec![0; frame.n_beams],
    })
}

/// Aligns every beam to common azimuth columns; output shifts are zero.
pub fn destagger(frame: &RawLidarFrame) -> Result<RawLidarFrame, LidarImageError> {
    rotate_rows(frame, 1)
}

/// Inverse of [`destagger`]: rotates each row right by its shift. The output
/// keeps zero shifts; reattach the shift vector to destagger it again.
pub fn restagger(frame: &RawLidarFrame) -> Result<RawLidarFrame, LidarImageError> {
    rotate_rows(frame, -1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major values in `[0, 1]`.
    pub values: Vec<f64>,
}

impl IntensityImage {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self, LidarImageError> {
        if values.len() != n_rows * n_cols {
            return Err(LidarImageError::InvalidFrame(format!(
                "{} values for {n_rows}x{n_cols}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(LidarImageError::InvalidFrame("value outside [0, 1]".into()));
        }
        Ok(IntensityImage {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols + c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub image: IntensityImage,
    /// Set when the percentile range collapses; every value is then 0.5.
    pub degenerate: bool,
    pub low_value: f64,
    pub high_value: f64,
}

/// Linear-interpolated percentile of sorted data (`p` in `[0, 100]`).
pub fn percentile(sorted: &[u32], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let t = rank - lo as f64;
    sorted[lo] as f64 * (1.0 - t) + sorted[hi] as f64 * t
}

/// Maps the `low_pct` and `high_pct` percentiles of the raw counts to 0 and 1,
/// clamping values outside.
pub fn normalize(frame: &RawLidarFrame, low_pct: f64, high_pct: f64) -> Result<Normalized, LidarImageError> {
    if !(0.0..100.0).contains(&low_pct) || !(high_pct > low_pct && high_pct <= 100.0) {
        return Err(LidarImageError::InvalidPercentiles {
            low: low_pct,
            high: high_pct,
        });
    }
    frame.validate()?;
    let mut sorted = frame.intensities.clone();
    sorted.par_sort_unstable();
    let lo = percentile(&sorted, low_pct);
    let hi = percentile(&sorted, high_pct);
    let degenerate = hi <= lo;
    let values = frame
        .intensities
        .par_iter()
        .map(|&v| {
            if degenerate {
                0.5
            } else {
                ((v as f64 - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(Normalized {
        image: IntensityImage {
            n_rows: frame.n_beams,
            n_cols: frame.n_cols,
            values,
        },
        degenerate,
        low_value: lo,
        high_value: hi,
    })
}

/// Binary 16-bit PGM (P5, big-endian samples), `round(v · 65535)`.
pub fn encode_pgm(image: &IntensityImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", image.n_cols, image.n_rows).into_bytes();
    out.reserve(image.values.len() * 2);
    for &v in &image.values {
        let px = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&px.to_be_bytes());
    }
    out
}

pub fn decode_pgm(data: &[u8]) -> Result<IntensityImage, LidarImageError> {
    let bad = |m: &str| LidarImageError::MalformedPgm(m.into());
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&data[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if tokens[0] != "P5" {
        return Err(bad("not a P5 file"));
    }
    let n_cols: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let n_rows: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let maxval: u32 = tokens[3].parse().map_err(|_| bad("bad maxval"))?;
    if maxval != 65535 {
        return Err(bad("only 16-bit (maxval 65535) images are supported"));
    }
    let raster = data.get(pos..).ok_or_else(|| bad("missing raster"))?;
    if raster.len() != n_rows * n_cols * 2 {
        return Err(bad("raster size does not match the header"));
    }
    let values = raster
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
        .collect();
    Ok(IntensityImage {
        n_rows,
        n_cols,
        values,
    })
}

pub fn write_pgm(image: &IntensityImage, path: &Path) -> Result<(), LidarImageError> {
    fs::write(path, encode_pgm(image)).map_err(|source| LidarImageError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_pgm(path: &Path) -> Result<IntensityImage, LidarImageError> {
    let data = fs::read(path).map_err(|source| LidarImageError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&data)
}

fn as_count(v: f64, what: &str) -> Result<i64, LidarImageError> {
    if v.fract() != 0.0 || !v.is_finite() || v.abs() > 1e15 {
        return Err(LidarImageError::InvalidFrame(format!("{what} value {v} is not an integer")));
    }
    Ok(v as i64)
}

fn array<'a>(record: &'a SensorRecord, name: &str) -> Result<&'a [f64], LidarImageError> {
    match record.payload.get(name) {
        Some(Channel::Array(a)) => Ok(a),
        Some(_) => Err(LidarImageError::InvalidFrame(format!("channel `{name}` is not an array"))),
        None => Err(LidarImageError::InvalidFrame(format!("missing channel `{name}`"))),
    }
}

/// Frame from an envelope with channels `intensity`, `shape` (`[beams, cols]`)
/// and `pixel_shift`.
pub fn frame_from_record(record: &SensorRecord) -> Result<RawLidarFrame, LidarImageError> {
    let shape = array(record, "shape")?;
    if shape.len() != 2 {
        return Err(LidarImageError::InvalidFrame("shape must hold 2 values".into()));
    }
    let n_beams = as_count(shape[0], "shape")?;
    let n_cols = as_count(shape[1], "shape")?;
    if n_beams <= 0 || n_cols <= 0 {
        return Err(LidarImageError::InvalidFrame("shape must be positive".into()));
    }
    let intensities = array(record, "intensity")?
        .iter()
        .map(|&v| {
            let c = as_count(v, "intensity")?;
            u32::try_from(c).map_err(|_| LidarImageError::InvalidFrame(format!("intensity {v} out of range")))
        })
        .collect::<Result<_, _>>()?;
    let pixel_shift = array(record, "pixel_shift")?
        .iter()
        .map(|&v| {
            let s = as_count(v, "pixel_shift")?;
            i32::try_from(s).map_err(|_| LidarImageError::InvalidFrame(format!("shift {v} out of range")))
        })
        .collect::<Result<_, _>>()?;
    RawLidarFrame::new(n_beams as usize, n_cols as usize, intensities, pixel_shift)
}

pub fn frame_to_record(frame: &RawLidarFrame, timestamp_ns: u64, sensor_id: &str) -> SensorRecord {
    SensorRecord::new(timestamp_ns, sensor_id)
        .with("intensity", Channel::Array(frame.intensities.iter().map(|&v| v as f64).collect()))
        .with("shape", Channel::Array(vec![frame.n_beams as f64, frame.n_cols as f64]))
        .with("pixel_shift", Channel::Array(frame.pixel_shift.iter().map(|&v| v as f64).collect()))
}
