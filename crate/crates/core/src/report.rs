//! Report serialization: width records, inspection reports and transect
//! input files. Measured quantities are written with exactly three decimals
//! (millimeters); parameters keep their full value so a report can be
//! reproduced from its own parameter block.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::analysis::WidthMeasurement;
use crate::dem::Transect;

/// Number serialized with exactly three decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed3(pub f64);

impl Fixed3 {
    pub fn text(self) -> String {
        if !self.0.is_finite() {
            return "null".into();
        }
        let s = format!("{:.3}", self.0);
        // -0.000 and friends
        if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
            "0.000".into()
        } else {
            s
        }
    }
}

impl Serialize for Fixed3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(self.text()).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearSpan {
    pub start_station_m: Fixed3,
    pub end_station_m: Fixed3,
}

/// One transect's width measurement labeled with its segment and epochs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthRecord {
    pub segment: String,
    pub winter_epoch: String,
    pub reference_epoch: String,
    pub transect_id: String,
    pub effective_width_m: Fixed3,
    pub design_roadway_width_m: Fixed3,
    pub deficit_m: Fixed3,
    pub clear_span: Option<ClearSpan>,
    pub fully_blocked: bool,
}

impl WidthRecord {
    pub fn new(m: &WidthMeasurement, segment: &str, winter_epoch: &str, reference_epoch: &str) -> Self {
        WidthRecord {
            segment: segment.into(),
            winter_epoch: winter_epoch.into(),
            reference_epoch: reference_epoch.into(),
            transect_id: m.transect_id.clone(),
            effective_width_m: Fixed3(m.effective_width_m),
            design_roadway_width_m: Fixed3(m.design_roadway_width_m),
            deficit_m: Fixed3(m.deficit_m),
            clear_span: m.clear_span.map(|(s, e)| ClearSpan {
                start_station_m: Fixed3(s),
                end_station_m: Fixed3(e),
            }),
            fully_blocked: m.fully_blocked,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLabels {
    pub reference: String,
    pub winter: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkingCount {
    pub epoch: String,
    pub clusters: usize,
}

/// Every threshold and setting used by an inspection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParameters {
    pub design_cross_section: String,
    pub cell_size_m: f64,
    pub aggregator: String,
    pub fill_radius_cells: usize,
    pub profile_spacing_m: f64,
    pub min_depth_m: f64,
    pub roadway_start_m: f64,
    pub volume_min_depth_m: f64,
    pub marking_threshold: f64,
    pub normalize_low_pct: f64,
    pub normalize_high_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectionReport {
    pub segment: String,
    pub epochs: EpochLabels,
    pub parameters: ReportParameters,
    pub snow_volume_m3: Fixed3,
    pub widths: Vec<WidthRecord>,
    pub marking_clusters: Vec<MarkingCount>,
}

impl InspectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn widths_json(records: &[WidthRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("widths serialize");
    s.push('\n');
    s
}

pub fn widths_csv(records: &[WidthRecord]) -> String {
    let mut out = String::from(
        "transect_id,effective_width_m,design_roadway_width_m,deficit_m,clear_start_m,clear_end_m,fully_blocked\n",
    );
    for r in records {
        let (s, e) = r
            .clear_span
            .as_ref()
            .map_or((String::new(), String::new()), |c| {
                (c.start_station_m.text(), c.end_station_m.text())
            });
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.transect_id,
            r.effective_width_m.text(),
            r.design_roadway_width_m.text(),
            r.deficit_m.text(),
            s,
            e,
            r.fully_blocked
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("transect file line {line}: {message}")]
pub struct TransectFileError {
    pub line: usize,
    pub message: String,
}

pub const TRANSECT_HEADER: &str = "id,x,y,dx,dy,length";

/// Parses `id,x,y,dx,dy,length` rows (header required). Directions are
/// normalized; ids must be unique.
pub fn parse_transects_csv(text: &str) -> Result<Vec<Transect>, TransectFileError> {
    let err = |line: usize, message: String| TransectFileError { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, l)) if l.replace(' ', "") == TRANSECT_HEADER => {}
        Some((n, _)) => return Err(err(n, format!("expected header `{TRANSECT_HEADER}`"))),
        None => return Err(err(1, "empty transect file".into())),
    }
    let mut out: Vec<Transect> = Vec::new();
    for (n, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(err(n, format!("expected 6 fields, found {}", fields.len())));
        }
        let mut nums = [0.0; 5];
        for (k, f) in fields[1..].iter().enumerate() {
            nums[k] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(n, format!("`{f}` is not a finite number")))?;
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(err(n, "empty transect id".into()));
        }
        if out.iter().any(|t| t.id == id) {
            return Err(err(n, format!("duplicate transect id `{id}`")));
        }
        let t = Transect::new(id, (nums[0], nums[1]), (nums[2], nums[3]), nums[4])
            .map_err(|e| err(n, e.to_string()))?;
        out.push(t);
    }
    Ok(out)
}

pub fn format_transects_csv(transects: &[Transect]) -> String {
    let mut out = format!("{TRANSECT_HEADER}\n");
    for t in transects {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t.id, t.start.0, t.start.1, t.direction.0, t.direction.1, t.length_m
        )
        .unwrap();
    }
    out
}
