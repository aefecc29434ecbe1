//! Road cross-section design notation and per-segment road metadata.
//!
//! Notation grammar (whitespace-insensitive on input, canonical on output):
//!
//! ```text
//! [<int> " x "] "(" <roadway> "/" <lanes> ")" [" + " ("KA" | "TK" | "BK")] [" + R(" <apron> "," <diameter> ")"]
//! ```
//!
//! `<roadway>` is the combined width of travel lanes and shoulders for one
//! carriageway, `<lanes>` the combined travel-lane width. The optional
//! `R(apron,diameter)` suffix carries roundabout truck-apron width and
//! diameter. All widths are in meters with at most centimeter resolution.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kv;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RoadSpecError {
    #[error("malformed cross-section notation `{text}`: {reason}")]
    MalformedNotation { text: String, reason: String },
    #[error("malformed registry at line {line}{}: {message}", segment.as_ref().map(|s| format!(" (segment `{s}`)")).unwrap_or_default())]
    MalformedRegistry {
        line: usize,
        segment: Option<String>,
        message: String,
    },
}

/// A non-negative width held exactly in centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Width(u32);

impl Width {
    pub const fn from_cm(cm: u32) -> Self {
        Width(cm)
    }

    pub fn cm(self) -> u32 {
        self.0
    }

    pub fn meters(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 100;
        let frac = self.0 % 100;
        if frac == 0 {
            write!(f, "{whole}")
        } else if frac % 10 == 0 {
            write!(f, "{whole}.{}", frac / 10)
        } else {
            write!(f, "{whole}.{frac:02}")
        }
    }
}

impl FromStr for Width {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("`{s}` is not a decimal width"));
        }
        if s.contains('.') && frac.is_empty() {
            return Err(format!("`{s}` has a dangling decimal point"));
        }
        if frac.len() > 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("`{s}` exceeds centimeter resolution"));
        }
        let whole: u32 = whole
            .parse()
            .map_err(|_| format!("`{s}` is out of range"))?;
        let frac_cm: u32 = match frac.len() {
            0 => 0,
            1 => frac.parse::<u32>().unwrap() * 10,
            _ => frac.parse::<u32>().unwrap(),
        };
        whole
            .checked_mul(100)
            .and_then(|v| v.checked_add(frac_cm))
            .map(Width)
            .ok_or_else(|| format!("`{s}` is out of range"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Separator {
    None,
    /// `KA`
    CentralArea,
    /// `TK`
    SteelGuardrail,
    /// `BK`
    ConcreteRailing,
}

impl Separator {
    pub fn code(self) -> Option<&'static str> {
        match self {
            Separator::None => None,
            Separator::CentralArea => Some("KA"),
            Separator::SteelGuardrail => Some("TK"),
            Separator::ConcreteRailing => Some("BK"),
        }
    }

    fn from_code(code: &str) -> Option<Self> {
        match code {
            "KA" => Some(Separator::CentralArea),
            "TK" => Some(Separator::SteelGuardrail),
            "BK" => Some(Separator::ConcreteRailing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Roundabout {
    pub apron_width: Width,
    pub diameter: Width,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DesignCrossSection {
    pub carriageways: u8,
    pub roadway_width: Width,
    pub lanes_width: Width,
    pub separator: Separator,
    /// Not encoded by the notation. Parsing sets two lanes per carriageway;
    /// the road registry overrides it with the surveyed count.
    pub lane_count: u32,
    pub roundabout: Option<Roundabout>,
}

impl DesignCrossSection {
    pub fn implied_lane_count(carriageways: u8) -> u32 {
        2 * u32::from(carriageways)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=2).contains(&self.carriageways) {
            return Err(format!(
                "carriageway count {} is not 1 or 2",
                self.carriageways
            ));
        }
        if self.lanes_width.cm() == 0 {
            return Err("travel-lane width must be positive".into());
        }
        if self.roadway_width < self.lanes_width {
            return Err(format!(
                "roadway width {} is narrower than travel-lane width {}",
                self.roadway_width, self.lanes_width
            ));
        }
        if self.separator == Separator::CentralArea && self.carriageways != 2 {
            return Err("central area (KA) requires two carriageways".into());
        }
        if self.lane_count == 0 {
            return Err("lane count must be at least 1".into());
        }
        if let Some(r) = self.roundabout {
            if r.apron_width.cm() == 0 || r.diameter.cm() == 0 {
                return Err("roundabout apron width and diameter must be positive".into());
            }
        }
        Ok(())
    }
}

impl fmt::Display for DesignCrossSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.carriageways != 1 {
            write!(f, "{} x ", self.carriageways)?;
        }
        write!(f, "({}/{})", self.roadway_width, self.lanes_width)?;
        if let Some(code) = self.separator.code() {
            write!(f, " + {code}")?;
        }
        if let Some(r) = self.roundabout {
            write!(f, " + R({},{})", r.apron_width, r.diameter)?;
        }
        Ok(())
    }
}

impl FromStr for DesignCrossSection {
    type Err = RoadSpecError;

    fn from_str(s: &str) -> Result<Self, RoadSpecError> {
        parse_cross_section(s)
    }
}

pub fn parse_cross_section(text: &str) -> Result<DesignCrossSection, RoadSpecError> {
    let fail = |reason: String| RoadSpecError::MalformedNotation {
        text: text.to_string(),
        reason,
    };
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(fail("empty notation".into()));
    }
    let mut rest = compact.as_str();

    let mut carriageways = 1u8;
    if let Some(open) = rest.find('(') {
        let prefix = &rest[..open];
        if !prefix.is_empty() {
            let count = prefix
                .strip_suffix(['x', 'X'])
                .ok_or_else(|| fail(format!("expected `<n> x` before `(`, found `{prefix}`")))?;
            carriageways = count
                .parse()
                .ok()
                .filter(|n| (1..=2).contains(n))
                .ok_or_else(|| fail(format!("carriageway count `{count}` is not 1 or 2")))?;
        }
        rest = &rest[open + 1..];
    } else {
        return Err(fail("missing `(`".into()));
    }

    let close = rest.find(')').ok_or_else(|| fail("missing `)`".into()))?;
    let inner = &rest[..close];
    rest = &rest[close + 1..];
    let (roadway, lanes) = inner
        .split_once('/')
        .ok_or_else(|| fail("missing `/` between roadway and lane widths".into()))?;
    let roadway_width: Width = roadway.parse().map_err(fail)?;
    let lanes_width: Width = lanes.parse().map_err(fail)?;

    let mut separator = Separator::None;
    let mut roundabout = None;
    while !rest.is_empty() {
        let tail = rest
            .strip_prefix('+')
            .ok_or_else(|| fail(format!("unexpected trailing `{rest}`")))?;
        if let Some(args) = tail.strip_prefix("R(") {
            if roundabout.is_some() {
                return Err(fail("duplicate roundabout suffix".into()));
            }
            let close = args
                .find(')')
                .ok_or_else(|| fail("unterminated `R(`".into()))?;
            let (apron, diameter) = args[..close]
                .split_once(',')
                .ok_or_else(|| fail("roundabout suffix needs `apron,diameter`".into()))?;
            roundabout = Some(Roundabout {
                apron_width: apron.parse().map_err(fail)?,
                diameter: diameter.parse().map_err(fail)?,
            });
            rest = &args[close + 1..];
        } else {
            if separator != Separator::None || roundabout.is_some() {
                return Err(fail(format!("unexpected suffix `+{tail}`")));
            }
            let code = tail.get(..2).unwrap_or(tail);
            separator = Separator::from_code(code)
                .ok_or_else(|| fail(format!("unknown separator code `{code}`")))?;
            rest = &tail[code.len()..];
        }
    }

    let spec = DesignCrossSection {
        carriageways,
        roadway_width,
        lanes_width,
        separator,
        lane_count: DesignCrossSection::implied_lane_count(carriageways),
        roundabout,
    };
    spec.validate().map_err(fail)?;
    Ok(spec)
}

pub fn format_cross_section(spec: &DesignCrossSection) -> String {
    spec.to_string()
}

/// Roadway width of one carriageway in meters: the figure before the slash.
pub fn design_roadway_width(spec: &DesignCrossSection) -> f64 {
    spec.roadway_width.meters()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoadClass {
    StateRoad,
    MunicipalRoad,
}

impl RoadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::StateRoad => "state",
            RoadClass::MunicipalRoad => "municipal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegmentRecord {
    pub name: String,
    pub cross_section: DesignCrossSection,
    pub design_speed_kmh: f64,
    pub aadt: u32,
    pub heavy_aadt: u32,
    pub road_class: RoadClass,
    pub lane_count: u32,
}

impl RoadSegmentRecord {
    pub fn heavy_share(&self) -> f64 {
        if self.aadt == 0 {
            0.0
        } else {
            f64::from(self.heavy_aadt) / f64::from(self.aadt)
        }
    }
}

const REGISTRY_KEYS: &[&str] = &[
    "cross_section",
    "design_speed_kmh",
    "aadt",
    "heavy_aadt",
    "class",
    "lanes",
];

/// Parses a registry document: one `[name]` section per road segment.
pub fn load_road_registry(source: &str) -> Result<Vec<RoadSegmentRecord>, RoadSpecError> {
    let sections = kv::parse_document(source).map_err(|e| RoadSpecError::MalformedRegistry {
        line: e.line,
        segment: None,
        message: e.message,
    })?;
    let mut records = Vec::with_capacity(sections.len());
    for section in &sections {
        let bad = |e: kv::KvError| RoadSpecError::MalformedRegistry {
            line: e.line,
            segment: Some(section.name.clone()),
            message: e.message,
        };
        let bad_at = |line: usize, message: String| RoadSpecError::MalformedRegistry {
            line,
            segment: Some(section.name.clone()),
            message,
        };
        if records
            .iter()
            .any(|r: &RoadSegmentRecord| r.name == section.name)
        {
            return Err(bad_at(section.line, "duplicate segment name".into()));
        }
        section.check_keys(REGISTRY_KEYS).map_err(bad)?;

        let cs_entry = section.require("cross_section").map_err(bad)?;
        let mut cross_section = parse_cross_section(&cs_entry.value)
            .map_err(|e| bad_at(cs_entry.line, e.to_string()))?;

        let design_speed_kmh: f64 = section.parse("design_speed_kmh").map_err(bad)?;
        if !(design_speed_kmh.is_finite() && design_speed_kmh > 0.0) {
            let line = section.require("design_speed_kmh").map_err(bad)?.line;
            return Err(bad_at(line, "design speed must be positive".into()));
        }
        let aadt: u32 = section.parse("aadt").map_err(bad)?;
        let heavy_aadt: u32 = section.parse("heavy_aadt").map_err(bad)?;
        if heavy_aadt > aadt {
            let line = section.require("heavy_aadt").map_err(bad)?.line;
            return Err(bad_at(line, format!("heavy_aadt {heavy_aadt} exceeds aadt {aadt}")));
        }
        let class_entry = section.require("class").map_err(bad)?;
        let road_class = match class_entry.value.as_str() {
            "state" => RoadClass::StateRoad,
            "municipal" => RoadClass::MunicipalRoad,
            other => {
                return Err(bad_at(
                    class_entry.line,
                    format!("class `{other}` is not `state` or `municipal`"),
                ))
            }
        };
        let lane_count: u32 = section.parse("lanes").map_err(bad)?;
        if lane_count == 0 {
            let line = section.require("lanes").map_err(bad)?.line;
            return Err(bad_at(line, "lanes must be at least 1".into()));
        }
        cross_section.lane_count = lane_count;

        records.push(RoadSegmentRecord {
            name: section.name.clone(),
            cross_section,
            design_speed_kmh,
            aadt,
            heavy_aadt,
            road_class,
            lane_count,
        });
    }
    Ok(records)
}
