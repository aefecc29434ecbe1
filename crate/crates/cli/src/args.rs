//! Command-line surface.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use winterscan_core::dem::Aggregator;
use winterscan_core::ingest::CloudFormat;
use winterscan_core::synthgen::Epoch;

#[derive(Debug, Parser)]
#[command(
    name = "winterscan",
    version,
    about = "Winter road condition measurement from point clouds and lidar records",
    after_help = "WINTERSCAN_THREADS caps the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sensor record store operations
    Ingest {
        #[command(subcommand)]
        action: IngestCommand,
    },
    /// Elevation model operations
    Dem {
        #[command(subcommand)]
        action: DemCommand,
    },
    /// Effective roadway width per transect from winter and reference DEMs
    Width(WidthArgs),
    /// Clear width between snow-banks along a centerline
    Snowbanks(SnowbankArgs),
    /// Destagger and normalize a raw lidar intensity frame
    Intensity(IntensityArgs),
    /// Generate a synthetic road point cloud
    Synth(SynthArgs),
    /// Full inspection of one segment as a JSON report
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum IngestCommand {
    /// Copy every live record into the timestamped archive
    Snapshot {
        /// Store root holding `live/` and `archive/`
        #[arg(long)]
        store: PathBuf,
    },
    /// List archived records in time order as CSV
    Scan {
        #[arg(long)]
        archive: PathBuf,
        /// Earliest timestamp in nanoseconds, inclusive
        #[arg(long)]
        from: Option<u64>,
        /// Latest timestamp in nanoseconds, inclusive
        #[arg(long)]
        to: Option<u64>,
        /// Keep only these sensors (repeatable)
        #[arg(long = "sensor")]
        sensors: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    XyzAscii,
    PointrecBinary,
}

impl From<FormatArg> for CloudFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::XyzAscii => CloudFormat::XyzAscii,
            FormatArg::PointrecBinary => CloudFormat::PointrecBinary,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum DemCommand {
    /// Rasterize a point cloud into a DEM file
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        /// Cloud format; inferred from the extension when omitted
        #[arg(long)]
        format: Option<FormatArg>,
        #[arg(long, default_value_t = 0.1)]
        cell: f64,
        #[arg(long, default_value = "mean")]
        aggregator: Aggregator,
        /// Hole-filling radius in cells
        #[arg(long, default_value_t = 0)]
        fill: usize,
        /// Reuse the grid of an existing DEM instead of the cloud extent
        #[arg(long, conflicts_with = "cell")]
        like: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Snow depth grid (winter minus reference) and its volume
    Diff {
        #[arg(long)]
        winter: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Depths at or below this do not count toward the volume
        #[arg(long, default_value_t = 0.05)]
        min_depth: f64,
    },
    /// Elevation profiles along transects as CSV
    #[command(group(ArgGroup::new("dest").required(true).args(["out", "out_dir"])))]
    Profile {
        #[arg(long)]
        dem: PathBuf,
        #[arg(long)]
        transects: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        /// Profile only this transect
        #[arg(long, requires = "out")]
        id: Option<String>,
        /// Output file for a single `--id` profile
        #[arg(long, requires = "id")]
        out: Option<PathBuf>,
        /// Directory receiving `<id>.csv` per transect
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(id = "design_source", required = true, multiple = false)]
pub struct DesignArgs {
    /// Cross-section notation, e.g. "(8/7.5)"
    #[arg(long)]
    pub design: Option<String>,
    /// Road registry; the design comes from the `--segment` entry
    #[arg(long, requires = "segment")]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WidthFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct WidthArgs {
    #[arg(long)]
    pub winter: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub transects: PathBuf,
    #[arg(long)]
    pub segment: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub spacing: f64,
    #[arg(long, default_value_t = 0.05)]
    pub min_depth: f64,
    /// Station of the left roadway edge on every transect
    #[arg(long, default_value_t = 0.0)]
    pub roadway_start: f64,
    #[arg(long, default_value = "winter")]
    pub winter_label: String,
    #[arg(long, default_value = "reference")]
    pub reference_label: String,
    #[arg(long, value_enum, default_value_t = WidthFormat::Json)]
    pub format: WidthFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SnowbankArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// CSV with an `x,y` header, one vertex per row
    #[arg(long)]
    pub centerline: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub step: f64,
    /// Height above the road level that counts as a bank
    #[arg(long, default_value_t = 0.2)]
    pub bank_height: f64,
    #[arg(long, default_value_t = 0.1)]
    pub cell: f64,
    #[arg(long, default_value_t = 0.25)]
    pub strip_half_width: f64,
    #[arg(long, default_value_t = 15.0)]
    pub max_half_span: f64,
    #[arg(long, default_value_t = 1.0)]
    pub level_band: f64,
    #[arg(long, default_value_t = 0.03)]
    pub toe_rise: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntensityArgs {
    /// Sensor record with `intensity`, `shape` and `pixel_shift` channels
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Normalized 16-bit PGM image
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub low: f64,
    #[arg(long, default_value_t = 99.0)]
    pub high: f64,
    /// Marking threshold on normalized intensity
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub epoch: Epoch,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// Per-point ground-truth labels as CSV
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Evenly spaced cross-section transects as CSV
    #[arg(long)]
    pub transects_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10, requires = "transects_out")]
    pub transect_count: usize,
    /// Transect overhang beyond each roadway edge
    #[arg(long, default_value_t = 1.0, requires = "transects_out")]
    pub transect_pad: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub winter: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub transects: PathBuf,
    #[arg(long)]
    pub segment: String,
    #[arg(long, conflicts_with = "registry")]
    pub design: Option<String>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long, default_value = "winter")]
    pub winter_label: String,
    #[arg(long, default_value = "reference")]
    pub reference_label: String,
    /// Intensity frame as `EPOCH=PATH` (repeatable)
    #[arg(long = "frame", value_parser = parse_frame_arg)]
    pub frames: Vec<(String, PathBuf)>,
    /// Parameter block of an earlier report (or the whole report)
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub cell: Option<f64>,
    #[arg(long)]
    pub aggregator: Option<Aggregator>,
    #[arg(long)]
    pub fill: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub min_depth: Option<f64>,
    #[arg(long)]
    pub roadway_start: Option<f64>,
    #[arg(long)]
    pub volume_min_depth: Option<f64>,
    #[arg(long)]
    pub marking_threshold: Option<f64>,
    #[arg(long)]
    pub low: Option<f64>,
    #[arg(long)]
    pub high: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_frame_arg(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((epoch, path)) if !epoch.is_empty() && !path.is_empty() => {
            Ok((epoch.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("`{s}` is not EPOCH=PATH")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn frame_argument() {
        assert_eq!(
            parse_frame_arg("2024-01-09 winter=a/b.rec").unwrap(),
            ("2024-01-09 winter".to_string(), PathBuf::from("a/b.rec"))
        );
        assert!(parse_frame_arg("a.rec").is_err());
        assert!(parse_frame_arg("=a.rec").is_err());
    }

    #[test]
    fn design_source_is_exclusive() {
        let base = ["winterscan", "width", "--winter", "w", "--reference", "r", "--transects", "t"];
        assert!(Cli::try_parse_from(base).is_err());
        let mut both = base.to_vec();
        both.extend(["--design", "(8/7.5)", "--registry", "reg", "--segment", "x"]);
        assert!(Cli::try_parse_from(both).is_err());
        let mut one = base.to_vec();
        one.extend(["--design", "(8/7.5)"]);
        assert!(Cli::try_parse_from(one).is_ok());
        let mut registry = base.to_vec();
        registry.extend(["--registry", "reg"]);
        assert!(Cli::try_parse_from(registry).is_err());
    }
}
