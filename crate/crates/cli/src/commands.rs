//! Subcommand implementations.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use winterscan_core::analysis::{detect_markings, snowbank_width, SnowbankParams};
use winterscan_core::dem::{
    self, extract_profile, fill_holes, profile_csv, rasterize, rasterize_onto, read_dem, write_dem,
    DemGrid,
};
use winterscan_core::ingest::{
    decode_record, load_point_cloud, save_point_cloud, scan_dataset, CloudFormat, DatasetStore,
    PointCloud,
};
use winterscan_core::lidarimg::{self, frame_from_record, write_pgm};
use winterscan_core::pipeline::{measure_widths, run_inspection, InspectionConfig, InspectionInputs};
use winterscan_core::report::{
    format_transects_csv, parse_transects_csv, widths_csv, widths_json, Fixed3, ReportParameters,
};
use winterscan_core::roadspec::{load_road_registry, parse_cross_section, DesignCrossSection};
use winterscan_core::synthgen::{generate_cloud, parse_synth_spec};
use winterscan_core::Transect;

use crate::args::{
    DemCommand, DesignArgs, FormatArg, IngestCommand, IntensityArgs, ReportArgs, SnowbankArgs,
    SynthArgs, WidthArgs, WidthFormat,
};

/// A problem with the invocation rather than the data; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cloud_format(path: &Path, format: Option<FormatArg>) -> Result<CloudFormat> {
    match format {
        Some(f) => Ok(f.into()),
        None => CloudFormat::from_path(path).map_err(|_| {
            UsageError(format!(
                "cannot infer the format of {}; pass --format",
                path.display()
            ))
            .into()
        }),
    }
}

fn load_cloud(path: &Path, format: Option<FormatArg>) -> Result<PointCloud> {
    let format = cloud_format(path, format)?;
    load_point_cloud(path, format).with_context(|| format!("loading {}", path.display()))
}

fn load_dem(path: &Path) -> Result<DemGrid> {
    read_dem(path).with_context(|| format!("reading DEM {}", path.display()))
}

fn load_transects(path: &Path) -> Result<Vec<Transect>> {
    parse_transects_csv(&read_text(path)?).with_context(|| format!("in {}", path.display()))
}

fn registry_design(path: &Path, segment: &str) -> Result<DesignCrossSection> {
    let records = load_road_registry(&read_text(path)?)
        .with_context(|| format!("in {}", path.display()))?;
    records
        .into_iter()
        .find(|r| r.name == segment)
        .map(|r| r.cross_section)
        .ok_or_else(|| anyhow!("segment `{segment}` is not in {}", path.display()))
}

pub fn ingest(action: IngestCommand) -> Result<()> {
    match action {
        IngestCommand::Snapshot { store } => {
            let store = DatasetStore::create(&store)?;
            let mut out = String::new();
            for path in store.snapshot()? {
                writeln!(out, "{}", path.display())?;
            }
            emit(None, &out)
        }
        IngestCommand::Scan {
            archive,
            from,
            to,
            sensors,
        } => {
            let range = match (from, to) {
                (None, None) => None,
                (f, t) => Some((f.unwrap_or(0), t.unwrap_or(u64::MAX))),
            };
            let ids: Vec<&str> = sensors.iter().map(String::as_str).collect();
            let filter = (!ids.is_empty()).then_some(ids.as_slice());
            let mut out = String::from("timestamp_ns,sensor_id,path\n");
            for e in scan_dataset(&archive, range, filter)? {
                writeln!(out, "{},{},{}", e.timestamp_ns, e.sensor_id, e.path.display())?;
            }
            emit(None, &out)
        }
    }
}

#[derive(Serialize)]
struct DiffSummary {
    snow_volume_m3: Fixed3,
    min_depth_m: f64,
    valid_cells: usize,
}

pub fn dem(action: DemCommand) -> Result<()> {
    match action {
        DemCommand::Build {
            input,
            format,
            cell,
            aggregator,
            fill,
            like,
            out,
        } => {
            let cloud = load_cloud(&input, format)?;
            let grid = match like {
                Some(path) => rasterize_onto(&cloud, load_dem(&path)?.geometry, aggregator)?,
                None => rasterize(&cloud, cell, aggregator)?,
            };
            let grid = fill_holes(&grid, fill);
            write_dem(&out, &grid).with_context(|| format!("writing {}", out.display()))
        }
        DemCommand::Diff {
            winter,
            reference,
            out,
            min_depth,
        } => {
            if !(min_depth >= 0.0 && min_depth.is_finite()) {
                bail!(UsageError(format!("--min-depth must be non-negative, got {min_depth}")));
            }
            let depth = dem::diff(&load_dem(&winter)?, &load_dem(&reference)?)?;
            if let Some(path) = &out {
                write_dem(path, &depth).with_context(|| format!("writing {}", path.display()))?;
            }
            let summary = DiffSummary {
                snow_volume_m3: Fixed3(dem::volume(&depth, min_depth)),
                min_depth_m: min_depth,
                valid_cells: depth.valid_count(),
            };
            emit(None, &(serde_json::to_string_pretty(&summary)? + "\n"))
        }
        DemCommand::Profile {
            dem,
            transects,
            spacing,
            id,
            out,
            out_dir,
        } => {
            let grid = load_dem(&dem)?;
            let transects = load_transects(&transects)?;
            if let Some(id) = id {
                let t = transects
                    .iter()
                    .find(|t| t.id == id)
                    .ok_or_else(|| anyhow!("no transect `{id}`"))?;
                return emit(out.as_deref(), &profile_csv(&extract_profile(&grid, t, spacing)?));
            }
            let dir = out_dir.expect("clap requires --out or --out-dir");
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for t in &transects {
                let path = dir.join(format!("{}.csv", t.id));
                emit(Some(&path), &profile_csv(&extract_profile(&grid, t, spacing)?))?;
            }
            Ok(())
        }
    }
}

fn design_from(args: &DesignArgs, segment: Option<&str>) -> Result<DesignCrossSection> {
    match (&args.design, &args.registry) {
        (Some(text), _) => Ok(parse_cross_section(text)?),
        (None, Some(path)) => registry_design(path, segment.unwrap_or_default()),
        (None, None) => bail!(UsageError("one of --design or --registry is required".into())),
    }
}

pub fn width(args: WidthArgs) -> Result<()> {
    let design = design_from(&args.design, args.segment.as_deref())?;
    let winter = load_dem(&args.winter)?;
    let reference = load_dem(&args.reference)?;
    let transects = load_transects(&args.transects)?;
    let mut config = InspectionConfig::new(args.segment.clone().unwrap_or_default(), design);
    config.winter_epoch = args.winter_label;
    config.reference_epoch = args.reference_label;
    config.profile_spacing_m = args.spacing;
    config.min_depth_m = args.min_depth;
    config.roadway_start_m = args.roadway_start;
    let records = measure_widths(&winter, &reference, &transects, &config)?;
    let text = match args.format {
        WidthFormat::Json => widths_json(&records),
        WidthFormat::Csv => widths_csv(&records),
    };
    emit(args.out.as_deref(), &text)
}

fn read_centerline(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = read_text(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l.replace(' ', "") == "x,y" => {}
        _ => bail!("{}: expected header `x,y`", path.display()),
    }
    lines
        .map(|(n, l)| {
            let parsed = l.split_once(',').and_then(|(x, y)| {
                let x: f64 = x.trim().parse().ok()?;
                let y: f64 = y.trim().parse().ok()?;
                (x.is_finite() && y.is_finite()).then_some((x, y))
            });
            parsed.ok_or_else(|| anyhow!("{} line {n}: expected `x,y`", path.display()))
        })
        .collect()
}

pub fn snowbanks(args: SnowbankArgs) -> Result<()> {
    let cloud = load_cloud(&args.input, args.format)?;
    let line = read_centerline(&args.centerline)?;
    let params = SnowbankParams {
        cell_m: args.cell,
        strip_half_width_m: args.strip_half_width,
        max_half_span_m: args.max_half_span,
        level_band_m: args.level_band,
        toe_rise_m: args.toe_rise,
    };
    let widths = snowbank_width(&cloud, &line, args.step, args.bank_height, &params)?;
    let mut out = String::from("station_m,width_m\n");
    for w in widths {
        let width = w.width_m.map(|v| Fixed3(v).text()).unwrap_or_default();
        writeln!(out, "{},{}", Fixed3(w.station_m).text(), width)?;
    }
    emit(args.out.as_deref(), &out)
}

#[derive(Serialize)]
struct ColumnSpan {
    start_col: usize,
    end_col: usize,
}

#[derive(Serialize)]
struct IntensitySummary {
    n_rows: usize,
    n_cols: usize,
    low_value: f64,
    high_value: f64,
    degenerate: bool,
    threshold: f64,
    marked_pixels: usize,
    clusters: Vec<ColumnSpan>,
}

fn load_frame(path: &Path) -> Result<lidarimg::RawLidarFrame> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let record = decode_record(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    frame_from_record(&record).with_context(|| format!("in {}", path.display()))
}

pub fn intensity(args: IntensityArgs) -> Result<()> {
    let frame = load_frame(&args.input)?;
    let aligned = lidarimg::destagger(&frame)?;
    let n = lidarimg::normalize(&aligned, args.low, args.high)?;
    write_pgm(&n.image, &args.out)?;
    let d = detect_markings(&n.image, args.threshold);
    let summary = IntensitySummary {
        n_rows: n.image.n_rows,
        n_cols: n.image.n_cols,
        low_value: n.low_value,
        high_value: n.high_value,
        degenerate: n.degenerate,
        threshold: args.threshold,
        marked_pixels: d.set_count(),
        clusters: d
            .clusters
            .iter()
            .map(|&(s, e)| ColumnSpan {
                start_col: s,
                end_col: e,
            })
            .collect(),
    };
    emit(None, &(serde_json::to_string_pretty(&summary)? + "\n"))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let spec = parse_synth_spec(&read_text(&args.spec)?)
        .with_context(|| format!("in {}", args.spec.display()))?;
    let format = cloud_format(&args.out, args.format)?;
    let generated = generate_cloud(&spec, args.epoch)?;
    save_point_cloud(&generated.cloud, &args.out, format)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.labels {
        let mut out = String::from("index,label\n");
        for (i, l) in generated.labels.iter().enumerate() {
            writeln!(out, "{i},{}", l.as_str())?;
        }
        emit(Some(path), &out)?;
    }
    if let Some(path) = &args.transects_out {
        if args.transect_count == 0 {
            bail!(UsageError("--transect-count must be at least 1".into()));
        }
        let transects = spec.cross_transects(args.transect_count, args.transect_pad);
        emit(Some(path), &format_transects_csv(&transects))?;
    }
    Ok(())
}

/// A parameter block, taken from a whole report or given on its own.
fn read_params(path: &Path) -> Result<ReportParameters> {
    let value: serde_json::Value = serde_json::from_str(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let block = match value.get("parameters") {
        Some(p) => p.clone(),
        None => value,
    };
    serde_json::from_value(block).with_context(|| format!("parameter block in {}", path.display()))
}

pub fn report(args: ReportArgs) -> Result<()> {
    let block = args.params.as_deref().map(read_params).transpose()?;
    let design = match (&args.design, &args.registry, &block) {
        (Some(text), _, _) => parse_cross_section(text)?,
        (None, Some(path), _) => registry_design(path, &args.segment)?,
        (None, None, Some(b)) => parse_cross_section(&b.design_cross_section)?,
        (None, None, None) => bail!(UsageError(
            "one of --design, --registry or --params is required".into()
        )),
    };
    let mut config = InspectionConfig::new(args.segment.clone(), design);
    if let Some(b) = &block {
        config.apply_parameters(b)?;
        config.design = design;
    }
    config.winter_epoch = args.winter_label.clone();
    config.reference_epoch = args.reference_label.clone();
    if let Some(v) = args.cell {
        config.cell_size_m = v;
    }
    if let Some(v) = args.aggregator {
        config.aggregator = v;
    }
    if let Some(v) = args.fill {
        config.fill_radius_cells = v;
    }
    if let Some(v) = args.spacing {
        config.profile_spacing_m = v;
    }
    if let Some(v) = args.min_depth {
        config.min_depth_m = v;
    }
    if let Some(v) = args.roadway_start {
        config.roadway_start_m = v;
    }
    if let Some(v) = args.volume_min_depth {
        config.volume_min_depth_m = v;
    }
    if let Some(v) = args.marking_threshold {
        config.marking_threshold = v;
    }
    if let Some(v) = args.low {
        config.normalize_low_pct = v;
    }
    if let Some(v) = args.high {
        config.normalize_high_pct = v;
    }

    let (winter, reference) = rayon::join(
        || load_cloud(&args.winter, args.format),
        || load_cloud(&args.reference, args.format),
    );
    let inputs = InspectionInputs {
        winter: winter?,
        reference: reference?,
        transects: load_transects(&args.transects)?,
        intensity_frames: args
            .frames
            .iter()
            .map(|(epoch, path)| Ok((epoch.clone(), load_frame(path)?)))
            .collect::<Result<_>>()?,
    };
    let report = run_inspection(&inputs, &config)?;
    emit(args.out.as_deref(), &report.to_json())
}
