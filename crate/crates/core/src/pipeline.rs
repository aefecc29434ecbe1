//! End-to-end inspection of one road segment across a snow-free reference
//! epoch and a winter epoch.

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{detect_markings, effective_width, AnalysisError, DEFAULT_MIN_DEPTH_M};
use crate::dem::{
    self, extract_profile, fill_holes, rasterize_onto, Aggregator, DemError, DemGrid, GridGeometry,
    Transect,
};
use crate::ingest::PointCloud;
use crate::lidarimg::{self, LidarImageError, RawLidarFrame};
use crate::report::{
    EpochLabels, Fixed3, InspectionReport, MarkingCount, ReportParameters, WidthRecord,
};
use crate::roadspec::{format_cross_section, parse_cross_section, DesignCrossSection, RoadSpecError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dem(#[from] DemError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    LidarImage(#[from] LidarImageError),
    #[error(transparent)]
    RoadSpec(#[from] RoadSpecError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectionConfig {
    pub segment: String,
    pub winter_epoch: String,
    pub reference_epoch: String,
    pub design: DesignCrossSection,
    pub cell_size_m: f64,
    pub aggregator: Aggregator,
    pub fill_radius_cells: usize,
    pub profile_spacing_m: f64,
    pub min_depth_m: f64,
    /// Station of the left roadway edge on every transect.
    pub roadway_start_m: f64,
    pub volume_min_depth_m: f64,
    pub marking_threshold: f64,
    pub normalize_low_pct: f64,
    pub normalize_high_pct: f64,
}

impl InspectionConfig {
    pub fn new(segment: impl Into<String>, design: DesignCrossSection) -> Self {
        InspectionConfig {
            segment: segment.into(),
            winter_epoch: "winter".into(),
            reference_epoch: "reference".into(),
            design,
            cell_size_m: dem::DEFAULT_CELL_SIZE_M,
            aggregator: Aggregator::Mean,
            fill_radius_cells: 0,
            profile_spacing_m: 0.05,
            min_depth_m: DEFAULT_MIN_DEPTH_M,
            roadway_start_m: 0.0,
            volume_min_depth_m: DEFAULT_MIN_DEPTH_M,
            marking_threshold: 0.5,
            normalize_low_pct: lidarimg::DEFAULT_LOW_PERCENTILE,
            normalize_high_pct: lidarimg::DEFAULT_HIGH_PERCENTILE,
        }
    }

    pub fn parameters(&self) -> ReportParameters {
        ReportParameters {
            design_cross_section: format_cross_section(&self.design),
            cell_size_m: self.cell_size_m,
            aggregator: self.aggregator.as_str().into(),
            fill_radius_cells: self.fill_radius_cells,
            profile_spacing_m: self.profile_spacing_m,
            min_depth_m: self.min_depth_m,
            roadway_start_m: self.roadway_start_m,
            volume_min_depth_m: self.volume_min_depth_m,
            marking_threshold: self.marking_threshold,
            normalize_low_pct: self.normalize_low_pct,
            normalize_high_pct: self.normalize_high_pct,
        }
    }

    /// Applies a report's parameter block, keeping segment and epoch labels.
    pub fn apply_parameters(&mut self, p: &ReportParameters) -> Result<(), PipelineError> {
        self.design = parse_cross_section(&p.design_cross_section)?;
        self.cell_size_m = p.cell_size_m;
        self.aggregator = p.aggregator.parse().map_err(PipelineError::InvalidParameter)?;
        self.fill_radius_cells = p.fill_radius_cells;
        self.profile_spacing_m = p.profile_spacing_m;
        self.min_depth_m = p.min_depth_m;
        self.roadway_start_m = p.roadway_start_m;
        self.volume_min_depth_m = p.volume_min_depth_m;
        self.marking_threshold = p.marking_threshold;
        self.normalize_low_pct = p.normalize_low_pct;
        self.normalize_high_pct = p.normalize_high_pct;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct InspectionInputs {
    pub winter: PointCloud,
    pub reference: PointCloud,
    pub transects: Vec<Transect>,
    /// Raw intensity frames labeled by epoch.
    pub intensity_frames: Vec<(String, RawLidarFrame)>,
}

/// Both epochs rasterized onto one grid covering the union of their extents.
pub fn shared_grids(
    winter: &PointCloud,
    reference: &PointCloud,
    cell_size_m: f64,
    aggregator: Aggregator,
    fill_radius_cells: usize,
) -> Result<(DemGrid, DemGrid), DemError> {
    let (w, r) = match (winter.bounds(), reference.bounds()) {
        (Some(w), Some(r)) => (w, r),
        _ => return Err(DemError::EmptyCloud),
    };
    let geometry = GridGeometry::covering(
        w.min_x.min(r.min_x),
        w.min_y.min(r.min_y),
        w.max_x.max(r.max_x),
        w.max_y.max(r.max_y),
        cell_size_m,
    )?;
    let (wg, rg) = rayon::join(
        || rasterize_onto(winter, geometry, aggregator),
        || rasterize_onto(reference, geometry, aggregator),
    );
    Ok((
        fill_holes(&wg?, fill_radius_cells),
        fill_holes(&rg?, fill_radius_cells),
    ))
}

/// Widths on every transect, in input order.
pub fn measure_widths(
    winter: &DemGrid,
    reference: &DemGrid,
    transects: &[Transect],
    config: &InspectionConfig,
) -> Result<Vec<WidthRecord>, PipelineError> {
    transects
        .par_iter()
        .map(|t| {
            let wp = extract_profile(winter, t, config.profile_spacing_m)?;
            let rp = extract_profile(reference, t, config.profile_spacing_m)?;
            let m = effective_width(&wp, &rp, &config.design, config.min_depth_m, config.roadway_start_m)?;
            Ok(WidthRecord::new(
                &m,
                &config.segment,
                &config.winter_epoch,
                &config.reference_epoch,
            ))
        })
        .collect()
}

pub fn run_inspection(
    inputs: &InspectionInputs,
    config: &InspectionConfig,
) -> Result<InspectionReport, PipelineError> {
    if !(config.volume_min_depth_m >= 0.0 && config.volume_min_depth_m.is_finite()) {
        return Err(PipelineError::InvalidParameter(
            "volume_min_depth_m must be non-negative".into(),
        ));
    }
    let (winter, reference) = shared_grids(
        &inputs.winter,
        &inputs.reference,
        config.cell_size_m,
        config.aggregator,
        config.fill_radius_cells,
    )?;
    let depth = dem::diff(&winter, &reference)?;
    let snow_volume = dem::volume(&depth, config.volume_min_depth_m);
    let widths = measure_widths(&winter, &reference, &inputs.transects, config)?;

    let marking_clusters = inputs
        .intensity_frames
        .iter()
        .map(|(epoch, frame)| {
            let aligned = lidarimg::destagger(frame)?;
            let normalized =
                lidarimg::normalize(&aligned, config.normalize_low_pct, config.normalize_high_pct)?;
            let detection = detect_markings(&normalized.image, config.marking_threshold);
            Ok(MarkingCount {
                epoch: epoch.clone(),
                clusters: detection.clusters.len(),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    Ok(InspectionReport {
        segment: config.segment.clone(),
        epochs: EpochLabels {
            reference: config.reference_epoch.clone(),
            winter: config.winter_epoch.clone(),
        },
        parameters: config.parameters(),
        snow_volume_m3: Fixed3(snow_volume),
        widths,
        marking_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_cloud, Epoch, SnowHeap, SyntheticRoadSpec};

    #[test]
    fn small_inspection() {
        let mut spec = SyntheticRoadSpec::new(8.0, 10.0, 400.0, 9);
        spec.snow.push(SnowHeap {
            center_station_m: 1.0,
            center_along_m: 5.0,
            peak_m: 0.4,
            sigma_m: 0.5,
            along_extent_m: Some(20.0),
        });
        let inputs = InspectionInputs {
            winter: generate_cloud(&spec, Epoch::Winter).unwrap().cloud,
            reference: generate_cloud(&spec, Epoch::Bare).unwrap().cloud,
            transects: spec.cross_transects(4, 1.0),
            intensity_frames: vec![],
        };
        let mut config = InspectionConfig::new("Ruskontie", parse_cross_section("(8/7.5)").unwrap());
        config.roadway_start_m = 1.0;
        let report = run_inspection(&inputs, &config).unwrap();
        assert_eq!(report.widths.len(), 4);
        for w in &report.widths {
            // heap at station 1 with σ 0.5 clears around station 2.02
            let eff = w.effective_width_m.0;
            assert!((eff - (8.0 - 2.02)).abs() < 0.2, "{eff}");
        }
        assert!(report.snow_volume_m3.0 > 0.0);

        let mut again = InspectionConfig::new("Ruskontie", parse_cross_section("2 x (11.75/7.5) + KA").unwrap());
        again.apply_parameters(&report.parameters).unwrap();
        assert_eq!(again.parameters(), report.parameters);
    }
}
