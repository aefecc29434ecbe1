//! Road-condition analyses: snow features and effective width on transect
//! profiles, roadway edge detection, region-growing road segmentation,
//! snow-bank spacing in map clouds, and road-marking detection in intensity
//! images.

use thiserror::Error;

pub mod markings;
pub mod profile;
pub mod segment;
pub mod snowbank;

pub use markings::{detect_markings, MarkingDetection};
pub use profile::{
    depth_samples, detect_profile_edges, detect_snow_features, effective_width, fallback_reference,
    SnowFeature, WidthMeasurement,
};
pub use segment::{segment_road, SegmentParams, SegmentationResult};
pub use snowbank::{snowbank_width, BankWidth, SnowbankParams};

/// Drivability threshold on snow depth.
pub const DEFAULT_MIN_DEPTH_M: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),
    #[error("transect too short: covers stations up to {available_m} m, roadway needs {needed_m} m")]
    TransectTooShort { needed_m: f64, available_m: f64 },
    #[error("roadway edges not found: {0}")]
    EdgesNotFound(String),
    #[error("seed lies outside the cloud bounds")]
    SeedOutsideCloud,
    #[error("seed cell holds no points")]
    EmptyResult,
    #[error("no points near the centerline")]
    EmptyCorridor,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
