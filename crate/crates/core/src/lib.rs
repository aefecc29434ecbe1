//! Winter road condition inspection from point clouds: design cross-section
//! notation, sensor record storage, elevation grids, snow and width analyses,
//! lidar intensity images and a synthetic ground-truth generator.

pub mod analysis;
pub mod dem;
pub mod ingest;
pub mod kv;
pub mod lidarimg;
pub mod pipeline;
pub mod report;
pub mod roadspec;
pub mod synthgen;

pub use analysis::{AnalysisError, SnowFeature, WidthMeasurement};
pub use dem::{Aggregator, DemError, DemGrid, GridGeometry, SurfaceProfile, Transect};
pub use ingest::{Channel, DatasetStore, IngestError, Point, PointCloud, SensorRecord};
pub use lidarimg::{IntensityImage, LidarImageError, RawLidarFrame};
pub use pipeline::{run_inspection, InspectionConfig, InspectionInputs, PipelineError};
pub use report::InspectionReport;
pub use roadspec::{DesignCrossSection, RoadSegmentRecord, RoadSpecError, Width};
pub use synthgen::{Epoch, SyntheticRoadSpec};
