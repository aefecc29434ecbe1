//! Sensor record envelopes, the live/archive dataset store, and point-cloud
//! file loading.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub mod cloud;
pub mod record;
pub mod store;

pub use cloud::{
    decode_pointrec, encode_pointrec, format_xyz, load_point_cloud, parse_xyz, save_point_cloud,
    Bounds2, CloudFormat, Point, PointCloud,
};
pub use record::{decode_record, encode_record, Channel, SensorRecord};
pub use store::{scan_dataset, ArchiveEntry, DatasetStore};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unencodable payload: {0}")]
    UnencodablePayload(String),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("store unavailable at {}: {source}", path.display())]
    StoreUnavailable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed cloud file{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedCloudFile { line: Option<usize>, message: String },
    #[error("unknown point cloud format `{0}`")]
    UnknownFormat(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}
