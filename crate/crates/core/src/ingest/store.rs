//! Latest-overwrite live store and timestamped archive.
//!
//! The live directory holds one `<sensor_id>.rec` per sensor, replaced on
//! every write. A snapshot copies each live record into the archive as
//! `<timestamp_ns:019>_<sensor_id>.rec`, so archive names sort
//! lexicographically in timestamp order.
//!
//! All files are written to a hidden temporary name and renamed into place,
//! so readers only ever observe complete records.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::record::{decode_record, encode_record, validate_sensor_id, SensorRecord};
use super::IngestError;

pub const RECORD_EXT: &str = "rec";
const TIMESTAMP_DIGITS: usize = 19;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStore {
    pub live_dir: PathBuf,
    pub archive_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub timestamp_ns: u64,
    pub sensor_id: String,
    pub path: PathBuf,
}

fn unavailable(path: &Path, source: io::Error) -> IngestError {
    IngestError::StoreUnavailable {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, IngestError> {
    let seq = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{name}.{}.{seq}.tmp", std::process::id()));
    let target = dir.join(name);
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        drop(file);
        fs::rename(&tmp, &target)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(unavailable(dir, e));
    }
    Ok(target)
}

pub fn archive_file_name(timestamp_ns: u64, sensor_id: &str) -> String {
    format!("{timestamp_ns:0width$}_{sensor_id}.{RECORD_EXT}", width = TIMESTAMP_DIGITS)
}

/// Inverse of [`archive_file_name`]; `None` for anything else in the directory.
pub fn parse_archive_file_name(name: &str) -> Option<(u64, String)> {
    let stem = name.strip_suffix(RECORD_EXT)?.strip_suffix('.')?;
    let (ts, id) = stem.split_once('_')?;
    if ts.len() != TIMESTAMP_DIGITS || !ts.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    validate_sensor_id(id).ok()?;
    Some((ts.parse().ok()?, id.to_string()))
}

impl DatasetStore {
    pub fn new(live_dir: impl Into<PathBuf>, archive_dir: impl Into<PathBuf>) -> Self {
        DatasetStore {
            live_dir: live_dir.into(),
            archive_dir: archive_dir.into(),
        }
    }

    /// `<root>/live` and `<root>/archive`, created if missing.
    pub fn create(root: impl AsRef<Path>) -> Result<Self, IngestError> {
        let root = root.as_ref();
        let store = DatasetStore::new(root.join("live"), root.join("archive"));
        for dir in [&store.live_dir, &store.archive_dir] {
            fs::create_dir_all(dir).map_err(|e| unavailable(dir, e))?;
        }
        Ok(store)
    }

    pub fn live_path(&self, sensor_id: &str) -> PathBuf {
        self.live_dir.join(format!("{sensor_id}.{RECORD_EXT}"))
    }

    /// Replaces the live record for `record.sensor_id`.
    pub fn write_live(&self, record: &SensorRecord) -> Result<PathBuf, IngestError> {
        let bytes = encode_record(record)?;
        if !self.live_dir.is_dir() {
            return Err(unavailable(
                &self.live_dir,
                io::Error::new(io::ErrorKind::NotFound, "live directory missing"),
            ));
        }
        write_atomic(
            &self.live_dir,
            &format!("{}.{RECORD_EXT}", record.sensor_id),
            &bytes,
        )
    }

    pub fn read_live(&self, sensor_id: &str) -> Result<SensorRecord, IngestError> {
        let path = self.live_path(sensor_id);
        let bytes = fs::read(&path).map_err(|e| unavailable(&path, e))?;
        decode_record(&bytes)
    }

    /// Sensor ids with a live record, sorted.
    pub fn live_sensors(&self) -> Result<Vec<String>, IngestError> {
        let entries = fs::read_dir(&self.live_dir).map_err(|e| unavailable(&self.live_dir, e))?;
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| unavailable(&self.live_dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(id) = name.strip_suffix(RECORD_EXT).and_then(|s| s.strip_suffix('.')) {
                if validate_sensor_id(id).is_ok() {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Copies every live record into the archive under its timestamped name.
    /// Live files are left untouched; re-archiving the same record rewrites
    /// identical bytes.
    pub fn snapshot(&self) -> Result<Vec<PathBuf>, IngestError> {
        if !self.archive_dir.is_dir() {
            return Err(unavailable(
                &self.archive_dir,
                io::Error::new(io::ErrorKind::NotFound, "archive directory missing"),
            ));
        }
        let mut archived = Vec::new();
        for id in self.live_sensors()? {
            let path = self.live_path(&id);
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                // removed between listing and reading
                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                Err(e) => return Err(unavailable(&path, e)),
            };
            let record = decode_record(&bytes)?;
            let name = archive_file_name(record.timestamp_ns, &record.sensor_id);
            archived.push(write_atomic(&self.archive_dir, &name, &bytes)?);
        }
        archived.sort();
        Ok(archived)
    }
}

/// Lists archived records ordered by (timestamp, sensor id). `time_range` is
/// inclusive on both ends; both filters apply together.
pub fn scan_dataset(
    archive_dir: &Path,
    time_range: Option<(u64, u64)>,
    sensors: Option<&[&str]>,
) -> Result<Vec<ArchiveEntry>, IngestError> {
    let entries = fs::read_dir(archive_dir).map_err(|e| unavailable(archive_dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| unavailable(archive_dir, e))?;
        let name = entry.file_name();
        let Some((timestamp_ns, sensor_id)) = name.to_str().and_then(parse_archive_file_name)
        else {
            continue;
        };
        if let Some((t0, t1)) = time_range {
            if timestamp_ns < t0 || timestamp_ns > t1 {
                continue;
            }
        }
        if let Some(filter) = sensors {
            if !filter.contains(&sensor_id.as_str()) {
                continue;
            }
        }
        out.push(ArchiveEntry {
            timestamp_ns,
            sensor_id,
            path: entry.path(),
        });
    }
    out.sort_by(|a, b| {
        a.timestamp_ns
            .cmp(&b.timestamp_ns)
            .then_with(|| a.sensor_id.cmp(&b.sensor_id))
    });
    Ok(out)
}
