//! Sensor record envelope.
//!
//! A record is a CBOR map `{"t": uint, "id": text, "ch": {name: channel}}`
//! with deterministic encoding: map keys in RFC 8949 core deterministic order
//! (encoded length first, then bytewise) and floats in their shortest
//! lossless width. Equal records always encode to identical bytes.

use std::collections::BTreeMap;
use std::io::Cursor;

use ciborium::value::Value;

use super::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    /// One SI-unit scalar.
    Scalar(f64),
    /// Numeric samples (SI units, or raw counts for intensity-like channels).
    Array(Vec<f64>),
    Blob(Vec<u8>),
}

/// Largest timestamp whose 19-digit archive name still sorts correctly.
pub const MAX_TIMESTAMP_NS: u64 = 9_999_999_999_999_999_999;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub timestamp_ns: u64,
    pub sensor_id: String,
    pub payload: BTreeMap<String, Channel>,
}

impl SensorRecord {
    pub fn new(timestamp_ns: u64, sensor_id: impl Into<String>) -> Self {
        SensorRecord {
            timestamp_ns,
            sensor_id: sensor_id.into(),
            payload: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, channel: Channel) -> Self {
        self.payload.insert(name.into(), channel);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timestamp_ns == 0 {
            return Err("timestamp must be positive".into());
        }
        if self.timestamp_ns > MAX_TIMESTAMP_NS {
            return Err(format!("timestamp {} exceeds 19 digits", self.timestamp_ns));
        }
        validate_sensor_id(&self.sensor_id)
    }
}

/// Sensor ids become part of file names, so only `[A-Za-z0-9.-]` is allowed
/// (no leading dot, no underscore: it separates timestamp and id in archives).
pub fn validate_sensor_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("sensor id is empty".into());
    }
    if id.starts_with('.') {
        return Err(format!("sensor id `{id}` starts with a dot"));
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || *c == '-' || *c == '.'))
    {
        return Err(format!("sensor id `{id}` contains reserved character {c:?}"));
    }
    Ok(())
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

/// Core deterministic key order for text keys: shorter first, then bytewise.
fn canonical_key_order(a: &str, b: &str) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.as_bytes().cmp(b.as_bytes()))
}

fn encode_channel(name: &str, channel: &Channel) -> Result<Value, IngestError> {
    let finite = |v: f64| {
        if v.is_finite() {
            Ok(Value::Float(v))
        } else {
            Err(IngestError::UnencodablePayload(format!(
                "channel `{name}` holds non-finite value {v}"
            )))
        }
    };
    Ok(match channel {
        Channel::Scalar(v) => finite(*v)?,
        Channel::Array(values) => {
            Value::Array(values.iter().map(|&v| finite(v)).collect::<Result<_, _>>()?)
        }
        Channel::Blob(bytes) => Value::Bytes(bytes.clone()),
    })
}

pub fn encode_record(record: &SensorRecord) -> Result<Vec<u8>, IngestError> {
    record
        .validate()
        .map_err(IngestError::UnencodablePayload)?;

    let mut names: Vec<&String> = record.payload.keys().collect();
    names.sort_by(|a, b| canonical_key_order(a, b));
    let mut channels = Vec::with_capacity(names.len());
    for name in names {
        if name.is_empty() {
            return Err(IngestError::UnencodablePayload("empty channel name".into()));
        }
        channels.push((text(name), encode_channel(name, &record.payload[name])?));
    }

    // "t" < "ch" < "id" in deterministic order.
    let envelope = Value::Map(vec![
        (text("t"), Value::Integer(record.timestamp_ns.into())),
        (text("ch"), Value::Map(channels)),
        (text("id"), text(&record.sensor_id)),
    ]);
    let mut out = Vec::with_capacity(64);
    ciborium::ser::into_writer(&envelope, &mut out)
        .map_err(|e| IngestError::UnencodablePayload(e.to_string()))?;
    Ok(out)
}

fn malformed(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedEnvelope(msg.into())
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(i128::from(*i) as f64),
        _ => None,
    }
}

fn decode_channel(name: &str, value: Value) -> Result<Channel, IngestError> {
    match value {
        Value::Bytes(b) => Ok(Channel::Blob(b)),
        Value::Array(items) => items
            .iter()
            .map(|v| {
                number(v).ok_or_else(|| malformed(format!("channel `{name}` has a non-numeric element")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Channel::Array),
        other => number(&other)
            .map(Channel::Scalar)
            .ok_or_else(|| malformed(format!("channel `{name}` has unsupported kind"))),
    }
}

pub fn decode_record(data: &[u8]) -> Result<SensorRecord, IngestError> {
    let mut cursor = Cursor::new(data);
    let value: Value =
        ciborium::de::from_reader(&mut cursor).map_err(|e| malformed(e.to_string()))?;
    if cursor.position() as usize != data.len() {
        return Err(malformed("trailing bytes after envelope"));
    }
    let Value::Map(entries) = value else {
        return Err(malformed("envelope is not a map"));
    };

    let mut timestamp = None;
    let mut sensor_id = None;
    let mut channels = None;
    for (key, value) in entries {
        let Value::Text(key) = key else {
            return Err(malformed("non-text envelope key"));
        };
        match key.as_str() {
            "t" => {
                let Value::Integer(i) = value else {
                    return Err(malformed("`t` is not an unsigned integer"));
                };
                let t = u64::try_from(i).map_err(|_| malformed("`t` out of range"))?;
                timestamp = Some(t);
            }
            "id" => match value {
                Value::Text(s) => sensor_id = Some(s),
                _ => return Err(malformed("`id` is not text")),
            },
            "ch" => match value {
                Value::Map(m) => channels = Some(m),
                _ => return Err(malformed("`ch` is not a map")),
            },
            other => return Err(malformed(format!("unexpected envelope key `{other}`"))),
        }
    }
    let timestamp_ns = timestamp.ok_or_else(|| malformed("missing `t`"))?;
    let sensor_id = sensor_id.ok_or_else(|| malformed("missing `id`"))?;
    let mut payload = BTreeMap::new();
    for (key, value) in channels.unwrap_or_default() {
        let Value::Text(name) = key else {
            return Err(malformed("non-text channel name"));
        };
        let channel = decode_channel(&name, value)?;
        if payload.insert(name.clone(), channel).is_some() {
            return Err(malformed(format!("duplicate channel `{name}`")));
        }
    }
    let record = SensorRecord {
        timestamp_ns,
        sensor_id,
        payload,
    };
    record.validate().map_err(malformed)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ciborium::value::Integer;

    fn imu() -> SensorRecord {
        SensorRecord::new(1, "imu").with("ax", Channel::Scalar(0.0))
    }

    #[test]
    fn round_trip() {
        let rec = imu()
            .with("gyro", Channel::Array(vec![0.1, -2.5, 1e-300]))
            .with("raw", Channel::Blob(vec![0, 1, 255]));
        let bytes = encode_record(&rec).unwrap();
        assert_eq!(decode_record(&bytes).unwrap(), rec);
        assert_eq!(encode_record(&rec).unwrap(), bytes);
    }

    #[test]
    fn envelope_key_order_is_deterministic() {
        let bytes = encode_record(&imu()).unwrap();
        // map(3), "t", 1, "ch", ...
        assert_eq!(&bytes[..4], &[0xa3, 0x61, b't', 0x01]);
        assert_eq!(&bytes[4..7], &[0x62, b'c', b'h']);
        let mut r = SensorRecord::new(9, "x");
        for name in ["zz", "b", "aaa", "a"] {
            r = r.with(name, Channel::Scalar(1.0));
        }
        let Value::Map(entries) = ciborium::de::from_reader::<Value, _>(&encode_record(&r).unwrap()[..]).unwrap() else {
            panic!()
        };
        let Value::Map(ch) = &entries[1].1 else { panic!() };
        let names: Vec<_> = ch.iter().map(|(k, _)| k.as_text().unwrap().to_string()).collect();
        assert_eq!(names, ["a", "b", "zz", "aaa"]);
    }

    #[test]
    fn floats_use_shortest_lossless_width() {
        let half = encode_record(&SensorRecord::new(1, "a").with("v", Channel::Scalar(1.5))).unwrap();
        let double = encode_record(&SensorRecord::new(1, "a").with("v", Channel::Scalar(0.1))).unwrap();
        assert_eq!(double.len() - half.len(), 6);
    }

    #[test]
    fn rejects_non_finite() {
        for bad in [f64::NAN, f64::INFINITY] {
            let rec = SensorRecord::new(1, "imu").with("ax", Channel::Scalar(bad));
            assert!(matches!(encode_record(&rec), Err(IngestError::UnencodablePayload(_))));
            let rec = SensorRecord::new(1, "imu").with("ax", Channel::Array(vec![1.0, bad]));
            assert!(matches!(encode_record(&rec), Err(IngestError::UnencodablePayload(_))));
        }
    }

    #[test]
    fn rejects_invalid_identity() {
        assert!(encode_record(&SensorRecord::new(0, "imu")).is_err());
        assert!(encode_record(&SensorRecord::new(1, "")).is_err());
        assert!(encode_record(&SensorRecord::new(1, "a_b")).is_err());
        assert!(encode_record(&SensorRecord::new(1, "a/b")).is_err());
    }

    #[test]
    fn truncated_is_malformed() {
        let bytes = encode_record(&imu()).unwrap();
        for cut in 0..bytes.len() {
            assert!(
                matches!(decode_record(&bytes[..cut]), Err(IngestError::MalformedEnvelope(_))),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_record(&extra).is_err());
    }

    #[test]
    fn missing_fields_are_malformed() {
        let mut buf = Vec::new();
        let no_id = Value::Map(vec![
            (text("t"), Value::Integer(Integer::from(5u64))),
            (text("ch"), Value::Map(vec![])),
        ]);
        ciborium::ser::into_writer(&no_id, &mut buf).unwrap();
        assert!(matches!(decode_record(&buf), Err(IngestError::MalformedEnvelope(_))));

        buf.clear();
        let no_t = Value::Map(vec![(text("id"), text("imu"))]);
        ciborium::ser::into_writer(&no_t, &mut buf).unwrap();
        assert!(matches!(decode_record(&buf), Err(IngestError::MalformedEnvelope(_))));
    }
}
