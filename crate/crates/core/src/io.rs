//! File ingestion and emission: location/sensor CSV, the sensor-area JSON
//! config, and newline-delimited JSON replay.
//!
//! Formats are fixed so that emit→parse round-trips are lossless and emitted
//! files are canonical (fixed column order, LF line endings, shortest
//! round-trip number formatting):
//!
//! - location CSV: `user_id,epoch_ms,x,y`
//! - sensor CSV: `sensor_id,epoch_ms,value`
//! - area config: JSON with a `"version": 1` field (schema in docs/)
//! - replay: one JSON object per line, tagged `"kind": "sensor" | "location"`

use crate::model::{BBox, InteractionArea, LocationSample, Point, Policy, SensorModel, SensorSample, Timestamp};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

pub const LOCATION_HEADER: [&str; 4] = ["user_id", "epoch_ms", "x", "y"];
pub const SENSOR_HEADER: [&str; 3] = ["sensor_id", "epoch_ms", "value"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: malformed row: {msg}")]
    MalformedRow { line: u64, msg: String },
    #[error("line {line}: non-finite coordinate")]
    NonFiniteCoordinate { line: u64 },
    #[error("line {line}: bad timestamp '{value}'")]
    BadTimestamp { line: u64, value: String },
    #[error("line {line}: value {value} outside [0,1]")]
    ValueOutOfRange { line: u64, value: f64 },
    #[error("bad header: expected '{expected}', found '{found}'")]
    BadHeader { expected: String, found: String },
    #[error("config schema error at {path}: {msg}")]
    SchemaError { path: String, msg: String },
    #[error("config: degree {value} at {path} outside [0,1]")]
    DegreeOutOfRange { path: String, value: f64 },
    #[error("config: invalid box at {path}")]
    InvalidBox { path: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn csv_error(err: csv::Error) -> IoError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    IoError::MalformedRow {
        line,
        msg: match err.kind() {
            csv::ErrorKind::Io(e) => e.to_string(),
            other => format!("{other:?}"),
        },
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IoError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(IoError::BadHeader {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_epoch_ms(field: &str, line: u64) -> Result<Timestamp, IoError> {
    let ms: i64 = field.parse().map_err(|_| IoError::BadTimestamp {
        line,
        value: field.to_string(),
    })?;
    if ms < 0 {
        return Err(IoError::BadTimestamp {
            line,
            value: field.to_string(),
        });
    }
    Ok(Timestamp::from_ms(ms))
}

/// Parses a location CSV (`user_id,epoch_ms,x,y`). A zero-byte or
/// whitespace-only file is an empty stream, not an error.
pub fn parse_location_csv(path: impl AsRef<Path>) -> Result<Vec<LocationSample>, IoError> {
    parse_location_csv_reader(fs::read_to_string(path)?.as_bytes())
}

pub fn parse_location_csv_reader(data: impl std::io::Read) -> Result<Vec<LocationSample>, IoError> {
    let mut buf = String::new();
    let mut data = data;
    data.read_to_string(&mut buf)?;
    if buf.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(buf.as_bytes());
    check_header(reader.headers().map_err(csv_error)?, &LOCATION_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(IoError::MalformedRow {
                line,
                msg: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let t = parse_epoch_ms(&record[1], line)?;
        let x: f64 = record[2].parse().map_err(|_| IoError::MalformedRow {
            line,
            msg: format!("bad x '{}'", &record[2]),
        })?;
        let y: f64 = record[3].parse().map_err(|_| IoError::MalformedRow {
            line,
            msg: format!("bad y '{}'", &record[3]),
        })?;
        if !x.is_finite() || !y.is_finite() {
            return Err(IoError::NonFiniteCoordinate { line });
        }
        out.push(LocationSample::new(&record[0], Point::new(x, y), t));
    }
    Ok(out)
}

/// Parses a sensor CSV (`sensor_id,epoch_ms,value`); values must lie in
/// `[0,1]` (binary deployments emit 0/1).
pub fn parse_sensor_csv(path: impl AsRef<Path>) -> Result<Vec<SensorSample>, IoError> {
    parse_sensor_csv_reader(fs::read_to_string(path)?.as_bytes())
}

pub fn parse_sensor_csv_reader(data: impl std::io::Read) -> Result<Vec<SensorSample>, IoError> {
    let mut buf = String::new();
    let mut data = data;
    data.read_to_string(&mut buf)?;
    if buf.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(buf.as_bytes());
    check_header(reader.headers().map_err(csv_error)?, &SENSOR_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(IoError::MalformedRow {
                line,
                msg: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let t = parse_epoch_ms(&record[1], line)?;
        let value: f64 = record[2].parse().map_err(|_| IoError::MalformedRow {
            line,
            msg: format!("bad value '{}'", &record[2]),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(IoError::ValueOutOfRange { line, value });
        }
        out.push(SensorSample::new(&record[0], value, t));
    }
    Ok(out)
}

/// Writes location samples in canonical form.
pub fn write_location_csv<W: Write>(w: W, samples: &[LocationSample]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(LOCATION_HEADER).map_err(csv_error)?;
    for s in samples {
        writer
            .write_record([
                s.user_id.as_str(),
                &s.t.as_ms().to_string(),
                &s.point.x.to_string(),
                &s.point.y.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_location_csv_file(
    path: impl AsRef<Path>,
    samples: &[LocationSample],
) -> Result<(), IoError> {
    write_location_csv(fs::File::create(path)?, samples)
}

/// Writes sensor samples in canonical form.
pub fn write_sensor_csv<W: Write>(w: W, samples: &[SensorSample]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(SENSOR_HEADER).map_err(csv_error)?;
    for s in samples {
        writer
            .write_record([
                s.sensor_id.as_str(),
                &s.t.as_ms().to_string(),
                &s.value.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_sensor_csv_file(
    path: impl AsRef<Path>,
    samples: &[SensorSample],
) -> Result<(), IoError> {
    write_sensor_csv(fs::File::create(path)?, samples)
}

// ---------------------------------------------------------------------------
// Area configuration
// ---------------------------------------------------------------------------

/// On-disk sensor-area and policy configuration. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    /// Format version; must be 1.
    pub version: u32,
    /// Optional default time step used when the CLI is not given `--delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ms: Option<i64>,
    pub sensors: Vec<SensorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub sensor_id: String,
    pub policy: Policy,
    pub areas: Vec<AreaConfigEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfigEntry {
    pub label: String,
    /// `[min_x, min_y, max_x, max_y]` in meters.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub degree: f64,
}

impl AreaConfig {
    pub fn validate(&self) -> Result<(), IoError> {
        if self.version != 1 {
            return Err(IoError::SchemaError {
                path: "version".into(),
                msg: format!("unsupported version {}, expected 1", self.version),
            });
        }
        if let Some(delta) = self.delta_ms {
            if delta <= 0 {
                return Err(IoError::SchemaError {
                    path: "delta_ms".into(),
                    msg: format!("time step must be positive, got {delta}"),
                });
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, sensor) in self.sensors.iter().enumerate() {
            let base = format!("sensors[{i}]");
            if !seen.insert(&sensor.sensor_id) {
                return Err(IoError::SchemaError {
                    path: format!("{base}.sensor_id"),
                    msg: format!("duplicate sensor id '{}'", sensor.sensor_id),
                });
            }
            if sensor.areas.is_empty() {
                return Err(IoError::SchemaError {
                    path: format!("{base}.areas"),
                    msg: "a sensor needs at least one interaction area".into(),
                });
            }
            for (j, a) in sensor.areas.iter().enumerate() {
                let path = format!("{base}.areas[{j}]");
                if !a.degree.is_finite() || !(0.0..=1.0).contains(&a.degree) {
                    return Err(IoError::DegreeOutOfRange {
                        path: format!("{path}.degree"),
                        value: a.degree,
                    });
                }
                let [x0, y0, x1, y1] = a.bbox;
                let finite = a.bbox.iter().all(|v| v.is_finite());
                if !finite || x0 > x1 || y0 > y1 {
                    return Err(IoError::InvalidBox {
                        path: format!("{path}.box"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Sensor models in config order, with area order preserved.
    pub fn to_models(&self) -> Vec<SensorModel> {
        self.sensors
            .iter()
            .map(|s| {
                SensorModel::new(
                    &s.sensor_id,
                    s.areas
                        .iter()
                        .map(|a| {
                            InteractionArea::new(
                                BBox::from_coords(a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]),
                                a.degree,
                                &a.label,
                            )
                        })
                        .collect(),
                    s.policy,
                )
            })
            .collect()
    }

    pub fn from_models(models: &[SensorModel], delta_ms: Option<i64>) -> Self {
        AreaConfig {
            version: 1,
            delta_ms,
            sensors: models
                .iter()
                .map(|m| SensorConfig {
                    sensor_id: m.sensor_id.clone(),
                    policy: m.policy,
                    areas: m
                        .areas
                        .iter()
                        .map(|a| AreaConfigEntry {
                            label: a.label.clone(),
                            bbox: [a.bbox.min.x, a.bbox.min.y, a.bbox.max.x, a.bbox.max.y],
                            degree: a.degree,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Loads and validates the sensor-area configuration.
pub fn load_area_config(path: impl AsRef<Path>) -> Result<AreaConfig, IoError> {
    parse_area_config(&fs::read_to_string(path)?)
}

pub fn parse_area_config(json: &str) -> Result<AreaConfig, IoError> {
    let config: AreaConfig = serde_json::from_str(json).map_err(|e| IoError::SchemaError {
        path: format!("line {} column {}", e.line(), e.column()),
        msg: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn write_area_config(path: impl AsRef<Path>, config: &AreaConfig) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(config).expect("config serializes");
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// NDJSON replay
// ---------------------------------------------------------------------------

/// One raw event on the replay wire, either a sensor activation or a
/// location fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RawRecord {
    Sensor {
        sensor_id: String,
        epoch_ms: i64,
        value: f64,
    },
    Location {
        user_id: String,
        epoch_ms: i64,
        x: f64,
        y: f64,
    },
}

impl RawRecord {
    fn is_valid(&self) -> bool {
        match self {
            RawRecord::Sensor { epoch_ms, value, .. } => {
                *epoch_ms >= 0 && (0.0..=1.0).contains(value)
            }
            RawRecord::Location { epoch_ms, x, y, .. } => {
                *epoch_ms >= 0 && x.is_finite() && y.is_finite()
            }
        }
    }
}

impl From<&SensorSample> for RawRecord {
    fn from(s: &SensorSample) -> Self {
        RawRecord::Sensor {
            sensor_id: s.sensor_id.clone(),
            epoch_ms: s.t.as_ms(),
            value: s.value,
        }
    }
}

impl From<&LocationSample> for RawRecord {
    fn from(s: &LocationSample) -> Self {
        RawRecord::Location {
            user_id: s.user_id.clone(),
            epoch_ms: s.t.as_ms(),
            x: s.point.x,
            y: s.point.y,
        }
    }
}

impl TryFrom<RawRecord> for SensorSample {
    type Error = RawRecord;

    fn try_from(r: RawRecord) -> Result<Self, RawRecord> {
        match r {
            RawRecord::Sensor {
                sensor_id,
                epoch_ms,
                value,
            } => Ok(SensorSample::new(sensor_id, value, Timestamp::from_ms(epoch_ms))),
            other => Err(other),
        }
    }
}

impl TryFrom<RawRecord> for LocationSample {
    type Error = RawRecord;

    fn try_from(r: RawRecord) -> Result<Self, RawRecord> {
        match r {
            RawRecord::Location {
                user_id,
                epoch_ms,
                x,
                y,
            } => Ok(LocationSample::new(user_id, Point::new(x, y), Timestamp::from_ms(epoch_ms))),
            other => Err(other),
        }
    }
}

/// Streaming NDJSON reader. Malformed or blank lines are skipped, counted
/// and reported through `log`; good records are yielded in arrival order.
pub struct NdjsonReplay<R> {
    reader: R,
    line_no: u64,
    skipped: u64,
}

impl<R: BufRead> NdjsonReplay<R> {
    pub fn new(reader: R) -> Self {
        NdjsonReplay {
            reader,
            line_no: 0,
            skipped: 0,
        }
    }

    /// Number of lines skipped so far (blank or unparseable).
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

impl<R: BufRead> Iterator for NdjsonReplay<R> {
    type Item = RawRecord;

    fn next(&mut self) -> Option<RawRecord> {
        loop {
            let mut line = String::new();
            match self.reader.read_line(&mut line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    log::warn!("replay: read error after line {}: {e}", self.line_no);
                    return None;
                }
            }
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                self.skipped += 1;
                continue;
            }
            match serde_json::from_str::<RawRecord>(trimmed) {
                Ok(record) if record.is_valid() => return Some(record),
                Ok(_) => {
                    self.skipped += 1;
                    log::warn!("replay: line {}: record fails range checks", self.line_no);
                }
                Err(e) => {
                    self.skipped += 1;
                    log::warn!("replay: line {}: {e}", self.line_no);
                }
            }
        }
    }
}

/// Convenience constructor over any reader.
pub fn replay_ndjson<R: BufRead>(reader: R) -> NdjsonReplay<R> {
    NdjsonReplay::new(reader)
}

/// Writes records as canonical NDJSON, one object per line.
pub fn write_ndjson<W: Write>(mut w: W, records: &[RawRecord]) -> Result<(), IoError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| IoError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_location_rows() {
        let data = "user_id,epoch_ms,x,y\nA,1000,1.5,2.0\n";
        let samples = parse_location_csv_reader(data.as_bytes()).unwrap();
        assert_eq!(
            samples,
            vec![LocationSample::new("A", Point::new(1.5, 2.0), Timestamp::from_ms(1000))]
        );
    }

    #[test]
    fn rejects_nan_coordinate_with_line_number() {
        let data = "user_id,epoch_ms,x,y\nA,1000,NaN,2.0\n";
        match parse_location_csv_reader(data.as_bytes()) {
            Err(IoError::NonFiniteCoordinate { line }) => assert_eq!(line, 2),
            other => panic!("expected NonFiniteCoordinate, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_timestamp() {
        let data = "user_id,epoch_ms,x,y\nA,-5,1.0,2.0\n";
        assert!(matches!(
            parse_location_csv_reader(data.as_bytes()),
            Err(IoError::BadTimestamp { line: 2, .. })
        ));
    }

    #[test]
    fn parses_sensor_rows() {
        let data = "sensor_id,epoch_ms,value\nfridge,2000,1\n";
        let samples = parse_sensor_csv_reader(data.as_bytes()).unwrap();
        assert_eq!(
            samples,
            vec![SensorSample::new("fridge", 1.0, Timestamp::from_ms(2000))]
        );
    }

    #[test]
    fn rejects_out_of_range_sensor_value() {
        let data = "sensor_id,epoch_ms,value\nfridge,2000,2\n";
        assert!(matches!(
            parse_sensor_csv_reader(data.as_bytes()),
            Err(IoError::ValueOutOfRange { line: 2, value }) if value == 2.0
        ));
    }

    #[test]
    fn rejects_wrong_header() {
        let data = "id,time,value\nfridge,2000,1\n";
        assert!(matches!(
            parse_sensor_csv_reader(data.as_bytes()),
            Err(IoError::BadHeader { .. })
        ));
    }

    #[test]
    fn empty_file_is_an_empty_stream() {
        assert!(parse_sensor_csv_reader("".as_bytes()).unwrap().is_empty());
        assert!(parse_location_csv_reader("\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_is_canonical() {
        let samples = vec![
            SensorSample::new("fridge", 1.0, Timestamp::from_ms(2000)),
            SensorSample::new("door,weird", 0.5, Timestamp::from_ms(3000)),
        ];
        let mut first = Vec::new();
        write_sensor_csv(&mut first, &samples).unwrap();
        let parsed = parse_sensor_csv_reader(first.as_slice()).unwrap();
        assert_eq!(parsed, samples);
        let mut second = Vec::new();
        write_sensor_csv(&mut second, &parsed).unwrap();
        assert_eq!(first, second);
    }

    fn sample_config() -> &'static str {
        r#"{
            "version": 1,
            "delta_ms": 15000,
            "sensors": [
                {
                    "sensor_id": "cutlery",
                    "policy": "exclusive",
                    "areas": [
                        {"label": "cutlery", "box": [0.5, 0.5, 1.5, 1.5], "degree": 1.0},
                        {"label": "other", "box": [0.0, 0.0, 5.0, 5.0], "degree": 0.0}
                    ]
                }
            ]
        }"#
    }

    #[test]
    fn loads_valid_config() {
        let config = parse_area_config(sample_config()).unwrap();
        assert_eq!(config.delta_ms, Some(15_000));
        let models = config.to_models();
        assert_eq!(models.len(), 1);
        assert_eq!(models[0].policy, Policy::Exclusive);
        assert_eq!(models[0].areas[0].degree, 1.0);
        assert_eq!(models[0].areas[1].degree, 0.0);
    }

    #[test]
    fn rejects_out_of_range_degree() {
        let bad = sample_config().replace("\"degree\": 1.0", "\"degree\": 1.5");
        match parse_area_config(&bad) {
            Err(IoError::DegreeOutOfRange { path, value }) => {
                assert_eq!(path, "sensors[0].areas[0].degree");
                assert_eq!(value, 1.5);
            }
            other => panic!("expected DegreeOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn rejects_inverted_box() {
        let bad = sample_config().replace("[0.5, 0.5, 1.5, 1.5]", "[2.5, 0.5, 1.5, 1.5]");
        match parse_area_config(&bad) {
            Err(IoError::InvalidBox { path }) => assert_eq!(path, "sensors[0].areas[0].box"),
            other => panic!("expected InvalidBox, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_fields() {
        let bad = sample_config().replace("\"version\": 1,", "\"version\": 1, \"surprise\": true,");
        assert!(matches!(
            parse_area_config(&bad),
            Err(IoError::SchemaError { .. })
        ));
    }

    #[test]
    fn replay_parses_and_counts_skips() {
        let input = "\
{\"kind\":\"sensor\",\"sensor_id\":\"fridge\",\"epoch_ms\":1,\"value\":1}\n\
\n\
not json\n\
{\"kind\":\"location\",\"user_id\":\"A\",\"epoch_ms\":2,\"x\":1.5,\"y\":2.0}\n";
        let mut replay = replay_ndjson(input.as_bytes());
        let first = replay.next().unwrap();
        assert_eq!(
            SensorSample::try_from(first).unwrap(),
            SensorSample::new("fridge", 1.0, Timestamp::from_ms(1))
        );
        let second = replay.next().unwrap();
        assert_eq!(
            LocationSample::try_from(second).unwrap(),
            LocationSample::new("A", Point::new(1.5, 2.0), Timestamp::from_ms(2))
        );
        assert!(replay.next().is_none());
        assert_eq!(replay.skipped(), 2);
    }

    #[test]
    fn ndjson_round_trip_preserves_records() {
        let records = vec![
            RawRecord::Sensor {
                sensor_id: "fridge".into(),
                epoch_ms: 1,
                value: 1.0,
            },
            RawRecord::Location {
                user_id: "A".into(),
                epoch_ms: 2,
                x: 1.5,
                y: -0.25,
            },
        ];
        let mut buf = Vec::new();
        write_ndjson(&mut buf, &records).unwrap();
        let replayed: Vec<RawRecord> = replay_ndjson(buf.as_slice()).collect();
        assert_eq!(replayed, records);
    }
}
