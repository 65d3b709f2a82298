//! Count tables, timeline exports and per-user behavior summaries built from
//! attribution records.
//!
//! Counting is always partitioned by the exclusive owner, so for every sensor
//! the per-owner counts sum exactly to the number of activated steps.

use crate::discrimination::{AttributionRecord, Owner, OTHERS_LABEL};
use crate::io::IoError;
use crate::segmentation::StepIndex;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

/// Per-owner activation counts per sensor, plus the totals row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountTable {
    /// Column order (sorted sensor ids).
    pub sensors: Vec<String>,
    /// One row per tracked user (sorted) followed by the OTHERS row.
    pub rows: Vec<CountRow>,
    /// Per-sensor totals; always the column sums of `rows`.
    pub total: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub owner: String,
    pub cells: Vec<usize>,
}

impl CountTable {
    pub fn from_records(records: &[AttributionRecord]) -> CountTable {
        let sensors: BTreeSet<String> = records.iter().map(|r| r.sensor_id.clone()).collect();
        let users: BTreeSet<String> = records
            .iter()
            .flat_map(|r| r.degrees.keys().cloned())
            .collect();
        let owners: Vec<(String, Owner)> = records
            .iter()
            .map(|r| (r.sensor_id.clone(), r.exclusive_owner.clone()))
            .collect();
        Self::build(sensors, users, &owners)
    }

    pub fn from_timeline(timeline: &Timeline) -> CountTable {
        let sensors: BTreeSet<String> = timeline.rows.iter().map(|r| r.sensor_id.clone()).collect();
        let users: BTreeSet<String> = timeline.users.iter().cloned().collect();
        let owners: Vec<(String, Owner)> = timeline
            .rows
            .iter()
            .map(|r| (r.sensor_id.clone(), r.owner.clone()))
            .collect();
        Self::build(sensors, users, &owners)
    }

    fn build(
        sensors: BTreeSet<String>,
        users: BTreeSet<String>,
        owners: &[(String, Owner)],
    ) -> CountTable {
        let sensors: Vec<String> = sensors.into_iter().collect();
        if owners.is_empty() {
            return CountTable {
                sensors,
                rows: Vec::new(),
                total: Vec::new(),
            };
        }
        let col: BTreeMap<&str, usize> = sensors
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut rows: Vec<CountRow> = users
            .iter()
            .map(|u| CountRow {
                owner: u.clone(),
                cells: vec![0; sensors.len()],
            })
            .collect();
        rows.push(CountRow {
            owner: OTHERS_LABEL.to_string(),
            cells: vec![0; sensors.len()],
        });
        let row_of = |owner: &Owner| -> usize {
            match owner {
                Owner::User(u) => users.iter().position(|x| x == u).unwrap_or(users.len()),
                Owner::Others => users.len(),
            }
        };
        let mut total = vec![0; sensors.len()];
        for (sensor_id, owner) in owners {
            let c = col[sensor_id.as_str()];
            rows[row_of(owner)].cells[c] += 1;
            total[c] += 1;
        }
        CountTable {
            sensors,
            rows,
            total,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Count for one (owner label, sensor) cell; 0 when absent.
    pub fn cell(&self, owner: &str, sensor: &str) -> usize {
        let Some(c) = self.sensors.iter().position(|s| s == sensor) else {
            return 0;
        };
        self.rows
            .iter()
            .find(|r| r.owner == owner)
            .map(|r| r.cells[c])
            .unwrap_or(0)
    }

    /// Aligned text rendering with the totals row last.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let owner_w = self
            .rows
            .iter()
            .map(|r| r.owner.len())
            .chain(["owner".len(), "Total".len()])
            .max()
            .unwrap_or(5);
        let col_w: Vec<usize> = self
            .sensors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                self.rows
                    .iter()
                    .map(|r| r.cells[i].to_string().len())
                    .chain([s.len(), self.total.get(i).map_or(0, |t| t.to_string().len())])
                    .max()
                    .unwrap_or(s.len())
            })
            .collect();
        out.push_str(&format!("{:<owner_w$}", "owner"));
        for (i, s) in self.sensors.iter().enumerate() {
            out.push_str(&format!("  {:>w$}", s, w = col_w[i]));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<owner_w$}", row.owner));
            for (i, c) in row.cells.iter().enumerate() {
                out.push_str(&format!("  {:>w$}", c, w = col_w[i]));
            }
            out.push('\n');
        }
        if !self.rows.is_empty() {
            out.push_str(&format!("{:<owner_w$}", "Total"));
            for (i, c) in self.total.iter().enumerate() {
                out.push_str(&format!("  {:>w$}", c, w = col_w[i]));
            }
            out.push('\n');
        }
        out
    }

    /// CSV rendering: `owner,<sensor>,...` rows plus the Total row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), IoError> {
        let mut writer = csv::Writer::from_writer(&mut w);
        let mut header = vec!["owner".to_string()];
        header.extend(self.sensors.iter().cloned());
        writer
            .write_record(&header)
            .map_err(|e| IoError::MalformedRow {
                line: 0,
                msg: e.to_string(),
            })?;
        for row in &self.rows {
            let mut rec = vec![row.owner.clone()];
            rec.extend(row.cells.iter().map(|c| c.to_string()));
            writer.write_record(&rec).map_err(|e| IoError::MalformedRow {
                line: 0,
                msg: e.to_string(),
            })?;
        }
        if !self.rows.is_empty() {
            let mut rec = vec!["Total".to_string()];
            rec.extend(self.total.iter().map(|c| c.to_string()));
            writer.write_record(&rec).map_err(|e| IoError::MalformedRow {
                line: 0,
                msg: e.to_string(),
            })?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// One user's usage profile: their most-used sensor and per-sensor shares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserBehavior {
    pub user_id: String,
    /// Sensor with this user's highest count; absent when the user owns
    /// nothing. Ties go to the lexicographically first sensor.
    pub top_sensor: Option<String>,
    pub top_count: usize,
    pub shares: Vec<SensorShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorShare {
    pub sensor_id: String,
    pub count: usize,
    pub total: usize,
}

/// Per-user behavior summaries derived from a count table (OTHERS excluded).
pub fn user_behaviors(table: &CountTable) -> Vec<UserBehavior> {
    table
        .rows
        .iter()
        .filter(|r| r.owner != OTHERS_LABEL)
        .map(|row| {
            let top = row
                .cells
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .filter(|(_, c)| **c > 0);
            UserBehavior {
                user_id: row.owner.clone(),
                top_sensor: top.map(|(i, _)| table.sensors[i].clone()),
                top_count: top.map(|(_, c)| *c).unwrap_or(0),
                shares: table
                    .sensors
                    .iter()
                    .enumerate()
                    .map(|(i, s)| SensorShare {
                        sensor_id: s.clone(),
                        count: row.cells[i],
                        total: table.total[i],
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Stable JSON report: the count table plus the behavior summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportJson {
    pub sensors: Vec<String>,
    pub rows: Vec<CountRow>,
    pub total: Vec<usize>,
    pub users: Vec<UserBehavior>,
}

impl ReportJson {
    pub fn new(table: &CountTable) -> ReportJson {
        ReportJson {
            sensors: table.sensors.clone(),
            rows: table.rows.clone(),
            total: table.total.clone(),
            users: user_behaviors(table),
        }
    }
}

// ---------------------------------------------------------------------------
// Timeline export
// ---------------------------------------------------------------------------

/// Long-form attribution rows as stored in the timeline CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    /// Tracked users, in the column order of the file.
    pub users: Vec<String>,
    pub rows: Vec<TimelineRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub step_start_ms: i64,
    pub sensor_id: String,
    pub activation: f64,
    pub degrees: BTreeMap<String, f64>,
    pub owner: Owner,
}

/// Writes one row per attribution record:
/// `step_start_ms,sensor_id,raw_activation,degree_<user>...,owner`.
pub fn write_timeline_csv<W: Write>(
    w: W,
    records: &[AttributionRecord],
    users: &BTreeSet<String>,
    delta_ms: i64,
    origin_ms: i64,
) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(w);
    let mut header = vec!["step_start_ms".to_string(), "sensor_id".to_string(), "raw_activation".to_string()];
    header.extend(users.iter().map(|u| format!("degree_{u}")));
    header.push("owner".to_string());
    writer
        .write_record(&header)
        .map_err(|e| IoError::MalformedRow {
            line: 0,
            msg: e.to_string(),
        })?;
    for r in records {
        let start = StepIndex(r.step.0).start_ms(crate::model::Timestamp::from_ms(origin_ms), delta_ms);
        let mut rec = vec![
            start.to_string(),
            r.sensor_id.clone(),
            r.activation.to_string(),
        ];
        rec.extend(
            users
                .iter()
                .map(|u| r.degrees.get(u).copied().unwrap_or(0.0).to_string()),
        );
        rec.push(r.exclusive_owner.to_string());
        writer.write_record(&rec).map_err(|e| IoError::MalformedRow {
            line: 0,
            msg: e.to_string(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses a timeline CSV back into long-form rows. The tracked-user list is
/// recovered from the `degree_*` header columns.
pub fn read_timeline_csv(data: impl std::io::Read) -> Result<Timeline, IoError> {
    let mut buf = String::new();
    let mut data = data;
    data.read_to_string(&mut buf)?;
    if buf.trim().is_empty() {
        return Ok(Timeline {
            users: Vec::new(),
            rows: Vec::new(),
        });
    }
    let mut reader = csv::Reader::from_reader(buf.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::MalformedRow {
        line: 1,
        msg: e.to_string(),
    })?;
    let cols: Vec<String> = headers.iter().map(str::to_string).collect();
    let fixed_front = ["step_start_ms", "sensor_id", "raw_activation"];
    let front_ok = cols.len() >= 4 && cols[..3] == fixed_front && cols.last().map(String::as_str) == Some("owner");
    let users: Vec<String> = cols
        .iter()
        .skip(3)
        .take(cols.len().saturating_sub(4))
        .map(|c| c.strip_prefix("degree_").map(str::to_string))
        .collect::<Option<Vec<_>>>()
        .unwrap_or_default();
    if !front_ok || users.len() + 4 != cols.len() {
        return Err(IoError::BadHeader {
            expected: "step_start_ms,sensor_id,raw_activation,degree_<user>...,owner".into(),
            found: cols.join(","),
        });
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != cols.len() {
            return Err(IoError::MalformedRow {
                line,
                msg: format!("expected {} fields, found {}", cols.len(), record.len()),
            });
        }
        let step_start_ms: i64 = record[0].parse().map_err(|_| IoError::MalformedRow {
            line,
            msg: format!("bad step_start_ms '{}'", &record[0]),
        })?;
        let activation: f64 = record[2].parse().map_err(|_| IoError::MalformedRow {
            line,
            msg: format!("bad raw_activation '{}'", &record[2]),
        })?;
        let mut degrees = BTreeMap::new();
        for (i, u) in users.iter().enumerate() {
            let d: f64 = record[3 + i].parse().map_err(|_| IoError::MalformedRow {
                line,
                msg: format!("bad degree '{}'", &record[3 + i]),
            })?;
            degrees.insert(u.clone(), d);
        }
        rows.push(TimelineRow {
            step_start_ms,
            sensor_id: record[1].to_string(),
            activation,
            degrees,
            owner: Owner::parse(&record[record.len() - 1]),
        });
    }
    Ok(Timeline { users, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: i64, sensor: &str, owner: Owner, degrees: &[(&str, f64)]) -> AttributionRecord {
        AttributionRecord {
            step: StepIndex(step),
            sensor_id: sensor.to_string(),
            activation: 1.0,
            degrees: degrees.iter().map(|(u, d)| (u.to_string(), *d)).collect(),
            exclusive_owner: owner,
            tie: false,
        }
    }

    fn sample_records() -> Vec<AttributionRecord> {
        vec![
            record(0, "door", Owner::User("A".into()), &[("A", 1.0), ("B", 0.0)]),
            record(1, "door", Owner::User("B".into()), &[("A", 0.0), ("B", 0.5)]),
            record(2, "door", Owner::Others, &[("A", 0.0), ("B", 0.0)]),
            record(0, "tap", Owner::User("A".into()), &[("A", 0.7), ("B", 0.0)]),
        ]
    }

    #[test]
    fn counts_partition_per_sensor() {
        let table = CountTable::from_records(&sample_records());
        assert_eq!(table.sensors, vec!["door", "tap"]);
        assert_eq!(table.cell("A", "door"), 1);
        assert_eq!(table.cell("B", "door"), 1);
        assert_eq!(table.cell("OTHERS", "door"), 1);
        assert_eq!(table.total, vec![3, 1]);
        for (i, total) in table.total.iter().enumerate() {
            let sum: usize = table.rows.iter().map(|r| r.cells[i]).sum();
            assert_eq!(sum, *total);
        }
    }

    #[test]
    fn empty_records_make_an_empty_table() {
        let table = CountTable::from_records(&[]);
        assert!(table.is_empty());
        assert!(table.render_text().starts_with("owner"));
    }

    #[test]
    fn behavior_summary_names_top_sensor_and_shares() {
        let table = CountTable::from_records(&sample_records());
        let behaviors = user_behaviors(&table);
        assert_eq!(behaviors.len(), 2);
        let a = &behaviors[0];
        assert_eq!(a.user_id, "A");
        assert_eq!(a.top_sensor.as_deref(), Some("door"));
        assert_eq!(a.top_count, 1);
        assert_eq!(a.shares[0], SensorShare { sensor_id: "door".into(), count: 1, total: 3 });
    }

    #[test]
    fn timeline_round_trips_through_csv() {
        let records = sample_records();
        let users: BTreeSet<String> = ["A".to_string(), "B".to_string()].into_iter().collect();
        let mut buf = Vec::new();
        write_timeline_csv(&mut buf, &records, &users, 15_000, 30_000).unwrap();
        let timeline = read_timeline_csv(buf.as_slice()).unwrap();
        assert_eq!(timeline.users, vec!["A", "B"]);
        assert_eq!(timeline.rows.len(), records.len());
        assert_eq!(timeline.rows[0].step_start_ms, 30_000);
        assert_eq!(timeline.rows[0].owner, Owner::User("A".into()));
        assert_eq!(timeline.rows[0].degrees["A"], 1.0);
        let table = CountTable::from_timeline(&timeline);
        assert_eq!(table, CountTable::from_records(&records));
    }

    #[test]
    fn malformed_timeline_row_is_addressed() {
        let data = "step_start_ms,sensor_id,raw_activation,degree_A,owner\n0,door,zzz,1,A\n";
        assert!(matches!(
            read_timeline_csv(data.as_bytes()),
            Err(IoError::MalformedRow { line: 2, .. })
        ));
    }
}
