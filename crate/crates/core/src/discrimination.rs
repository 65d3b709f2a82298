//! Per-user discrimination of activation steps.
//!
//! For every (sensor, step) with a positive segmented activation, the degree
//! matrix row is turned into an attribution record. The sensor's policy
//! shapes the stored degrees; the exclusive owner is always computed by
//! argmax so that per-owner counts partition the activation totals exactly.

use crate::interaction::DegreeMatrix;
use crate::model::{Policy, SensorModel};
use crate::segmentation::{GridMismatch, SegmentedSensorStream, StepIndex};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Reserved label for activations with zero degree for every tracked user.
pub const OTHERS_LABEL: &str = "OTHERS";

#[derive(Debug, Error)]
pub enum DiscriminationError {
    #[error(transparent)]
    GridMismatch(#[from] GridMismatch),
    #[error("no sensor model configured for '{0}'")]
    MissingModel(String),
}

/// Who an activation is attributed to: a tracked user, or the residual
/// `OTHERS` class (untracked inhabitants).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    User(String),
    Others,
}

impl Owner {
    /// Parses the reserved `OTHERS` label; anything else is a user id.
    pub fn parse(s: &str) -> Owner {
        if s == OTHERS_LABEL {
            Owner::Others
        } else {
            Owner::User(s.to_string())
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::User(u) => write!(f, "{u}"),
            Owner::Others => write!(f, "{OTHERS_LABEL}"),
        }
    }
}

/// One discriminated activation: a (sensor, step) cell with per-user degrees
/// and the exclusive owner decision.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionRecord {
    pub step: StepIndex,
    pub sensor_id: String,
    /// Segmented activation value of the step, strictly positive.
    pub activation: f64,
    /// Per-user degrees after the sensor's policy was applied.
    pub degrees: BTreeMap<String, f64>,
    /// Argmax owner; `Others` iff every degree is zero.
    pub exclusive_owner: Owner,
    /// Set when two or more users tied for the supreme degree; the
    /// lexicographically smallest user id wins in that case.
    pub tie: bool,
}

/// Argmax owner of a degree row plus a tie flag.
///
/// Returns `Others` when the maximum degree is zero (no spatial relation to
/// any tracked user). Ties on a positive maximum go to the lexicographically
/// smallest user id and are flagged.
pub fn argmax_owner(degrees: &BTreeMap<String, f64>) -> (Owner, bool) {
    let mut best: Option<(&str, f64)> = None;
    let mut tied = false;
    for (user, d) in degrees {
        match best {
            None => best = Some((user, *d)),
            Some((_, bd)) => {
                if *d > bd {
                    best = Some((user, *d));
                    tied = false;
                } else if *d == bd {
                    // BTreeMap iterates in ascending key order, so the
                    // earlier user is already the lexicographic winner.
                    tied = true;
                }
            }
        }
    }
    match best {
        Some((user, d)) if d > 0.0 => (Owner::User(user.to_string()), tied),
        _ => (Owner::Others, false),
    }
}

/// Multiple-user policy: every user keeps their interaction degree.
pub fn attribute_multiple(degrees: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    degrees.clone()
}

/// Exclusive single-user policy: the argmax user keeps their degree, everyone
/// else drops to zero. A zero maximum zeroes the whole row.
pub fn attribute_exclusive(degrees: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let (owner, _) = argmax_owner(degrees);
    degrees
        .iter()
        .map(|(user, d)| {
            let keep = matches!(&owner, Owner::User(w) if w == user);
            (user.clone(), if keep { *d } else { 0.0 })
        })
        .collect()
}

/// Builds one attribution record per activated (sensor, step) cell.
///
/// Sensor streams and the degree matrix must share the window grid. Records
/// are ordered by (step, sensor id).
pub fn discriminate(
    models: &[SensorModel],
    sensors: &BTreeMap<String, SegmentedSensorStream>,
    matrix: &DegreeMatrix,
) -> Result<Vec<AttributionRecord>, DiscriminationError> {
    let has_locations = !matrix.users.is_empty();
    let mut records = Vec::new();
    for (sensor_id, stream) in sensors {
        // An all-empty matrix (no tracked users) has no grid of its own; any
        // sensor grid is acceptable then.
        if has_locations && (stream.delta_ms != matrix.delta_ms || stream.origin_ms != matrix.origin_ms)
        {
            return Err(GridMismatch {
                what: format!("sensor stream '{sensor_id}'"),
                expected_delta_ms: matrix.delta_ms,
                expected_origin_ms: matrix.origin_ms,
                found_delta_ms: stream.delta_ms,
                found_origin_ms: stream.origin_ms,
            }
            .into());
        }
        let model = models
            .iter()
            .find(|m| m.sensor_id == *sensor_id)
            .ok_or_else(|| DiscriminationError::MissingModel(sensor_id.clone()))?;
        for (step, activation) in stream.steps.iter().filter(|(_, v)| **v > 0.0) {
            let raw = matrix.degrees_for(*step, sensor_id);
            let (owner, tie) = argmax_owner(&raw);
            let degrees = match model.policy {
                Policy::Multiple => attribute_multiple(&raw),
                Policy::Exclusive => attribute_exclusive(&raw),
            };
            records.push(AttributionRecord {
                step: *step,
                sensor_id: sensor_id.clone(),
                activation: *activation,
                degrees,
                exclusive_owner: owner,
                tie,
            });
        }
    }
    records.sort_by(|a, b| (a.step, &a.sensor_id).cmp(&(b.step, &b.sensor_id)));
    Ok(records)
}
