//! End-to-end composition of the streaming path: group raw samples, segment
//! them onto a shared grid, evaluate the degree matrix and discriminate.
//!
//! The CLI and the test suites drive the pipeline through this module so
//! that every caller gets identical grouping, origin and ordering behavior.

use crate::discrimination::{discriminate, AttributionRecord, DiscriminationError};
use crate::interaction::{degree_matrix, AggregatorKind, DegreeMatrix};
use crate::model::{LocationSample, SensorModel, SensorSample, Timestamp};
use crate::segmentation::{
    common_origin, segment_binary, segment_location, SegmentError, SegmentedLocationStream,
    SegmentedSensorStream,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Discrimination(#[from] DiscriminationError),
}

impl From<crate::segmentation::GridMismatch> for PipelineError {
    fn from(e: crate::segmentation::GridMismatch) -> Self {
        PipelineError::Discrimination(e.into())
    }
}

/// All streams of one run segmented onto a single window grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedRun {
    pub delta_ms: i64,
    pub origin_ms: i64,
    pub sensors: BTreeMap<String, SegmentedSensorStream>,
    pub locations: BTreeMap<String, SegmentedLocationStream>,
}

/// Segments every sensor and location stream found in the raw samples.
///
/// With `origin: None` the shared grid is anchored at the earliest timestamp
/// across all streams. Inputs with no samples at all produce an empty run
/// anchored at 0 rather than an error.
pub fn segment_streams(
    sensor_samples: &[SensorSample],
    location_samples: &[LocationSample],
    delta_ms: i64,
    origin: Option<Timestamp>,
) -> Result<SegmentedRun, SegmentError> {
    if delta_ms <= 0 {
        return Err(SegmentError::InvalidDelta(delta_ms));
    }
    let origin = match origin {
        Some(o) => o,
        None => {
            let all = sensor_samples
                .iter()
                .map(|s| s.t)
                .chain(location_samples.iter().map(|l| l.t));
            match common_origin(all, delta_ms) {
                Ok(o) => o,
                Err(SegmentError::NoData) => Timestamp::from_ms(0),
                Err(e) => return Err(e),
            }
        }
    };

    let mut by_sensor: BTreeMap<String, Vec<SensorSample>> = BTreeMap::new();
    for s in sensor_samples {
        by_sensor.entry(s.sensor_id.clone()).or_default().push(s.clone());
    }
    let mut by_user: BTreeMap<String, Vec<LocationSample>> = BTreeMap::new();
    for l in location_samples {
        by_user.entry(l.user_id.clone()).or_default().push(l.clone());
    }

    let mut sensors = BTreeMap::new();
    for (id, samples) in &by_sensor {
        sensors.insert(id.clone(), segment_binary(samples, id, delta_ms, origin)?);
    }
    let mut locations = BTreeMap::new();
    for (id, samples) in &by_user {
        locations.insert(id.clone(), segment_location(samples, id, delta_ms, origin)?);
    }
    Ok(SegmentedRun {
        delta_ms,
        origin_ms: origin.as_ms(),
        sensors,
        locations,
    })
}

/// Full attribution output: the segmented run, the degree matrix and the
/// discriminated records in canonical (step, sensor) order.
#[derive(Debug, Clone)]
pub struct AttributionOutput {
    pub run: SegmentedRun,
    pub matrix: DegreeMatrix,
    pub records: Vec<AttributionRecord>,
}

/// Runs segmentation, degree evaluation and discrimination in one pass.
pub fn attribute_streams(
    models: &[SensorModel],
    sensor_samples: &[SensorSample],
    location_samples: &[LocationSample],
    delta_ms: i64,
    origin: Option<Timestamp>,
    agg: AggregatorKind,
) -> Result<AttributionOutput, PipelineError> {
    let run = segment_streams(sensor_samples, location_samples, delta_ms, origin)?;
    let matrix = degree_matrix(models, &run.locations, agg)?;
    let records = discriminate(models, &run.sensors, &matrix)?;
    Ok(AttributionOutput {
        run,
        matrix,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, InteractionArea, Point, Policy};

    #[test]
    fn empty_inputs_yield_an_empty_run() {
        let run = segment_streams(&[], &[], 15_000, None).unwrap();
        assert!(run.sensors.is_empty());
        assert!(run.locations.is_empty());
        assert_eq!(run.origin_ms, 0);
    }

    #[test]
    fn groups_streams_by_id_and_shares_one_grid() {
        let sensors = [
            SensorSample::new("a", 1.0, Timestamp::from_ms(31_000)),
            SensorSample::new("b", 1.0, Timestamp::from_ms(46_000)),
        ];
        let locations = [
            LocationSample::new("u", Point::new(0.0, 0.0), Timestamp::from_ms(32_000)),
        ];
        let run = segment_streams(&sensors, &locations, 15_000, None).unwrap();
        assert_eq!(run.origin_ms, 30_000);
        assert_eq!(run.sensors.len(), 2);
        assert_eq!(run.locations.len(), 1);
        for s in run.sensors.values() {
            assert_eq!(s.origin_ms, 30_000);
        }
    }

    #[test]
    fn attribution_composes_end_to_end() {
        let models = vec![SensorModel::new(
            "door",
            vec![InteractionArea::new(BBox::from_coords(0.0, 0.0, 2.0, 2.0), 1.0, "door")],
            Policy::Exclusive,
        )];
        let sensors = [SensorSample::new("door", 1.0, Timestamp::from_ms(1_000))];
        let locations = [
            LocationSample::new("A", Point::new(0.4, 0.4), Timestamp::from_ms(500)),
            LocationSample::new("A", Point::new(0.9, 1.1), Timestamp::from_ms(900)),
        ];
        let out = attribute_streams(
            &models,
            &sensors,
            &locations,
            15_000,
            None,
            AggregatorKind::default(),
        )
        .unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].degrees["A"], 1.0);
    }
}
