//! Tumbling-window segmentation of raw sensor and location streams.
//!
//! Raw events are bucketed onto a shared grid of half-open windows
//! `[origin + k·Δ, origin + (k+1)·Δ)`. Binary streams aggregate by max,
//! location streams by the componentwise bounding box of the points seen in
//! the window. Windows with no samples are omitted; memory stays proportional
//! to the number of events.

use crate::model::{BBox, LocationSample, SensorSample, Timestamp};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("time step must be positive, got {0} ms")]
    InvalidDelta(i64),
    #[error("no samples in any input stream")]
    NoData,
}

/// Two streams were segmented onto different grids and cannot be combined.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("grid mismatch for {what}: expected delta={expected_delta_ms}ms origin={expected_origin_ms}, found delta={found_delta_ms}ms origin={found_origin_ms}")]
pub struct GridMismatch {
    pub what: String,
    pub expected_delta_ms: i64,
    pub expected_origin_ms: i64,
    pub found_delta_ms: i64,
    pub found_origin_ms: i64,
}

/// Index of one tumbling window on the shared grid.
///
/// Window `k` covers `[origin + k·Δ, origin + (k+1)·Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepIndex(pub i64);

impl StepIndex {
    /// Window index of a timestamp. Uses floor division, so timestamps before
    /// the origin map to negative indices instead of wrapping.
    pub fn of(t: Timestamp, origin: Timestamp, delta_ms: i64) -> Self {
        StepIndex((t.as_ms() - origin.as_ms()).div_euclid(delta_ms))
    }

    /// Inclusive start of this window in absolute milliseconds.
    pub fn start_ms(self, origin: Timestamp, delta_ms: i64) -> i64 {
        origin.as_ms() + self.0 * delta_ms
    }
}

/// One sensor's stream aggregated onto the grid; values are window maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedSensorStream {
    pub sensor_id: String,
    pub delta_ms: i64,
    pub origin_ms: i64,
    pub steps: BTreeMap<StepIndex, f64>,
}

impl SegmentedSensorStream {
    /// Number of windows whose aggregated value is strictly positive. This is
    /// the segmented activation count reported in summaries.
    pub fn activated_steps(&self) -> usize {
        self.steps.values().filter(|v| **v > 0.0).count()
    }
}

/// One user's stream aggregated onto the grid; each window holds the bounding
/// box of every point seen inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedLocationStream {
    pub user_id: String,
    pub delta_ms: i64,
    pub origin_ms: i64,
    pub steps: BTreeMap<StepIndex, BBox>,
}

/// Aggregates a binary/graded sensor stream by per-window max.
///
/// Input order is irrelevant; samples are bucketed by window index. An empty
/// stream yields an empty segmented stream, not an error.
pub fn segment_binary(
    samples: &[SensorSample],
    sensor_id: &str,
    delta_ms: i64,
    origin: Timestamp,
) -> Result<SegmentedSensorStream, SegmentError> {
    if delta_ms <= 0 {
        return Err(SegmentError::InvalidDelta(delta_ms));
    }
    let mut steps: BTreeMap<StepIndex, f64> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.sensor_id == sensor_id) {
        let k = StepIndex::of(s.t, origin, delta_ms);
        steps
            .entry(k)
            .and_modify(|v| *v = v.max(s.value))
            .or_insert(s.value);
    }
    Ok(SegmentedSensorStream {
        sensor_id: sensor_id.to_string(),
        delta_ms,
        origin_ms: origin.as_ms(),
        steps,
    })
}

/// Aggregates a location stream by per-window componentwise min/max.
///
/// Single-point windows yield zero-area boxes. Every raw point is contained
/// in its window's box.
pub fn segment_location(
    samples: &[LocationSample],
    user_id: &str,
    delta_ms: i64,
    origin: Timestamp,
) -> Result<SegmentedLocationStream, SegmentError> {
    if delta_ms <= 0 {
        return Err(SegmentError::InvalidDelta(delta_ms));
    }
    let mut steps: BTreeMap<StepIndex, BBox> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.user_id == user_id) {
        let k = StepIndex::of(s.t, origin, delta_ms);
        steps
            .entry(k)
            .and_modify(|b| b.expand_to(s.point))
            .or_insert_with(|| BBox::at_point(s.point));
    }
    Ok(SegmentedLocationStream {
        user_id: user_id.to_string(),
        delta_ms,
        origin_ms: origin.as_ms(),
        steps,
    })
}

/// Shared window-grid phase for a set of streams: the earliest timestamp
/// rounded down to a multiple of Δ. Anchoring every stream at the same origin
/// keeps their window indices directly comparable.
pub fn common_origin(
    timestamps: impl IntoIterator<Item = Timestamp>,
    delta_ms: i64,
) -> Result<Timestamp, SegmentError> {
    if delta_ms <= 0 {
        return Err(SegmentError::InvalidDelta(delta_ms));
    }
    let min = timestamps
        .into_iter()
        .min()
        .ok_or(SegmentError::NoData)?;
    Ok(Timestamp::from_ms(min.as_ms().div_euclid(delta_ms) * delta_ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn ts(ms: i64) -> Timestamp {
        Timestamp::from_ms(ms)
    }

    #[test]
    fn rejects_non_positive_delta() {
        assert_eq!(
            segment_binary(&[], "s", 0, ts(0)).unwrap_err(),
            SegmentError::InvalidDelta(0)
        );
        assert_eq!(
            segment_location(&[], "u", -5, ts(0)).unwrap_err(),
            SegmentError::InvalidDelta(-5)
        );
    }

    #[test]
    fn empty_stream_yields_empty_segmentation() {
        let seg = segment_binary(&[], "s", 15_000, ts(0)).unwrap();
        assert!(seg.steps.is_empty());
        assert_eq!(seg.activated_steps(), 0);
    }

    #[test]
    fn single_sample_lands_in_window_zero() {
        let samples = [SensorSample::new("door", 1.0, ts(0))];
        let seg = segment_binary(&samples, "door", 15_000, ts(0)).unwrap();
        assert_eq!(seg.steps.len(), 1);
        assert_eq!(seg.steps[&StepIndex(0)], 1.0);
    }

    #[test]
    fn window_of_points_takes_componentwise_extrema() {
        let samples = [
            LocationSample::new("a", Point::new(1.0, 1.0), ts(100)),
            LocationSample::new("a", Point::new(3.0, 0.0), ts(200)),
            LocationSample::new("a", Point::new(2.0, 5.0), ts(300)),
        ];
        let seg = segment_location(&samples, "a", 15_000, ts(0)).unwrap();
        assert_eq!(
            seg.steps[&StepIndex(0)],
            BBox::from_coords(1.0, 0.0, 3.0, 5.0)
        );
    }

    #[test]
    fn common_origin_rounds_down_to_grid() {
        assert_eq!(common_origin([ts(17)], 15_000).unwrap(), ts(0));
        assert_eq!(common_origin([ts(31_000)], 15_000).unwrap(), ts(30_000));
        assert_eq!(
            common_origin(std::iter::empty(), 15_000).unwrap_err(),
            SegmentError::NoData
        );
    }

    #[test]
    fn common_origin_never_yields_negative_window_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let delta = rng.random_range(1..60_000);
            let times: Vec<Timestamp> = (0..50)
                .map(|_| ts(rng.random_range(0..10_000_000)))
                .collect();
            let origin = common_origin(times.iter().copied(), delta).unwrap();
            for t in &times {
                assert!(StepIndex::of(*t, origin, delta).0 >= 0);
            }
        }
    }

    /// Brute-force bucketing oracle: group by floor((t - origin)/Δ), then max.
    fn oracle_binary(samples: &[SensorSample], delta: i64, origin: i64) -> HashMap<i64, f64> {
        let mut out: HashMap<i64, f64> = HashMap::new();
        for s in samples {
            let k = (s.t.as_ms() - origin).div_euclid(delta);
            let e = out.entry(k).or_insert(f64::NEG_INFINITY);
            *e = e.max(s.value);
        }
        out
    }

    #[test]
    fn matches_bruteforce_bucketing_oracle_on_random_binary_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<SensorSample> = (0..1000)
            .map(|_| {
                SensorSample::new(
                    "s",
                    if rng.random_bool(0.5) { 1.0 } else { 0.0 },
                    ts(rng.random_range(0..500_000)),
                )
            })
            .collect();
        let seg = segment_binary(&samples, "s", 15_000, ts(0)).unwrap();
        let oracle = oracle_binary(&samples, 15_000, 0);
        assert_eq!(seg.steps.len(), oracle.len());
        for (k, v) in &seg.steps {
            assert_eq!(oracle[&k.0], *v);
        }
    }

    #[test]
    fn matches_bruteforce_bucketing_oracle_on_random_location_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<LocationSample> = (0..10_000)
            .map(|_| {
                LocationSample::new(
                    "u",
                    Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                    ts(rng.random_range(0..2_000_000)),
                )
            })
            .collect();
        let seg = segment_location(&samples, "u", 15_000, ts(0)).unwrap();

        let mut oracle: HashMap<i64, (f64, f64, f64, f64)> = HashMap::new();
        for s in &samples {
            let k = s.t.as_ms().div_euclid(15_000);
            let e = oracle
                .entry(k)
                .or_insert((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(s.point.x);
            e.1 = e.1.min(s.point.y);
            e.2 = e.2.max(s.point.x);
            e.3 = e.3.max(s.point.y);
        }
        assert_eq!(seg.steps.len(), oracle.len());
        for (k, b) in &seg.steps {
            let (x0, y0, x1, y1) = oracle[&k.0];
            assert_eq!(*b, BBox::from_coords(x0, y0, x1, y1));
        }
        // Segmentation never produces more steps than raw samples.
        assert!(seg.steps.len() <= samples.len());
    }

    #[test]
    fn idempotent_on_resegmented_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<SensorSample> = (0..300)
            .map(|_| SensorSample::new("s", rng.random_range(0.0..1.0), ts(rng.random_range(0..90_000))))
            .collect();
        let first = segment_binary(&samples, "s", 15_000, ts(0)).unwrap();
        // Re-expand each step as one sample at its window start and segment again.
        let expanded: Vec<SensorSample> = first
            .steps
            .iter()
            .map(|(k, v)| SensorSample::new("s", *v, ts(k.start_ms(ts(0), 15_000))))
            .collect();
        let second = segment_binary(&expanded, "s", 15_000, ts(0)).unwrap();
        assert_eq!(first.steps, second.steps);
    }
}
