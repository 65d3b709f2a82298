//! Shared domain types and elementary axis-aligned 2D geometry.
//!
//! Everything here is an immutable value object: cheap to copy, safe to send
//! across threads, with no interior mutability. All geometric operations are
//! total functions on valid boxes.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Milliseconds since the Unix epoch.
///
/// Stored as `i64` so window arithmetic (`t - origin`) never wraps; parsers
/// reject negative values at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_ms(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn as_ms(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A 2D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A single activation measurement from one sensor.
///
/// `value` lies in `[0, 1]`; binary deployments emit only `0` and `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSample {
    pub sensor_id: String,
    pub value: f64,
    pub t: Timestamp,
}

impl SensorSample {
    pub fn new(sensor_id: impl Into<String>, value: f64, t: Timestamp) -> Self {
        SensorSample {
            sensor_id: sensor_id.into(),
            value,
            t,
        }
    }
}

/// A single position estimate for one tracked user.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSample {
    pub user_id: String,
    pub point: Point,
    pub t: Timestamp,
}

impl LocationSample {
    pub fn new(user_id: impl Into<String>, point: Point, t: Timestamp) -> Self {
        LocationSample {
            user_id: user_id.into(),
            point,
            t,
        }
    }
}

/// An axis-aligned box given by its minimum and maximum corners.
///
/// Boxes are closed sets. Degenerate boxes (a point or a segment, zero area)
/// are valid; they arise naturally from single-sample location windows.
/// Boundary-touching boxes intersect with area 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    /// Builds a box from two corners. Panics in debug builds if the corners
    /// are not ordered componentwise.
    pub fn new(min: Point, max: Point) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y, "inverted box corners");
        BBox { min, max }
    }

    pub fn from_coords(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self::new(Point::new(min_x, min_y), Point::new(max_x, max_y))
    }

    /// A zero-area box at a single point.
    pub fn at_point(p: Point) -> Self {
        BBox { min: p, max: p }
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x <= self.max.x && self.min.y <= self.max.y
    }

    /// Width times height; 0 for degenerate boxes.
    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    /// Overlap area with another box; 0 when disjoint. Commutative.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.max.x.min(other.max.x) - self.min.x.max(other.min.x)).max(0.0);
        let h = (self.max.y.min(other.max.y) - self.min.y.max(other.min.y)).max(0.0);
        w * h
    }

    /// Closed containment: boundary points count as inside.
    pub fn contains_point(&self, p: Point) -> bool {
        self.min.x <= p.x && p.x <= self.max.x && self.min.y <= p.y && p.y <= self.max.y
    }

    /// Closed containment of a whole box.
    pub fn contains_box(&self, other: &BBox) -> bool {
        self.contains_point(other.min) && self.contains_point(other.max)
    }

    /// Grows the box to cover `p`.
    pub fn expand_to(&mut self, p: Point) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }
}

/// A labelled region around a sensor with an interaction degree μ in `[0, 1]`.
///
/// μ expresses how strongly presence inside the box implies interaction with
/// the sensor: 1 for the appliance itself, 0 for a shared working area that
/// should contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionArea {
    pub bbox: BBox,
    pub degree: f64,
    pub label: String,
}

impl InteractionArea {
    pub fn new(bbox: BBox, degree: f64, label: impl Into<String>) -> Self {
        debug_assert!((0.0..=1.0).contains(&degree), "degree outside [0,1]");
        InteractionArea {
            bbox,
            degree,
            label: label.into(),
        }
    }
}

/// Attribution policy of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Several users may have interacted with the sensor in the same step.
    Multiple,
    /// Only the user with the supreme interaction degree keeps their degree.
    Exclusive,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Multiple => write!(f, "multiple"),
            Policy::Exclusive => write!(f, "exclusive"),
        }
    }
}

/// A sensor together with its ordered interaction areas and policy.
///
/// Area order matters for order-sensitive aggregators, so it is preserved
/// exactly as configured.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub sensor_id: String,
    pub areas: Vec<InteractionArea>,
    pub policy: Policy,
}

impl SensorModel {
    pub fn new(sensor_id: impl Into<String>, areas: Vec<InteractionArea>, policy: Policy) -> Self {
        debug_assert!(!areas.is_empty(), "sensor model requires at least one area");
        SensorModel {
            sensor_id: sensor_id.into(),
            areas,
            policy,
        }
    }
}
