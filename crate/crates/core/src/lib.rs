//! Discriminates binary-sensor activations among multiple inhabitants.
//!
//! Indoor-location streams and binary sensor streams are aligned onto one
//! tumbling-window grid, each sensor's fuzzy interaction areas are matched
//! against each user's per-window movement box, and every activated window is
//! attributed to the user with the supreme interaction degree (or to the
//! residual `OTHERS` class when nobody tracked relates to it).
//!
//! Modules follow the processing order: [`model`] (types and geometry),
//! [`segmentation`], [`interaction`], [`discrimination`], with [`io`] for
//! file formats, [`pipeline`] for the end-to-end composition, [`scenario`]
//! for synthetic ground-truth runs and the reference attribution path, and
//! [`report`] for count tables and exports.

pub mod discrimination;
pub mod interaction;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod segmentation;

pub use discrimination::{AttributionRecord, Owner, OTHERS_LABEL};
pub use interaction::{AggregatorKind, DegreeMatrix, InteractionDegree};
pub use model::{
    BBox, InteractionArea, LocationSample, Point, Policy, SensorModel, SensorSample, Timestamp,
};
pub use pipeline::{attribute_streams, segment_streams, AttributionOutput, SegmentedRun};
pub use report::{CountTable, Timeline};
pub use scenario::{Scenario, ScenarioParams, ScoreReport};
pub use segmentation::{
    common_origin, segment_binary, segment_location, SegmentedLocationStream,
    SegmentedSensorStream, StepIndex,
};
