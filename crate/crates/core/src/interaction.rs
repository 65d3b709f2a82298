//! Interaction degree between a sensor's area set and a user's per-step box.
//!
//! Per area, the overlap is scored by a modified Jaccard index (overlap area
//! divided by the user box area only) and weighted by the area's degree μ
//! under the product t-norm. Per sensor, the weighted terms are merged by a
//! selectable aggregator; see [`AggregatorKind`] for why there is more than
//! one.

use crate::model::{BBox, InteractionArea, SensorModel};
use crate::segmentation::{GridMismatch, SegmentedLocationStream, StepIndex};
use std::collections::{BTreeMap, BTreeSet};

/// How the per-area terms of one sensor are merged into a single degree.
///
/// The intended union-style reading of the aggregation is the Łukasiewicz
/// t-conorm `min(1, a + b)`, which is commutative and monotone and is the
/// default. `PaperLiteral` instead folds the Łukasiewicz implication
/// `min(1, 1 - a + b)` pairwise left-to-right over the configured area order;
/// it is neither commutative nor a disjunction and is kept selectable for
/// fidelity experiments. `Max` is the plain maximum t-conorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregatorKind {
    #[default]
    LukasiewiczTConorm,
    PaperLiteral,
    Max,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 3] = [
        AggregatorKind::LukasiewiczTConorm,
        AggregatorKind::PaperLiteral,
        AggregatorKind::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregatorKind::LukasiewiczTConorm => "lukasiewicz-tconorm",
            AggregatorKind::PaperLiteral => "paper-literal",
            AggregatorKind::Max => "max",
        }
    }
}

impl std::str::FromStr for AggregatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lukasiewicz-tconorm" => Ok(AggregatorKind::LukasiewiczTConorm),
            "paper-literal" => Ok(AggregatorKind::PaperLiteral),
            "max" => Ok(AggregatorKind::Max),
            other => Err(format!(
                "unknown aggregator '{other}' (expected lukasiewicz-tconorm, paper-literal or max)"
            )),
        }
    }
}

/// Final interaction degree between one sensor and one user box, in `[0, 1]`.
///
/// The bound is structural: every term is a product of values in `[0, 1]`
/// and every aggregator maps `[0, 1]` pairs back into `[0, 1]`, so no
/// clamping is applied after the fact.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InteractionDegree(f64);

impl InteractionDegree {
    pub fn new(value: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "degree {value} outside [0,1]");
        InteractionDegree(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Modified Jaccard index: overlap area divided by the user box area only,
/// so a user fully inside an area scores 1 regardless of the area's size.
///
/// Zero-area user boxes (a stationary user, or a single sample in the window)
/// use the containment limit: 1 when the point or segment lies entirely
/// inside the area box, 0 otherwise.
pub fn jaccard_user(area: &InteractionArea, user_box: &BBox) -> f64 {
    let denom = user_box.area();
    if denom == 0.0 {
        if area.bbox.contains_box(user_box) {
            1.0
        } else {
            0.0
        }
    } else {
        area.bbox.intersection_area(user_box) / denom
    }
}

/// One area's contribution: μ weighted by the spatial overlap under the
/// product t-norm.
pub fn area_term(area: &InteractionArea, user_box: &BBox) -> f64 {
    area.degree * jaccard_user(area, user_box)
}

/// Folds the per-area terms of a sensor into its final interaction degree.
pub fn sensor_interaction_degree(
    model: &SensorModel,
    user_box: &BBox,
    agg: AggregatorKind,
) -> InteractionDegree {
    let mut terms = model.areas.iter().map(|a| area_term(a, user_box));
    let value = match agg {
        AggregatorKind::LukasiewiczTConorm => terms.fold(0.0, |acc, t| (acc + t).min(1.0)),
        AggregatorKind::Max => terms.fold(0.0, f64::max),
        // Pairwise left fold over the configured area order; order-sensitive.
        AggregatorKind::PaperLiteral => terms
            .by_ref()
            .next()
            .map(|first| terms.fold(first, |acc, t| (1.0 - acc + t).min(1.0)))
            .unwrap_or(0.0),
    };
    InteractionDegree::new(value)
}

/// Interaction degrees for every (step, sensor, user) cell of an aligned run.
///
/// Entries exist only where the user has a location step; a missing entry
/// reads as degree 0 downstream. The tracked-user set is carried so that
/// downstream densification knows which zero rows to materialize.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMatrix {
    pub delta_ms: i64,
    pub origin_ms: i64,
    pub users: BTreeSet<String>,
    entries: BTreeMap<(StepIndex, String, String), f64>,
}

impl DegreeMatrix {
    pub fn degree(&self, step: StepIndex, sensor_id: &str, user_id: &str) -> f64 {
        self.entries
            .get(&(step, sensor_id.to_string(), user_id.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Degrees of every tracked user for one (step, sensor) cell, with zeros
    /// filled in for users that have no location in the step.
    pub fn degrees_for(&self, step: StepIndex, sensor_id: &str) -> BTreeMap<String, f64> {
        self.users
            .iter()
            .map(|u| (u.clone(), self.degree(step, sensor_id, u)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(StepIndex, String, String), &f64)> {
        self.entries.iter()
    }
}

/// Evaluates the interaction degree for every sensor over every user location
/// step. All location streams must share the same Δ and origin.
pub fn degree_matrix(
    models: &[SensorModel],
    locations: &BTreeMap<String, SegmentedLocationStream>,
    agg: AggregatorKind,
) -> Result<DegreeMatrix, GridMismatch> {
    let (delta_ms, origin_ms) = match locations.values().next() {
        Some(first) => (first.delta_ms, first.origin_ms),
        None => (0, 0),
    };
    for stream in locations.values() {
        if stream.delta_ms != delta_ms || stream.origin_ms != origin_ms {
            return Err(GridMismatch {
                what: format!("location stream '{}'", stream.user_id),
                expected_delta_ms: delta_ms,
                expected_origin_ms: origin_ms,
                found_delta_ms: stream.delta_ms,
                found_origin_ms: stream.origin_ms,
            });
        }
    }

    let mut entries = BTreeMap::new();
    for (user_id, stream) in locations {
        for (step, user_box) in &stream.steps {
            for model in models {
                let d = sensor_interaction_degree(model, user_box, agg);
                entries.insert(
                    (*step, model.sensor_id.clone(), user_id.clone()),
                    d.value(),
                );
            }
        }
    }
    Ok(DegreeMatrix {
        delta_ms,
        origin_ms,
        users: locations.keys().cloned().collect(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, Policy, Timestamp};
    use crate::segmentation::segment_location;
    use crate::model::LocationSample;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn area(min_x: f64, min_y: f64, max_x: f64, max_y: f64, degree: f64) -> InteractionArea {
        InteractionArea::new(BBox::from_coords(min_x, min_y, max_x, max_y), degree, "a")
    }

    #[test]
    fn user_inside_area_scores_one() {
        let a = area(0.0, 0.0, 4.0, 4.0, 1.0);
        let u = BBox::from_coords(1.0, 1.0, 2.0, 2.0);
        assert_eq!(jaccard_user(&a, &u), 1.0);
    }

    #[test]
    fn disjoint_boxes_score_zero() {
        let a = area(0.0, 0.0, 1.0, 1.0, 1.0);
        let u = BBox::from_coords(5.0, 5.0, 6.0, 6.0);
        assert_eq!(jaccard_user(&a, &u), 0.0);
    }

    #[test]
    fn partial_overlap_divides_by_user_area() {
        // 1.0 of overlap over a 4.0 user box.
        let a = area(0.0, 0.0, 2.0, 2.0, 1.0);
        let u = BBox::from_coords(1.0, 1.0, 3.0, 3.0);
        assert_eq!(jaccard_user(&a, &u), 0.25);
    }

    #[test]
    fn partial_overlap_matches_sampling_oracle() {
        let a = area(0.0, 0.0, 2.0, 2.0, 1.0);
        let u = BBox::from_coords(1.0, 1.0, 3.0, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000u32;
        let mut hits = 0u32;
        for _ in 0..n {
            let p = Point::new(rng.random_range(1.0..=3.0), rng.random_range(1.0..=3.0));
            if a.bbox.contains_point(p) {
                hits += 1;
            }
        }
        let mc = f64::from(hits) / f64::from(n);
        assert!((mc - 0.25).abs() <= 1e-2, "sampling oracle gave {mc}");
    }

    #[test]
    fn zero_area_user_box_uses_containment_limit() {
        let a = area(0.0, 0.0, 2.0, 2.0, 1.0);
        assert_eq!(jaccard_user(&a, &BBox::at_point(Point::new(1.0, 1.0))), 1.0);
        assert_eq!(jaccard_user(&a, &BBox::at_point(Point::new(5.0, 1.0))), 0.0);
        // A segment straddling the boundary is not fully inside.
        let seg = BBox::from_coords(1.5, 1.0, 2.5, 1.0);
        assert_eq!(jaccard_user(&a, &seg), 0.0);
    }

    #[test]
    fn area_term_is_product_of_degree_and_jaccard() {
        let u = BBox::from_coords(1.0, 1.0, 3.0, 3.0);
        assert_eq!(area_term(&area(0.0, 0.0, 2.0, 2.0, 1.0), &u), 0.25);
        assert_eq!(area_term(&area(0.0, 0.0, 10.0, 10.0, 0.0), &u), 0.0);
        let half = InteractionArea::new(BBox::from_coords(1.0, 1.0, 2.0, 3.0), 0.5, "h");
        assert_eq!(area_term(&half, &u), 0.25);
    }

    fn model_with_terms(degrees_and_boxes: &[(f64, BBox)]) -> SensorModel {
        SensorModel::new(
            "s",
            degrees_and_boxes
                .iter()
                .enumerate()
                .map(|(i, (d, b))| InteractionArea::new(*b, *d, format!("a{i}")))
                .collect(),
            Policy::Exclusive,
        )
    }

    #[test]
    fn single_area_all_aggregators_agree() {
        let m = model_with_terms(&[(1.0, BBox::from_coords(0.0, 0.0, 4.0, 4.0))]);
        let u = BBox::from_coords(1.0, 1.0, 2.0, 2.0);
        for agg in AggregatorKind::ALL {
            assert_eq!(sensor_interaction_degree(&m, &u, agg).value(), 1.0);
        }
    }

    #[test]
    fn lukasiewicz_tconorm_caps_at_one() {
        // Terms 0.6 and 0.7: user box half-covered by a μ=1 area plus
        // fully covered by a μ=0.7 area... constructed directly instead:
        // box fully inside both areas, degrees 0.6 and 0.7.
        let m = model_with_terms(&[
            (0.6, BBox::from_coords(0.0, 0.0, 4.0, 4.0)),
            (0.7, BBox::from_coords(0.0, 0.0, 4.0, 4.0)),
        ]);
        let u = BBox::from_coords(1.0, 1.0, 2.0, 2.0);
        let d = sensor_interaction_degree(&m, &u, AggregatorKind::LukasiewiczTConorm);
        assert_eq!(d.value(), 1.0);
    }

    #[test]
    fn user_only_in_zero_degree_area_scores_zero_under_default() {
        // Appliance area plus a wide shared area with μ=0; the user overlaps
        // only the shared area.
        let m = SensorModel::new(
            "cutlery",
            vec![
                InteractionArea::new(BBox::from_coords(0.5, 0.5, 1.5, 1.5), 1.0, "cutlery"),
                InteractionArea::new(BBox::from_coords(0.0, 0.0, 5.0, 5.0), 0.0, "other"),
            ],
            Policy::Exclusive,
        );
        let u = BBox::from_coords(3.0, 3.0, 4.0, 4.0);
        let d = sensor_interaction_degree(&m, &u, AggregatorKind::LukasiewiczTConorm);
        assert_eq!(d.value(), 0.0);
        assert_eq!(sensor_interaction_degree(&m, &u, AggregatorKind::Max).value(), 0.0);
    }

    #[test]
    fn paper_literal_is_order_sensitive() {
        let applied = BBox::from_coords(0.0, 0.0, 4.0, 4.0);
        let unrelated = BBox::from_coords(10.0, 10.0, 11.0, 11.0);
        let u = BBox::from_coords(1.0, 1.0, 2.0, 2.0);
        // Terms [1, 0] vs [0, 1] under the literal implication fold.
        let hit_first = model_with_terms(&[(1.0, applied), (1.0, unrelated)]);
        let hit_last = model_with_terms(&[(1.0, unrelated), (1.0, applied)]);
        let a = sensor_interaction_degree(&hit_first, &u, AggregatorKind::PaperLiteral).value();
        let b = sensor_interaction_degree(&hit_last, &u, AggregatorKind::PaperLiteral).value();
        assert_eq!(a, 0.0);
        assert_eq!(b, 1.0);
        assert_ne!(a, b, "expected an order-sensitivity witness");
        // The default t-conorm is order-invariant on the same input.
        let c = sensor_interaction_degree(&hit_first, &u, AggregatorKind::LukasiewiczTConorm).value();
        let d = sensor_interaction_degree(&hit_last, &u, AggregatorKind::LukasiewiczTConorm).value();
        assert_eq!(c, d);
    }

    #[test]
    fn empty_location_streams_give_empty_matrix() {
        let models = vec![model_with_terms(&[(1.0, BBox::from_coords(0.0, 0.0, 1.0, 1.0))])];
        let locations = BTreeMap::new();
        let m = degree_matrix(&models, &locations, AggregatorKind::default()).unwrap();
        assert!(m.is_empty());
        assert!(m.users.is_empty());
    }

    #[test]
    fn single_cell_matrix_matches_direct_evaluation() {
        let model = SensorModel::new(
            "s",
            vec![area(0.0, 0.0, 2.0, 2.0, 1.0)],
            Policy::Multiple,
        );
        let samples = [
            LocationSample::new("u", Point::new(0.5, 0.5), Timestamp::from_ms(1_000)),
            LocationSample::new("u", Point::new(1.5, 1.0), Timestamp::from_ms(2_000)),
        ];
        let stream = segment_location(&samples, "u", 15_000, Timestamp::from_ms(0)).unwrap();
        let user_box = stream.steps[&StepIndex(0)];
        let mut locations = BTreeMap::new();
        locations.insert("u".to_string(), stream.clone());
        let m = degree_matrix(std::slice::from_ref(&model), &locations, AggregatorKind::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(
            m.degree(StepIndex(0), "s", "u"),
            sensor_interaction_degree(&model, &user_box, AggregatorKind::default()).value()
        );
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let models = vec![model_with_terms(&[(1.0, BBox::from_coords(0.0, 0.0, 1.0, 1.0))])];
        let s1 = segment_location(
            &[LocationSample::new("a", Point::new(0.0, 0.0), Timestamp::from_ms(0))],
            "a",
            15_000,
            Timestamp::from_ms(0),
        )
        .unwrap();
        let s2 = segment_location(
            &[LocationSample::new("b", Point::new(0.0, 0.0), Timestamp::from_ms(0))],
            "b",
            30_000,
            Timestamp::from_ms(0),
        )
        .unwrap();
        let mut locations = BTreeMap::new();
        locations.insert("a".to_string(), s1);
        locations.insert("b".to_string(), s2);
        assert!(degree_matrix(&models, &locations, AggregatorKind::default()).is_err());
    }

    #[test]
    fn random_matrix_matches_per_cell_recomputation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let models: Vec<SensorModel> = (0..3)
            .map(|i| {
                let x = rng.random_range(-5.0..5.0);
                let y = rng.random_range(-5.0..5.0);
                SensorModel::new(
                    format!("s{i}"),
                    vec![
                        area(x, y, x + 2.0, y + 2.0, rng.random_range(0.0..=1.0)),
                        area(x - 1.0, y - 1.0, x + 3.0, y + 3.0, rng.random_range(0.0..=1.0)),
                    ],
                    Policy::Multiple,
                )
            })
            .collect();
        let mut locations = BTreeMap::new();
        for u in ["alice", "bob"] {
            let samples: Vec<LocationSample> = (0..500)
                .map(|_| {
                    LocationSample::new(
                        u,
                        Point::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)),
                        Timestamp::from_ms(rng.random_range(0..50 * 15_000)),
                    )
                })
                .collect();
            locations.insert(
                u.to_string(),
                segment_location(&samples, u, 15_000, Timestamp::from_ms(0)).unwrap(),
            );
        }
        let matrix = degree_matrix(&models, &locations, AggregatorKind::default()).unwrap();

        // Exhaustive per-cell oracle: recompute every cell independently.
        let mut checked = 0;
        for (user, stream) in &locations {
            for (step, user_box) in &stream.steps {
                for model in &models {
                    let expect =
                        sensor_interaction_degree(model, user_box, AggregatorKind::default());
                    assert_eq!(matrix.degree(*step, &model.sensor_id, user), expect.value());
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, matrix.len());
    }
}
