//! Synthetic multi-occupancy scenarios with ground-truth actor labels, a
//! brute-force reference attribution, and scoring.
//!
//! Generated scenarios place each user in their own territory strip separated
//! by at least the requested gap, so pairwise user separation is guaranteed
//! by construction. Sensors are assigned round-robin to users and their μ=1
//! interaction areas sit inside the owner's strip; every sensor event is
//! emitted at the instant its actor's noise-free position enters that area.
//! Reported locations optionally add uniform disk noise.

use crate::discrimination::{AttributionRecord, Owner};
use crate::interaction::AggregatorKind;
use crate::io::{self, IoError};
use crate::model::{
    BBox, InteractionArea, LocationSample, Point, Policy, SensorModel, SensorSample, Timestamp,
};
use crate::segmentation::StepIndex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Location sampling rate of the simulated tags (10 Hz).
pub const SAMPLE_PERIOD_MS: i64 = 100;

const AREA_SIDE_M: f64 = 1.0;
const STRIP_MARGIN_M: f64 = 1.0;
/// Hard bound on the simulated arena; layouts that need more space are
/// rejected as infeasible.
pub const MAX_ARENA_M: f64 = 200.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("layout infeasible: needs {required_m:.1} m but the arena is capped at {max_m:.1} m")]
    InfeasibleLayout { required_m: f64, max_m: f64 },
    #[error("records reference sensor '{0}' which is not part of the scenario")]
    UnknownSensor(String),
    #[error("no truth event for sensor '{sensor_id}' in step {step}")]
    MissingTruth { sensor_id: String, step: i64 },
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub seed: u64,
    pub n_users: usize,
    pub n_sensors: usize,
    pub duration_ms: i64,
    pub noise_m: f64,
    pub min_separation_m: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            seed: 0,
            n_users: 2,
            n_sensors: 4,
            duration_ms: 600_000,
            noise_m: 0.0,
            min_separation_m: 2.0,
        }
    }
}

/// A complete synthetic deployment: layout, streams and per-event ground
/// truth. Reproducible from its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub layout: Vec<SensorModel>,
    pub locations: BTreeMap<String, Vec<LocationSample>>,
    pub sensor_events: Vec<SensorSample>,
    /// Actor of each raw sensor event, keyed by (sensor id, event time).
    pub truth: BTreeMap<(String, Timestamp), Owner>,
}

fn user_name(i: usize) -> String {
    // A, B, ..., Z, U26, U27, ...
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("U{i}")
    }
}

fn sensor_name(i: usize) -> String {
    format!("sensor{i:02}")
}

fn strictly_inside(b: &BBox, p: Point) -> bool {
    b.min.x < p.x && p.x < b.max.x && b.min.y < p.y && p.y < b.max.y
}

/// Generates a seeded scenario. Users walk random waypoint paths inside
/// their own strip, with half of the waypoints drawn from the centers of
/// their own sensor areas so appliance visits actually happen.
pub fn generate_scenario(params: &ScenarioParams) -> Result<Scenario, ScenarioError> {
    assert!(params.n_users >= 1, "need at least one user");
    assert!(params.duration_ms > 0, "duration must be positive");
    assert!(params.noise_m >= 0.0, "noise must be non-negative");

    let gap = params.min_separation_m.max(0.5);
    let strip_w = AREA_SIDE_M + 2.0 * STRIP_MARGIN_M;
    let arena_w = params.n_users as f64 * strip_w + (params.n_users - 1) as f64 * gap;
    let per_user = params.n_sensors.div_ceil(params.n_users.max(1));
    let arena_h = if per_user == 0 {
        2.0 * STRIP_MARGIN_M + AREA_SIDE_M
    } else {
        2.0 * STRIP_MARGIN_M + per_user as f64 * AREA_SIDE_M + (per_user - 1) as f64 * gap
    };
    let required = arena_w.max(arena_h);
    if required > MAX_ARENA_M {
        return Err(ScenarioError::InfeasibleLayout {
            required_m: required,
            max_m: MAX_ARENA_M,
        });
    }

    // Strips and sensor placement.
    let strip = |u: usize| -> BBox {
        let x0 = u as f64 * (strip_w + gap);
        BBox::from_coords(x0, 0.0, x0 + strip_w, arena_h)
    };
    let mut layout = Vec::with_capacity(params.n_sensors);
    let mut areas_of_user: Vec<Vec<BBox>> = vec![Vec::new(); params.n_users];
    for s in 0..params.n_sensors {
        let owner = s % params.n_users;
        let slot = s / params.n_users;
        let st = strip(owner);
        let x0 = st.min.x + STRIP_MARGIN_M;
        let y0 = STRIP_MARGIN_M + slot as f64 * (AREA_SIDE_M + gap);
        let appliance = BBox::from_coords(x0, y0, x0 + AREA_SIDE_M, y0 + AREA_SIDE_M);
        areas_of_user[owner].push(appliance);
        let policy = if s % 2 == 0 { Policy::Exclusive } else { Policy::Multiple };
        layout.push(SensorModel::new(
            sensor_name(s),
            vec![
                InteractionArea::new(appliance, 1.0, sensor_name(s)),
                // Shared working area over the whole strip, degree 0.
                InteractionArea::new(st, 0.0, "other"),
            ],
            policy,
        ));
    }

    // Walks: one rng per user, all derived from the master seed.
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let user_seeds: Vec<u64> = (0..params.n_users).map(|_| master.random()).collect();

    let mut locations: BTreeMap<String, Vec<LocationSample>> = BTreeMap::new();
    let mut sensor_events: Vec<SensorSample> = Vec::new();
    let mut truth: BTreeMap<(String, Timestamp), Owner> = BTreeMap::new();

    let n_ticks = params.duration_ms / SAMPLE_PERIOD_MS;
    for u in 0..params.n_users {
        let name = user_name(u);
        let mut rng = ChaCha8Rng::seed_from_u64(user_seeds[u]);
        let st = strip(u);
        let wander = BBox::from_coords(
            st.min.x + 0.2,
            st.min.y + 0.2,
            st.max.x - 0.2,
            st.max.y - 0.2,
        );
        let own_areas = &areas_of_user[u];
        let pick_waypoint = |rng: &mut ChaCha8Rng| -> Point {
            if !own_areas.is_empty() && rng.random_bool(0.5) {
                let a = &own_areas[rng.random_range(0..own_areas.len())];
                Point::new(
                    rng.random_range(a.min.x + 0.2..a.max.x - 0.2),
                    rng.random_range(a.min.y + 0.2..a.max.y - 0.2),
                )
            } else {
                Point::new(
                    rng.random_range(wander.min.x..wander.max.x),
                    rng.random_range(wander.min.y..wander.max.y),
                )
            }
        };

        let mut pos = Point::new(
            rng.random_range(wander.min.x..wander.max.x),
            rng.random_range(wander.min.y..wander.max.y),
        );
        let mut waypoint = pick_waypoint(&mut rng);
        let mut speed: f64 = rng.random_range(0.6..1.6);
        let mut inside: Vec<bool> = vec![false; layout.len()];
        let samples = locations.entry(name.clone()).or_default();

        for tick in 0..=n_ticks {
            let t = Timestamp::from_ms(tick * SAMPLE_PERIOD_MS);
            if tick > 0 {
                let dx = waypoint.x - pos.x;
                let dy = waypoint.y - pos.y;
                let dist = dx.hypot(dy);
                let step = speed * (SAMPLE_PERIOD_MS as f64 / 1000.0);
                if dist <= step {
                    pos = waypoint;
                    waypoint = pick_waypoint(&mut rng);
                    speed = rng.random_range(0.6..1.6);
                } else {
                    pos = Point::new(pos.x + dx / dist * step, pos.y + dy / dist * step);
                }
            }

            let reported = if params.noise_m > 0.0 {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = params.noise_m * rng.random_range(0.0f64..=1.0).sqrt();
                Point::new(pos.x + radius * angle.cos(), pos.y + radius * angle.sin())
            } else {
                pos
            };
            samples.push(LocationSample::new(&name, reported, t));

            for (i, model) in layout.iter().enumerate() {
                let now = strictly_inside(&model.areas[0].bbox, pos);
                if now && !inside[i] {
                    sensor_events.push(SensorSample::new(&model.sensor_id, 1.0, t));
                    truth.insert((model.sensor_id.clone(), t), Owner::User(name.clone()));
                }
                inside[i] = now;
            }
        }
    }
    sensor_events.sort_by(|a, b| (a.t, &a.sensor_id).cmp(&(b.t, &b.sensor_id)));

    Ok(Scenario {
        params: params.clone(),
        layout,
        locations,
        sensor_events,
        truth,
    })
}

/// Reference attribution by direct per-window enumeration.
///
/// Every window between the earliest and latest timestamp is materialized
/// explicitly and all aggregates, degrees and owners are recomputed with
/// plain scans, independently of the streaming path. Intended for validation
/// on small scenarios; cost grows with windows × samples.
pub fn oracle_attribute(
    scenario: &Scenario,
    delta_ms: i64,
    agg: AggregatorKind,
) -> Vec<AttributionRecord> {
    assert!(delta_ms > 0, "time step must be positive");
    let times = scenario
        .sensor_events
        .iter()
        .map(|e| e.t.as_ms())
        .chain(
            scenario
                .locations
                .values()
                .flatten()
                .map(|l| l.t.as_ms()),
        )
        .collect::<Vec<_>>();
    let (Some(&min), Some(&max)) = (times.iter().min(), times.iter().max()) else {
        return Vec::new();
    };
    let origin = min.div_euclid(delta_ms) * delta_ms;
    let last_k = (max - origin).div_euclid(delta_ms);

    let mut records = Vec::new();
    for k in 0..=last_k {
        let lo = origin + k * delta_ms;
        let hi = lo + delta_ms;
        for model in &scenario.layout {
            let mut activation = f64::NEG_INFINITY;
            let mut any = false;
            for e in &scenario.sensor_events {
                if e.sensor_id == model.sensor_id && e.t.as_ms() >= lo && e.t.as_ms() < hi {
                    any = true;
                    activation = activation.max(e.value);
                }
            }
            if !any || activation <= 0.0 {
                continue;
            }

            let mut raw: BTreeMap<String, f64> = BTreeMap::new();
            for (user, samples) in &scenario.locations {
                let mut min_x = f64::INFINITY;
                let mut min_y = f64::INFINITY;
                let mut max_x = f64::NEG_INFINITY;
                let mut max_y = f64::NEG_INFINITY;
                let mut seen = false;
                for s in samples {
                    if s.t.as_ms() >= lo && s.t.as_ms() < hi {
                        seen = true;
                        min_x = min_x.min(s.point.x);
                        min_y = min_y.min(s.point.y);
                        max_x = max_x.max(s.point.x);
                        max_y = max_y.max(s.point.y);
                    }
                }
                let degree = if !seen {
                    0.0
                } else {
                    let user_area = (max_x - min_x) * (max_y - min_y);
                    let terms = scenario_terms(model, min_x, min_y, max_x, max_y, user_area);
                    fold_terms(&terms, agg)
                };
                raw.insert(user.clone(), degree);
            }

            // Argmax with lexicographic tie-break, recomputed directly.
            let mut owner = Owner::Others;
            let mut best = 0.0;
            let mut tie = false;
            for (user, d) in &raw {
                if *d > best {
                    best = *d;
                    owner = Owner::User(user.clone());
                    tie = false;
                } else if *d == best && *d > 0.0 && owner != Owner::Others {
                    tie = true;
                }
            }

            let policy = model.policy;
            let degrees: BTreeMap<String, f64> = match policy {
                Policy::Multiple => raw.clone(),
                Policy::Exclusive => raw
                    .iter()
                    .map(|(user, d)| {
                        let keep = matches!(&owner, Owner::User(w) if w == user);
                        (user.clone(), if keep { *d } else { 0.0 })
                    })
                    .collect(),
            };
            records.push(AttributionRecord {
                step: StepIndex(k),
                sensor_id: model.sensor_id.clone(),
                activation,
                degrees,
                exclusive_owner: owner,
                tie,
            });
        }
    }
    records.sort_by(|a, b| (a.step, &a.sensor_id).cmp(&(b.step, &b.sensor_id)));
    records
}

fn scenario_terms(
    model: &SensorModel,
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
    user_area: f64,
) -> Vec<f64> {
    model
        .areas
        .iter()
        .map(|a| {
            let j = if user_area == 0.0 {
                let contained = a.bbox.min.x <= min_x
                    && a.bbox.min.y <= min_y
                    && max_x <= a.bbox.max.x
                    && max_y <= a.bbox.max.y;
                if contained {
                    1.0
                } else {
                    0.0
                }
            } else {
                let w = (a.bbox.max.x.min(max_x) - a.bbox.min.x.max(min_x)).max(0.0);
                let h = (a.bbox.max.y.min(max_y) - a.bbox.min.y.max(min_y)).max(0.0);
                w * h / user_area
            };
            a.degree * j
        })
        .collect()
}

fn fold_terms(terms: &[f64], agg: AggregatorKind) -> f64 {
    match agg {
        AggregatorKind::LukasiewiczTConorm => {
            terms.iter().fold(0.0, |acc, t| (acc + t).min(1.0))
        }
        AggregatorKind::Max => terms.iter().fold(0.0, |acc, t| acc.max(*t)),
        AggregatorKind::PaperLiteral => {
            let mut it = terms.iter();
            match it.next() {
                None => 0.0,
                Some(first) => it.fold(*first, |acc, t| (1.0 - acc + t).min(1.0)),
            }
        }
    }
}

/// How multi-actor windows are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionMode {
    /// A window with events from several actors is scored against the
    /// earliest event's actor.
    #[default]
    EarliestActor,
    /// Collided windows are excluded from scoring entirely.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionCell {
    pub attributed: String,
    pub truth: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SensorScore {
    pub total: usize,
    pub correct: usize,
    pub confusion: Vec<ConfusionCell>,
}

/// Attribution-versus-truth tallies. `accuracy` is 1.0 on an empty record
/// set (vacuously perfect).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub excluded_collided: usize,
    pub sensors: BTreeMap<String, SensorScore>,
}

/// Scores attribution records against the scenario's ground truth on the
/// grid identified by (`delta_ms`, `origin_ms`).
pub fn score(
    records: &[AttributionRecord],
    scenario: &Scenario,
    delta_ms: i64,
    origin_ms: i64,
    mode: CollisionMode,
) -> Result<ScoreReport, ScenarioError> {
    // Window-level truth: earliest event's actor, plus a collision marker.
    let mut window_truth: BTreeMap<(String, i64), (Owner, bool)> = BTreeMap::new();
    for ((sensor_id, t), actor) in &scenario.truth {
        let k = (t.as_ms() - origin_ms).div_euclid(delta_ms);
        match window_truth.entry((sensor_id.clone(), k)) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert((actor.clone(), false));
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                if e.get().0 != *actor {
                    e.get_mut().1 = true;
                }
            }
        }
    }

    let mut sensors: BTreeMap<String, SensorScore> = BTreeMap::new();
    let mut confusion: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    let mut total = 0;
    let mut correct = 0;
    let mut excluded = 0;
    for r in records {
        if !scenario.layout.iter().any(|m| m.sensor_id == r.sensor_id) {
            return Err(ScenarioError::UnknownSensor(r.sensor_id.clone()));
        }
        let (actor, collided) = window_truth
            .get(&(r.sensor_id.clone(), r.step.0))
            .ok_or_else(|| ScenarioError::MissingTruth {
                sensor_id: r.sensor_id.clone(),
                step: r.step.0,
            })?;
        if *collided && mode == CollisionMode::Strict {
            excluded += 1;
            continue;
        }
        total += 1;
        let entry = sensors.entry(r.sensor_id.clone()).or_default();
        entry.total += 1;
        if r.exclusive_owner == *actor {
            correct += 1;
            entry.correct += 1;
        }
        *confusion
            .entry((
                r.sensor_id.clone(),
                r.exclusive_owner.to_string(),
                actor.to_string(),
            ))
            .or_insert(0) += 1;
    }
    for ((sensor_id, attributed, truth), count) in confusion {
        sensors.get_mut(&sensor_id).expect("sensor seen").confusion.push(ConfusionCell {
            attributed,
            truth,
            count,
        });
    }
    let accuracy = if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    };
    Ok(ScoreReport {
        total,
        correct,
        accuracy,
        excluded_collided: excluded,
        sensors,
    })
}

// ---------------------------------------------------------------------------
// Scenario export/import
// ---------------------------------------------------------------------------

pub const TRUTH_HEADER: [&str; 3] = ["sensor_id", "epoch_ms", "actor"];

/// Writes a scenario as `locations.csv`, `sensors.csv`, `truth.csv` and
/// `areas.json` in the given directory.
pub fn export_scenario(dir: impl AsRef<Path>, scenario: &Scenario) -> Result<(), ScenarioError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(IoError::from)?;

    let mut all_locations: Vec<LocationSample> =
        scenario.locations.values().flatten().cloned().collect();
    all_locations.sort_by(|a, b| (a.t, &a.user_id).cmp(&(b.t, &b.user_id)));
    io::write_location_csv_file(dir.join("locations.csv"), &all_locations)?;
    io::write_sensor_csv_file(dir.join("sensors.csv"), &scenario.sensor_events)?;
    io::write_area_config(
        dir.join("areas.json"),
        &io::AreaConfig::from_models(&scenario.layout, None),
    )?;

    let mut w = csv::Writer::from_writer(std::fs::File::create(dir.join("truth.csv")).map_err(IoError::from)?);
    w.write_record(TRUTH_HEADER).map_err(|e| IoError::MalformedRow {
        line: 0,
        msg: e.to_string(),
    })?;
    for ((sensor_id, t), actor) in &scenario.truth {
        w.write_record([sensor_id.as_str(), &t.as_ms().to_string(), &actor.to_string()])
            .map_err(|e| IoError::MalformedRow {
                line: 0,
                msg: e.to_string(),
            })?;
    }
    w.flush().map_err(IoError::from)?;
    Ok(())
}

/// Reads a scenario back from the directory layout written by
/// [`export_scenario`]. The RNG parameters are not recoverable from files;
/// imported scenarios carry default parameters.
pub fn import_scenario(dir: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let dir = dir.as_ref();
    let all_locations = io::parse_location_csv(dir.join("locations.csv"))?;
    let sensor_events = io::parse_sensor_csv(dir.join("sensors.csv"))?;
    let config = io::load_area_config(dir.join("areas.json"))?;

    let mut truth = BTreeMap::new();
    let data = std::fs::read_to_string(dir.join("truth.csv")).map_err(IoError::from)?;
    if !data.trim().is_empty() {
        let mut reader = csv::Reader::from_reader(data.as_bytes());
        let headers = reader.headers().map_err(|e| IoError::MalformedRow {
            line: 0,
            msg: e.to_string(),
        })?;
        if headers.iter().ne(TRUTH_HEADER.iter().copied()) {
            return Err(IoError::BadHeader {
                expected: TRUTH_HEADER.join(","),
                found: headers.iter().collect::<Vec<_>>().join(","),
            }
            .into());
        }
        for record in reader.records() {
            let record = record.map_err(|e| IoError::MalformedRow {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let ms: i64 = record[1].parse().map_err(|_| IoError::BadTimestamp {
                line,
                value: record[1].to_string(),
            })?;
            truth.insert(
                (record[0].to_string(), Timestamp::from_ms(ms)),
                Owner::parse(&record[2]),
            );
        }
    }

    let mut locations: BTreeMap<String, Vec<LocationSample>> = BTreeMap::new();
    for l in all_locations {
        locations.entry(l.user_id.clone()).or_default().push(l);
    }
    for samples in locations.values_mut() {
        samples.sort_by_key(|s| s.t);
    }

    Ok(Scenario {
        params: ScenarioParams::default(),
        layout: config.to_models(),
        locations,
        sensor_events,
        truth,
    })
}
