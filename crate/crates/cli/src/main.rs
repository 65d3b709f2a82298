//! `proxattr` — segment, attribute, simulate and report on multi-occupancy
//! sensor/location streams.
//!
//! Exit codes: 0 success, 1 data error (parse/schema/grid), 2 usage error.
//! Log level is controlled by the `PROXATTR_LOG` environment variable.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use proxattr_core::interaction::AggregatorKind;
use proxattr_core::io as pio;
use proxattr_core::model::{LocationSample, SensorSample, Timestamp};
use proxattr_core::pipeline::{attribute_streams, segment_streams};
use proxattr_core::report::{user_behaviors, write_timeline_csv, CountTable, ReportJson};
use proxattr_core::scenario::{
    export_scenario, generate_scenario, score, CollisionMode, ScenarioParams,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

const DEFAULT_DELTA_MS: i64 = 15_000;

#[derive(Parser)]
#[command(
    name = "proxattr",
    version,
    about = "Discriminates binary-sensor activations among multiple inhabitants by proximity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment raw streams onto the shared window grid and print a summary
    Segment(SegmentArgs),
    /// Run the full attribution pipeline and write timeline + count table
    Attribute(AttributeArgs),
    /// Generate a synthetic scenario with ground truth, optionally score it
    Simulate(SimulateArgs),
    /// Render a count table and per-user summary from a timeline CSV
    Report(ReportArgs),
    /// Convert a third-party CSV export into the canonical formats
    Import(ImportArgs),
}

/// Window origin: `auto` anchors at the earliest timestamp rounded down to
/// the grid; an explicit value is used as-is.
#[derive(Debug, Clone, Copy)]
enum OriginArg {
    Auto,
    At(i64),
}

impl FromStr for OriginArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(OriginArg::Auto);
        }
        let ms: i64 = s
            .parse()
            .map_err(|_| format!("expected 'auto' or integer milliseconds, got '{s}'"))?;
        if ms < 0 {
            return Err(format!("origin must be non-negative, got {ms}"));
        }
        Ok(OriginArg::At(ms))
    }
}

impl OriginArg {
    fn resolve(self) -> Option<Timestamp> {
        match self {
            OriginArg::Auto => None,
            OriginArg::At(ms) => Some(Timestamp::from_ms(ms)),
        }
    }
}

fn parse_aggregator(s: &str) -> Result<AggregatorKind, String> {
    AggregatorKind::from_str(s)
}

#[derive(Args)]
struct SegmentArgs {
    /// Sensor CSV files (`sensor_id,epoch_ms,value`); repeatable
    #[arg(long = "sensors", value_name = "CSV")]
    sensors: Vec<PathBuf>,
    /// Location CSV files (`user_id,epoch_ms,x,y`); repeatable
    #[arg(long = "locations", value_name = "CSV")]
    locations: Vec<PathBuf>,
    /// Window length in milliseconds
    #[arg(long, default_value_t = DEFAULT_DELTA_MS, value_parser = clap::value_parser!(i64).range(1..))]
    delta: i64,
    /// Window grid origin: `auto` or absolute milliseconds
    #[arg(long, default_value = "auto")]
    origin: OriginArg,
    /// Output directory for segmented CSVs and `summary.json`
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct AttributeArgs {
    #[arg(long = "sensors", value_name = "CSV")]
    sensors: Vec<PathBuf>,
    #[arg(long = "locations", value_name = "CSV")]
    locations: Vec<PathBuf>,
    /// Sensor-area and policy configuration (JSON)
    #[arg(long, value_name = "JSON")]
    config: PathBuf,
    /// Area aggregation: lukasiewicz-tconorm, paper-literal or max
    #[arg(long, default_value = "lukasiewicz-tconorm", value_parser = parse_aggregator)]
    aggregator: AggregatorKind,
    /// Window length in milliseconds; defaults to the config's `delta_ms`,
    /// then 15000
    #[arg(long, value_parser = clap::value_parser!(i64).range(1..))]
    delta: Option<i64>,
    #[arg(long, default_value = "auto")]
    origin: OriginArg,
    /// Output directory for `timeline.csv` and `counts.csv`
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    users: u32,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    sensors: u32,
    /// Scenario duration in milliseconds
    #[arg(long, default_value_t = 600_000, value_parser = clap::value_parser!(i64).range(1..))]
    duration: i64,
    /// Uniform location noise radius in meters
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Minimum separation between user territories (and sensor areas)
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    /// Window length used when scoring
    #[arg(long, default_value_t = DEFAULT_DELTA_MS, value_parser = clap::value_parser!(i64).range(1..))]
    delta: i64,
    /// Output directory for the scenario files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Run the pipeline against the generated truth and report accuracy
    #[arg(long)]
    score: bool,
    /// Exclude windows with events from several actors instead of scoring
    /// them against the earliest event's actor
    #[arg(long)]
    strict_collisions: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Timeline CSV produced by `attribute`
    records: PathBuf,
    /// Output format
    #[arg(long, default_value = "table", value_parser = ["table", "csv", "json"])]
    format: String,
}

#[derive(Args)]
struct ImportArgs {
    /// Input CSV from a third-party export
    input: PathBuf,
    /// Record kind to extract
    #[arg(long, value_parser = ["sensor", "location"])]
    kind: String,
    /// Column holding the sensor/user identifier
    #[arg(long, value_name = "NAME")]
    id_col: String,
    /// Column holding the timestamp
    #[arg(long, value_name = "NAME")]
    time_col: String,
    /// Unit of the timestamp column
    #[arg(long, default_value = "ms", value_parser = ["ms", "s", "us"])]
    time_unit: String,
    /// Column holding x (location imports)
    #[arg(long, value_name = "NAME")]
    x_col: Option<String>,
    /// Column holding y (location imports)
    #[arg(long, value_name = "NAME")]
    y_col: Option<String>,
    /// Column holding the activation value (sensor imports)
    #[arg(long, value_name = "NAME")]
    value_col: Option<String>,
    /// Extra value spellings, e.g. `open=1,closed=0,on=1,off=0`
    #[arg(long, value_name = "MAP")]
    value_map: Option<String>,
    /// Canonical CSV to write
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

/// Post-parse usage error; mapped to exit code 2 like clap's own.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PROXATTR_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(args) => cmd_segment(args),
        Command::Attribute(args) => cmd_attribute(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
        Command::Import(args) => cmd_import(args),
    }
}

fn read_inputs(
    sensors: &[PathBuf],
    locations: &[PathBuf],
) -> Result<(Vec<SensorSample>, Vec<LocationSample>)> {
    let mut sensor_samples = Vec::new();
    for path in sensors {
        sensor_samples.extend(
            pio::parse_sensor_csv(path).with_context(|| format!("reading {}", path.display()))?,
        );
    }
    let mut location_samples = Vec::new();
    for path in locations {
        location_samples.extend(
            pio::parse_location_csv(path)
                .with_context(|| format!("reading {}", path.display()))?,
        );
    }
    Ok((sensor_samples, location_samples))
}

#[derive(Serialize)]
struct StreamCounts {
    raw: usize,
    segmented: usize,
}

#[derive(Serialize)]
struct SegmentSummary {
    delta_ms: i64,
    origin_ms: i64,
    sensors: BTreeMap<String, StreamCounts>,
    locations: BTreeMap<String, StreamCounts>,
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    if args.sensors.is_empty() && args.locations.is_empty() {
        return Err(usage("need at least one --sensors or --locations file"));
    }
    let (sensor_samples, location_samples) = read_inputs(&args.sensors, &args.locations)?;
    let run = segment_streams(&sensor_samples, &location_samples, args.delta, args.origin.resolve())?;

    std::fs::create_dir_all(&args.out)?;
    write_segmented_sensors(&args.out.join("segmented_sensors.csv"), &run)?;
    write_segmented_locations(&args.out.join("segmented_locations.csv"), &run)?;

    let mut summary = SegmentSummary {
        delta_ms: run.delta_ms,
        origin_ms: run.origin_ms,
        sensors: BTreeMap::new(),
        locations: BTreeMap::new(),
    };
    for (id, stream) in &run.sensors {
        summary.sensors.insert(
            id.clone(),
            StreamCounts {
                raw: sensor_samples.iter().filter(|s| &s.sensor_id == id).count(),
                segmented: stream.activated_steps(),
            },
        );
    }
    for (id, stream) in &run.locations {
        summary.locations.insert(
            id.clone(),
            StreamCounts {
                raw: location_samples.iter().filter(|s| &s.user_id == id).count(),
                segmented: stream.steps.len(),
            },
        );
    }
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(args.out.join("summary.json"), format!("{json}\n"))?;

    let name_w = summary
        .sensors
        .keys()
        .map(|s| s.len() + 7)
        .chain(summary.locations.keys().map(|u| u.len() + 5))
        .chain(["stream".len()])
        .max()
        .unwrap_or(6);
    println!("{:<name_w$}  {:>8}  {:>9}", "stream", "raw", "segmented");
    for (id, c) in &summary.sensors {
        println!("{:<name_w$}  {:>8}  {:>9}", format!("sensor {id}"), c.raw, c.segmented);
    }
    for (id, c) in &summary.locations {
        println!("{:<name_w$}  {:>8}  {:>9}", format!("user {id}"), c.raw, c.segmented);
    }
    Ok(())
}

fn write_segmented_sensors(path: &Path, run: &proxattr_core::pipeline::SegmentedRun) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sensor_id", "step", "step_start_ms", "value"])?;
    for (id, stream) in &run.sensors {
        for (k, v) in &stream.steps {
            let start = run.origin_ms + k.0 * run.delta_ms;
            w.write_record([id.as_str(), &k.0.to_string(), &start.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_segmented_locations(path: &Path, run: &proxattr_core::pipeline::SegmentedRun) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "user_id",
        "step",
        "step_start_ms",
        "min_x",
        "min_y",
        "max_x",
        "max_y",
    ])?;
    for (id, stream) in &run.locations {
        for (k, b) in &stream.steps {
            let start = run.origin_ms + k.0 * run.delta_ms;
            w.write_record([
                id.as_str(),
                &k.0.to_string(),
                &start.to_string(),
                &b.min.x.to_string(),
                &b.min.y.to_string(),
                &b.max.x.to_string(),
                &b.max.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_attribute(args: AttributeArgs) -> Result<()> {
    if args.sensors.is_empty() && args.locations.is_empty() {
        return Err(usage("need at least one --sensors or --locations file"));
    }
    let config = pio::load_area_config(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let delta = args.delta.or(config.delta_ms).unwrap_or(DEFAULT_DELTA_MS);
    let models = config.to_models();
    let (sensor_samples, location_samples) = read_inputs(&args.sensors, &args.locations)?;
    let out = attribute_streams(
        &models,
        &sensor_samples,
        &location_samples,
        delta,
        args.origin.resolve(),
        args.aggregator,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let file = std::fs::File::create(args.out.join("timeline.csv"))?;
    write_timeline_csv(file, &out.records, &out.matrix.users, out.run.delta_ms, out.run.origin_ms)?;
    let table = CountTable::from_records(&out.records);
    table.write_csv(std::fs::File::create(args.out.join("counts.csv"))?)?;

    println!(
        "aggregator {}, delta {} ms, origin {} ms, {} records",
        args.aggregator.name(),
        out.run.delta_ms,
        out.run.origin_ms,
        out.records.len()
    );
    print!("{}", table.render_text());
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    seed: u64,
    users: usize,
    sensors: usize,
    duration_ms: i64,
    noise_m: f64,
    separation_m: f64,
    location_samples: usize,
    sensor_events: usize,
    out_dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<&'a proxattr_core::scenario::ScoreReport>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    if args.noise < 0.0 {
        return Err(usage(format!("--noise must be non-negative, got {}", args.noise)));
    }
    if args.separation < 0.0 {
        return Err(usage(format!(
            "--separation must be non-negative, got {}",
            args.separation
        )));
    }
    let params = ScenarioParams {
        seed: args.seed,
        n_users: args.users as usize,
        n_sensors: args.sensors as usize,
        duration_ms: args.duration,
        noise_m: args.noise,
        min_separation_m: args.separation,
    };
    let scenario = generate_scenario(&params)?;
    export_scenario(&args.out, &scenario)?;

    let report = if args.score {
        let flat: Vec<LocationSample> = scenario.locations.values().flatten().cloned().collect();
        let out = attribute_streams(
            &scenario.layout,
            &scenario.sensor_events,
            &flat,
            args.delta,
            None,
            AggregatorKind::default(),
        )?;
        let mode = if args.strict_collisions {
            CollisionMode::Strict
        } else {
            CollisionMode::EarliestActor
        };
        Some(score(&out.records, &scenario, out.run.delta_ms, out.run.origin_ms, mode)?)
    } else {
        None
    };

    let summary = SimulateSummary {
        seed: params.seed,
        users: params.n_users,
        sensors: params.n_sensors,
        duration_ms: params.duration_ms,
        noise_m: params.noise_m,
        separation_m: params.min_separation_m,
        location_samples: scenario.locations.values().map(Vec::len).sum(),
        sensor_events: scenario.sensor_events.len(),
        out_dir: args.out.display().to_string(),
        score: report.as_ref(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let data = std::fs::File::open(&args.records)
        .with_context(|| format!("opening {}", args.records.display()))?;
    let timeline = proxattr_core::report::read_timeline_csv(data)?;
    let table = CountTable::from_timeline(&timeline);
    match args.format.as_str() {
        "csv" => {
            table.write_csv(std::io::stdout().lock())?;
        }
        "json" => {
            let report = ReportJson::new(&table);
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        _ => {
            print!("{}", table.render_text());
            for b in user_behaviors(&table) {
                match &b.top_sensor {
                    Some(top) => {
                        let shares: Vec<String> = b
                            .shares
                            .iter()
                            .map(|s| format!("{} {}/{}", s.sensor_id, s.count, s.total))
                            .collect();
                        println!(
                            "user {}: top sensor {} ({}); shares {}",
                            b.user_id,
                            top,
                            b.top_count,
                            shares.join(", ")
                        );
                    }
                    None => println!("user {}: no attributed activations", b.user_id),
                }
            }
        }
    }
    Ok(())
}

fn cmd_import(args: ImportArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| usage(format!("column '{name}' not found in {headers:?}")))
    };
    let id_idx = col(&args.id_col)?;
    let time_idx = col(&args.time_col)?;
    let to_ms = |raw: &str| -> Result<i64> {
        let v: f64 = raw
            .parse()
            .with_context(|| format!("bad timestamp '{raw}'"))?;
        let ms = match args.time_unit.as_str() {
            "s" => v * 1000.0,
            "us" => v / 1000.0,
            _ => v,
        };
        anyhow::ensure!(ms.is_finite() && ms >= 0.0, "negative or non-finite timestamp '{raw}'");
        Ok(ms.round() as i64)
    };

    let value_map: BTreeMap<String, f64> = match &args.value_map {
        None => BTreeMap::new(),
        Some(spec) => {
            let mut map = BTreeMap::new();
            for pair in spec.split(',') {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| usage(format!("bad --value-map entry '{pair}'")))?;
                map.insert(
                    k.trim().to_string(),
                    v.trim()
                        .parse()
                        .map_err(|_| usage(format!("bad --value-map value '{v}'")))?,
                );
            }
            map
        }
    };

    match args.kind.as_str() {
        "location" => {
            let x_idx = col(args.x_col.as_deref().unwrap_or("x"))?;
            let y_idx = col(args.y_col.as_deref().unwrap_or("y"))?;
            let mut samples = Vec::new();
            for record in reader.records() {
                let record = record?;
                let x: f64 = record[x_idx].parse().context("bad x value")?;
                let y: f64 = record[y_idx].parse().context("bad y value")?;
                samples.push(LocationSample::new(
                    &record[id_idx],
                    proxattr_core::model::Point::new(x, y),
                    Timestamp::from_ms(to_ms(&record[time_idx])?),
                ));
            }
            samples.sort_by(|a, b| (a.t, &a.user_id).cmp(&(b.t, &b.user_id)));
            pio::write_location_csv_file(&args.out, &samples)?;
            eprintln!("wrote {} location samples to {}", samples.len(), args.out.display());
        }
        _ => {
            let value_idx = col(args.value_col.as_deref().unwrap_or("value"))?;
            let mut samples = Vec::new();
            for record in reader.records() {
                let record = record?;
                let raw = &record[value_idx];
                let value = match value_map.get(raw) {
                    Some(v) => *v,
                    None => raw
                        .parse()
                        .with_context(|| format!("bad value '{raw}' (no --value-map entry)"))?,
                };
                anyhow::ensure!(
                    (0.0..=1.0).contains(&value),
                    "value {value} outside [0,1]; add a --value-map entry"
                );
                samples.push(SensorSample::new(
                    &record[id_idx],
                    value,
                    Timestamp::from_ms(to_ms(&record[time_idx])?),
                ));
            }
            samples.sort_by(|a, b| (a.t, &a.sensor_id).cmp(&(b.t, &b.sensor_id)));
            pio::write_sensor_csv_file(&args.out, &samples)?;
            eprintln!("wrote {} sensor samples to {}", samples.len(), args.out.display());
        }
    }
    Ok(())
}
