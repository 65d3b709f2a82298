//! Shared data builders for the pipeline benchmarks.

use proxattr_core::scenario::{generate_scenario, Scenario, ScenarioParams};

/// A mid-sized deterministic scenario used by every benchmark.
pub fn bench_scenario() -> Scenario {
    generate_scenario(&ScenarioParams {
        seed: 1234,
        n_users: 3,
        n_sensors: 6,
        duration_ms: 1_800_000,
        noise_m: 0.1,
        min_separation_m: 2.0,
    })
    .expect("bench layout is feasible")
}
