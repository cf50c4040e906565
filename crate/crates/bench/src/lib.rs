//! Fixtures shared by the planner benchmarks.

use std::path::PathBuf;

use dki_core::{load_scenario, Budget, Environment, Scenario};

/// Directory holding the shipped scenario files.
pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Loads a shipped scenario with a fixed iteration budget.
pub fn fixture(file: &str, iterations: u64) -> (Scenario, Environment) {
    let mut sc = load_scenario(scenarios_dir().join(file)).expect("scenario loads");
    sc.planner.budget = Budget::Iterations(iterations);
    let env = sc.validate().expect("scenario validates");
    (sc, env)
}
