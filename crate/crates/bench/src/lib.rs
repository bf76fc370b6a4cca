//! Shared setup for the benchmarks.

use std::path::PathBuf;

use ltasim_core::{load_scenario, Scenario};

/// Loads a scenario from the repository's `fixtures/` directory.
pub fn fixture(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
