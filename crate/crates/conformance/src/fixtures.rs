use std::path::PathBuf;

use ltasim_core::{Mode, ModeFlags};
use serde::{Deserialize, Serialize};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Copied by hand from a reference table.
    Transcribed,
    /// Follows directly from the definition.
    Trivial,
    /// Computed by an independent method.
    Derived,
}

/// A named input/expected-output pair kept in a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCase {
    pub name: String,
    pub provenance: Provenance,
    pub inputs: toml::Table,
    pub expected: toml::Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    schema_version: u32,
    case: Vec<OracleCase>,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_cases(rel: &str) -> Vec<OracleCase> {
    let path = fixtures_dir().join(rel);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    let file: CaseFile =
        toml::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()));
    assert_eq!(file.schema_version, 1, "{}", path.display());
    file.case
}

fn flag(t: &toml::Table, key: &str) -> bool {
    match t.get(key) {
        Some(toml::Value::Integer(0)) => false,
        Some(toml::Value::Integer(1)) => true,
        other => panic!("flag {key} must be 0 or 1, got {other:?}"),
    }
}

/// The committed mode table: every (gamma, sigma, chi) combination and the
/// mode it selects.
pub fn fsm_truth_table() -> Vec<(ModeFlags, Mode)> {
    load_cases("fsm_truth_table.toml")
        .iter()
        .map(|c| {
            let flags = ModeFlags::new(flag(&c.inputs, "gamma"), flag(&c.inputs, "sigma"), flag(&c.inputs, "chi"));
            let zeta = c.expected.get("mode").and_then(toml::Value::as_integer).expect("mode");
            let mode = Mode::from_zeta(u8::try_from(zeta).expect("mode fits u8")).expect("mode 1..=4");
            (flags, mode)
        })
        .collect()
}
