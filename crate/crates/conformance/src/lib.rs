//! Slow, independent reference implementations and fixture loaders used to
//! check `ltasim-core` from the outside.
//!
//! Nothing here calls the routine it checks; shared domain types are the
//! only common ground.

use std::path::PathBuf;

pub mod fixtures;
pub mod nms;
pub mod placement;
pub mod unicycle;

pub use fixtures::{fsm_truth_table, fixtures_dir, OracleCase, Provenance};
pub use nms::{oracle_nms, random_frame};
pub use placement::{random_placement, Placement};
pub use unicycle::{oracle_unicycle, Pose};

/// Path of a file under the repository's `fixtures/` tree.
pub fn fixture(rel: &str) -> PathBuf {
    fixtures_dir().join(rel)
}
