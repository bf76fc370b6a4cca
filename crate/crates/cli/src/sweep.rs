use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ltasim_core::engine::NullSink;
use ltasim_core::{load_scenario, run_match, MatchReport, Scenario};
use rayon::prelude::*;
use serde::Serialize;

/// Half-open seed interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

pub fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("expected A..B or A..=B, got {s:?}"));
    };
    let start: u64 = a.trim().parse().map_err(|e| format!("bad range start {a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad range end {b:?}: {e}"))?;
    let end = if inclusive { b.checked_add(1).ok_or("range end overflows")? } else { b };
    if end <= start {
        return Err(format!("seed range {s:?} is empty"));
    }
    Ok(SeedRange { start, end })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    seed: u64,
    score_red: Option<u32>,
    score_blue: Option<u32>,
    first_score_time_s: Option<f64>,
    mode1_s: Option<f64>,
    mode2_s: Option<f64>,
    mode3_s: Option<f64>,
    mode4_s: Option<f64>,
    captures: Option<u32>,
    error: String,
}

impl SweepRow {
    fn from_result(seed: u64, result: ltasim_core::Result<MatchReport>) -> Self {
        match result {
            Ok(r) => {
                let occ = r.mode_occupancy();
                Self {
                    seed,
                    score_red: Some(r.score_red),
                    score_blue: Some(r.score_blue),
                    first_score_time_s: r.first_score_time_s,
                    mode1_s: Some(occ[0]),
                    mode2_s: Some(occ[1]),
                    mode3_s: Some(occ[2]),
                    mode4_s: Some(occ[3]),
                    captures: Some(r.captures),
                    error: String::new(),
                }
            }
            Err(e) => Self {
                seed,
                score_red: None,
                score_blue: None,
                first_score_time_s: None,
                mode1_s: None,
                mode2_s: None,
                mode3_s: None,
                mode4_s: None,
                captures: None,
                error: e.to_string(),
            },
        }
    }
}

fn run_seed(base: &Scenario, seed: u64) -> ltasim_core::Result<MatchReport> {
    let scenario = Scenario { rng_seed: seed, ..base.clone() };
    run_match(&scenario, &mut NullSink)
}

pub fn cmd_sweep(scenario_path: &Path, seeds: SeedRange, workers: usize, out: &Path) -> Result<()> {
    let base = load_scenario(scenario_path)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        (seeds.start..seeds.end)
            .into_par_iter()
            .map(|seed| SweepRow::from_result(seed, run_seed(&base, seed)))
            .collect()
    });
    rows.sort_by_key(|r| r.seed);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;

    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_empty()).collect();
    let scored: Vec<f64> = ok.iter().filter_map(|r| r.first_score_time_s).collect();
    let mean_first = if scored.is_empty() {
        "n/a".to_string()
    } else {
        format!("{:.1} s", scored.iter().sum::<f64>() / scored.len() as f64)
    };
    println!(
        "{} seeds, {} failed, {} scored; mean first score {mean_first}; table in {}",
        rows.len(),
        rows.len() - ok.len(),
        scored.len(),
        csv_path.display()
    );
    for r in rows.iter().filter(|r| !r.error.is_empty()) {
        eprintln!("seed {}: {}", r.seed, r.error);
    }
    if ok.is_empty() {
        bail!("every seed failed");
    }
    Ok(())
}
