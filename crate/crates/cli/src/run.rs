use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ltasim_core::engine::JsonlSink;
use ltasim_core::{load_scenario, run_match};

use crate::TraceLevel;

pub fn cmd_run(
    scenario_path: &Path,
    seed: Option<u64>,
    out: &Path,
    level: TraceLevel,
    detections: bool,
) -> Result<()> {
    let mut scenario = load_scenario(scenario_path)?;
    if let Some(seed) = seed {
        scenario.rng_seed = seed;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let trace_path = out.join("trace.jsonl");
    let events_path = out.join("events.jsonl");
    let detections_path = out.join("detections.jsonl");
    let mut sink = JsonlSink::create(
        (level == TraceLevel::Full).then_some(trace_path.as_path()),
        (level != TraceLevel::None).then_some(events_path.as_path()),
        detections.then_some(detections_path.as_path()),
    )
    .with_context(|| format!("opening trace files in {}", out.display()))?;

    let mut report = run_match(&scenario, &mut sink)?;
    if level == TraceLevel::Full {
        report.trace_path = Some(trace_path);
    }
    if level != TraceLevel::None {
        report.events_path = Some(events_path);
    }
    let report_path = out.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;

    let first = report
        .first_score_time_s
        .map_or_else(|| "none".to_string(), |t| format!("{t:.2} s"));
    println!(
        "seed {}: red {} - blue {} after {:.1} s (first score {first})",
        report.seed, report.score_red, report.score_blue, report.duration_s
    );
    Ok(())
}
