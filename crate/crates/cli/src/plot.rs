use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ltasim_core::{Event, EventKind, TraceRecord};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

type Series = (String, Vec<(f64, f64)>);

/// A trace file may hold per-step records, events, or both.
#[derive(Debug, Default)]
pub struct TraceContents {
    pub records: Vec<TraceRecord>,
    pub events: Vec<Event>,
}

pub fn read_trace(path: &Path) -> Result<TraceContents> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = TraceContents::default();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let value: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: not JSON", path.display(), n + 1))?;
        if value.get("kind").is_some() {
            out.events.push(serde_json::from_value(value).with_context(|| {
                format!("{}:{}: malformed event", path.display(), n + 1)
            })?);
        } else {
            out.records.push(serde_json::from_value(value).with_context(|| {
                format!("{}:{}: malformed trace record", path.display(), n + 1)
            })?);
        }
    }
    if out.records.is_empty() && out.events.is_empty() {
        bail!("{} holds no trace records or events", path.display());
    }
    Ok(out)
}

pub fn cmd_plotdata(trace: &Path, out: &Path) -> Result<()> {
    let contents = read_trace(trace)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();

    if contents.records.is_empty() {
        eprintln!(
            "warning: {} has events only; e_yaw/e_vert and trajectory channels are missing, \
             writing the mode timeline alone",
            trace.display()
        );
        let modes = modes_from_events(&contents.events);
        written.extend(write_modes(out, &modes)?);
    } else {
        let recs = &contents.records;
        written.extend(write_errors(out, recs)?);
        let modes: Vec<(f64, u32, u8)> = recs.iter().map(|r| (r.t, r.agent, r.mode)).collect();
        written.extend(write_modes(out, &modes)?);
        written.extend(write_trajectory(out, recs)?);
    }
    for p in written {
        println!("{p}");
    }
    Ok(())
}

/// Rebuilds (t, agent, mode) samples from mode_change events, each agent
/// starting in mode 1 at t = 0.
fn modes_from_events(events: &[Event]) -> Vec<(f64, u32, u8)> {
    let mut rows = Vec::new();
    let mut seen = BTreeMap::new();
    for ev in events {
        let Some(agent) = ev.agent else { continue };
        if seen.insert(agent, ()).is_none() {
            rows.push((0.0, agent, 1));
        }
        if ev.kind == EventKind::ModeChange {
            if let Some(to) = ev.detail.rsplit("->").next().and_then(|m| m.parse().ok()) {
                rows.push((ev.t, agent, to));
            }
        }
    }
    rows.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));
    rows
}

fn write_csv<R: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_errors(out: &Path, recs: &[TraceRecord]) -> Result<Vec<String>> {
    #[derive(serde::Serialize)]
    struct Row {
        t_s: f64,
        agent: u32,
        mode: u8,
        e_yaw_px: Option<f64>,
        e_vert_px: Option<f64>,
    }
    let csv_path = out.join("errors.csv");
    write_csv(
        &csv_path,
        recs.iter().map(|r| Row {
            t_s: r.t,
            agent: r.agent,
            mode: r.mode,
            e_yaw_px: r.e_yaw,
            e_vert_px: r.e_vert,
        }),
    )?;
    let mut series: Vec<Series> = Vec::new();
    for (agent, rs) in by_agent(recs) {
        series.push((format!("agent {agent} e_yaw"), rs.iter().filter_map(|r| Some((r.t, r.e_yaw?))).collect()));
        series.push((format!("agent {agent} e_vert"), rs.iter().filter_map(|r| Some((r.t, r.e_vert?))).collect()));
    }
    let svg_path = out.join("errors.svg");
    fs::write(&svg_path, chart("Image-plane errors", "t (s)", "error (px)", &series, false, false))?;
    Ok(vec![csv_path.display().to_string(), svg_path.display().to_string()])
}

fn write_modes(out: &Path, modes: &[(f64, u32, u8)]) -> Result<Vec<String>> {
    #[derive(serde::Serialize)]
    struct Row {
        t_s: f64,
        agent: u32,
        mode: u8,
    }
    let csv_path = out.join("modes.csv");
    write_csv(&csv_path, modes.iter().map(|&(t_s, agent, mode)| Row { t_s, agent, mode }))?;
    let mut grouped: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for &(t, agent, mode) in modes {
        grouped.entry(agent).or_default().push((t, f64::from(mode)));
    }
    let series: Vec<Series> = grouped.into_iter().map(|(a, pts)| (format!("agent {a}"), pts)).collect();
    let svg_path = out.join("modes.svg");
    fs::write(&svg_path, chart("Mode timeline", "t (s)", "mode", &series, true, false))?;
    Ok(vec![csv_path.display().to_string(), svg_path.display().to_string()])
}

fn write_trajectory(out: &Path, recs: &[TraceRecord]) -> Result<Vec<String>> {
    #[derive(serde::Serialize)]
    struct Row {
        t_s: f64,
        agent: u32,
        x_m: f64,
        y_m: f64,
        z_m: f64,
        theta_rad: f64,
    }
    let csv_path = out.join("trajectory.csv");
    write_csv(
        &csv_path,
        recs.iter().map(|r| Row {
            t_s: r.t,
            agent: r.agent,
            x_m: r.x,
            y_m: r.y,
            z_m: r.z,
            theta_rad: r.theta,
        }),
    )?;
    let series: Vec<Series> = by_agent(recs)
        .into_iter()
        .map(|(a, rs)| (format!("agent {a}"), rs.iter().map(|r| (r.x, r.y)).collect()))
        .collect();
    let svg_path = out.join("trajectory.svg");
    fs::write(&svg_path, chart("Top-down trajectory", "x (m)", "y (m)", &series, false, true))?;
    Ok(vec![csv_path.display().to_string(), svg_path.display().to_string()])
}

fn by_agent(recs: &[TraceRecord]) -> BTreeMap<u32, Vec<&TraceRecord>> {
    let mut m: BTreeMap<u32, Vec<&TraceRecord>> = BTreeMap::new();
    for r in recs {
        m.entry(r.agent).or_default().push(r);
    }
    m
}

/// Polyline chart with min/max tick labels. `steps` draws a staircase,
/// `equal` keeps x and y on the same scale.
fn chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], steps: bool, equal: bool) -> String {
    const W: f64 = 800.0;
    const H: f64 = 450.0;
    const L: f64 = 70.0;
    const R: f64 = 150.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;

    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (pw, ph) = (W - L - R, H - T - B);
    let (mut sx, mut sy) = (pw / (x1 - x0), ph / (y1 - y0));
    if equal {
        let s = sx.min(sy);
        sx = s;
        sy = s;
    }
    let px = |x: f64| L + (x - x0) * sx;
    let py = |y: f64| T + ph - (y - y0) * sy;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(s, r##"<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    let _ = writeln!(s, r#"<text x="{L}" y="{}" text-anchor="start">{}</text>"#, T + ph + 18.0, fmt_tick(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, L + pw, T + ph + 18.0, fmt_tick(x0 + pw / sx));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, L - 6.0, T + ph, fmt_tick(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, L - 6.0, T + 10.0, fmt_tick(y0 + ph / sy));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, L + pw / 2.0, H - 12.0, esc(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        T + ph / 2.0,
        T + ph / 2.0,
        esc(ylabel)
    );
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        let mut prev: Option<f64> = None;
        for &(x, y) in points {
            if let (true, Some(py_prev)) = (steps, prev) {
                let _ = write!(path, "{:.2},{:.2} ", px(x), py_prev);
            }
            let _ = write!(path, "{:.2},{:.2} ", px(x), py(y));
            prev = Some(py(y));
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, path.trim_end());
        let ly = T + 16.0 * i as f64 + 10.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - R + 10.0, W - R + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - R + 36.0, ly + 4.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
