//! Fixed-timestep game loop.
//!
//! Each step runs, per agent in id order: sense, confidence cutoff, NMS,
//! controller tick, optional actuation noise, plant step. Then free balls are
//! captured, flying balls advance and may score, shooting agents release
//! their balls, and held balls follow their holder's cage.
//!
//! All events and trace records of step `k` carry the step's start time
//! `k * dt`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{nms, sense, Detection};
use crate::controller::{tick, ControllerContext, ControllerState, Gate, Mode, TickOutput};
use crate::error::Result;
use crate::kinematics::{self, saturate, AgentState, ControlInput};
use crate::world::{Ball, BallStatus, GameObject, Goal, Scenario, Team, Vec3};

/// Version tag carried by every trace record and the match report.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Capture,
    Release,
    Score,
    ModeChange,
    WallClamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub agent: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub object: Option<u32>,
    pub detail: String,
}

/// One agent at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub v: u32,
    pub t: f64,
    pub agent: u32,
    pub mode: u8,
    pub gamma: bool,
    pub sigma: bool,
    pub chi: bool,
    pub e_yaw: Option<f64>,
    pub e_vert: Option<f64>,
    pub target_area: Option<f64>,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub gate: Gate,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub held: usize,
}

/// Receiver for the per-step trace, detection dump and event streams.
pub trait TraceSink {
    /// Whether per-agent trace records should be built at all.
    fn wants_trace(&self) -> bool {
        false
    }

    fn wants_detections(&self) -> bool {
        false
    }

    fn record(&mut self, _rec: &TraceRecord) -> io::Result<()> {
        Ok(())
    }

    fn detections(&mut self, _t: f64, _agent: u32, _dets: &[Detection]) -> io::Result<()> {
        Ok(())
    }

    fn event(&mut self, _ev: &Event) -> io::Result<()> {
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {}

/// Keeps everything in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<TraceRecord>,
    pub events: Vec<Event>,
}

impl TraceSink for MemorySink {
    fn wants_trace(&self) -> bool {
        true
    }

    fn record(&mut self, rec: &TraceRecord) -> io::Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }

    fn event(&mut self, ev: &Event) -> io::Result<()> {
        self.events.push(ev.clone());
        Ok(())
    }
}

#[derive(Serialize)]
struct DetectionFrame<'a> {
    t: f64,
    agent: u32,
    detections: &'a [Detection],
}

/// Writes JSON Lines files; any stream left as `None` is skipped.
#[derive(Debug, Default)]
pub struct JsonlSink {
    trace: Option<BufWriter<File>>,
    events: Option<BufWriter<File>>,
    detections: Option<BufWriter<File>>,
}

impl JsonlSink {
    pub fn create(
        trace: Option<&Path>,
        events: Option<&Path>,
        detections: Option<&Path>,
    ) -> io::Result<Self> {
        let open = |p: Option<&Path>| -> io::Result<Option<BufWriter<File>>> {
            p.map(|p| File::create(p).map(BufWriter::new)).transpose()
        };
        Ok(Self {
            trace: open(trace)?,
            events: open(events)?,
            detections: open(detections)?,
        })
    }
}

fn write_line<T: Serialize>(w: &mut BufWriter<File>, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

impl TraceSink for JsonlSink {
    fn wants_trace(&self) -> bool {
        self.trace.is_some()
    }

    fn wants_detections(&self) -> bool {
        self.detections.is_some()
    }

    fn record(&mut self, rec: &TraceRecord) -> io::Result<()> {
        match &mut self.trace {
            Some(w) => write_line(w, rec),
            None => Ok(()),
        }
    }

    fn detections(&mut self, t: f64, agent: u32, dets: &[Detection]) -> io::Result<()> {
        match &mut self.detections {
            Some(w) => write_line(w, &DetectionFrame { t, agent, detections: dets }),
            None => Ok(()),
        }
    }

    fn event(&mut self, ev: &Event) -> io::Result<()> {
        match &mut self.events {
            Some(w) => write_line(w, ev),
            None => Ok(()),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        for w in [&mut self.trace, &mut self.events, &mut self.detections]
            .into_iter()
            .flatten()
        {
            w.flush()?;
        }
        Ok(())
    }
}

/// A ball in free flight after release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flight {
    pub velocity: Vec3,
    pub remaining: f64,
    pub shooter: u32,
    pub team: Team,
}

#[derive(Debug, Clone)]
pub struct AgentSlot {
    pub id: u32,
    pub team: Team,
    pub state: AgentState,
    pub controller: ControllerState,
    pub mode_time: [f64; 4],
    pub captures: u32,
    pub scores: u32,
    sense_rng: ChaCha8Rng,
    control_rng: ChaCha8Rng,
    actuation_rng: ChaCha8Rng,
    clamped: bool,
    shooting: bool,
}

/// Independent per-agent random streams: adding agents never perturbs the
/// sequences existing agents see.
fn substream(seed: u64, agent: u32, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(agent) * 4 + lane);
    rng
}

#[derive(Debug, Clone)]
pub struct Engine {
    scenario: Scenario,
    step_index: u64,
    pub agents: Vec<AgentSlot>,
    pub balls: Vec<Ball>,
    pub flights: Vec<Option<Flight>>,
    pub score: [u32; 2],
    first_score_time: Option<f64>,
    captures: u32,
    releases: u32,
    score_events: u32,
}

impl Engine {
    pub fn new(scenario: Scenario) -> Self {
        let seed = scenario.rng_seed;
        let mut spawns = scenario.agents.clone();
        spawns.sort_by_key(|a| a.id);
        let agents = spawns
            .iter()
            .map(|s| AgentSlot {
                id: s.id,
                team: s.team,
                state: AgentState::new(s.position, s.heading),
                controller: ControllerState::default(),
                mode_time: [0.0; 4],
                captures: 0,
                scores: 0,
                sense_rng: substream(seed, s.id, 0),
                control_rng: substream(seed, s.id, 1),
                actuation_rng: substream(seed, s.id, 2),
                clamped: false,
                shooting: false,
            })
            .collect();
        let mut balls = scenario.balls.clone();
        balls.sort_by_key(|b| b.id);
        for b in &mut balls {
            b.status = BallStatus::Free;
        }
        let flights = vec![None; balls.len()];
        let mut goals = scenario.goals.clone();
        goals.sort_by_key(|g| g.id);
        let scenario = Scenario { goals, ..scenario };
        Self {
            scenario,
            step_index: 0,
            agents,
            balls,
            flights,
            score: [0; 2],
            first_score_time: None,
            captures: 0,
            releases: 0,
            score_events: 0,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.scenario.timestep_s
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_index
    }

    pub fn goals(&self) -> &[Goal] {
        &self.scenario.goals
    }

    /// Counts of (free, held, scored) balls.
    pub fn ball_partition(&self) -> (usize, usize, usize) {
        self.balls.iter().fold((0, 0, 0), |(f, h, s), b| match b.status {
            BallStatus::Free => (f + 1, h, s),
            BallStatus::Held(_) => (f, h + 1, s),
            BallStatus::Scored => (f, h, s + 1),
        })
    }

    /// Digest of the full dynamic state, for replay comparisons.
    pub fn state_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.step_index.to_le_bytes());
        for a in &self.agents {
            let s = &a.state;
            for v in [s.x, s.y, s.z, s.theta] {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update([a.controller.mode.zeta(), u8::from(s.gate == Gate::Open)]);
            for id in &s.held_balls {
                h.update(id.to_le_bytes());
            }
            h.update(a.controller.vertical_toggle_sign.to_bits().to_le_bytes());
            h.update(a.controller.next_toggle_time.to_bits().to_le_bytes());
        }
        for b in &self.balls {
            for v in [b.center.x, b.center.y, b.center.z] {
                h.update(v.to_bits().to_le_bytes());
            }
            let tag: u64 = match b.status {
                BallStatus::Free => 0,
                BallStatus::Held(id) => 1 + u64::from(id),
                BallStatus::Scored => u64::MAX,
            };
            h.update(tag.to_le_bytes());
        }
        h.update(self.score[0].to_le_bytes());
        h.update(self.score[1].to_le_bytes());
        h.finalize().into()
    }

    /// Advances the world by one timestep.
    pub fn step(&mut self, sink: &mut dyn TraceSink) -> io::Result<()> {
        let t = self.time();
        let dt = self.scenario.timestep_s;
        let sc = &self.scenario;
        let mut events = Vec::new();

        {
            let objects: Vec<GameObject> = self
                .balls
                .iter()
                .filter(|b| b.status != BallStatus::Scored)
                .map(GameObject::Ball)
                .chain(sc.goals.iter().map(GameObject::Goal))
                .collect();

            for slot in &mut self.agents {
                let raw = sense(
                    &slot.state,
                    &objects,
                    &sc.perception.cage_region,
                    &sc.camera,
                    &sc.noise,
                    &mut slot.sense_rng,
                );
                let confident: Vec<Detection> = raw
                    .into_iter()
                    .filter(|d| d.confidence >= sc.camera.confidence_cutoff)
                    .collect();
                let dets = nms(&confident, sc.camera.iou_threshold);
                if sink.wants_detections() {
                    sink.detections(t, slot.id, &dets)?;
                }

                let ctx = ControllerContext {
                    gains: &sc.gains,
                    limits: &sc.limits,
                    perception: &sc.perception,
                    targets: sc.target_classes.for_team(slot.team),
                    ground_truth_gamma: sc
                        .perception
                        .ground_truth_gamma
                        .then_some(!slot.state.held_balls.is_empty()),
                };
                let out = tick(&mut slot.controller, &ctx, &dets, t, dt, &mut slot.control_rng);
                if let Some((from, to)) = out.transition {
                    events.push(Event {
                        t,
                        kind: EventKind::ModeChange,
                        agent: Some(slot.id),
                        object: None,
                        detail: format!("{from}->{to}"),
                    });
                }
                slot.mode_time[out.mode.index()] += dt;
                slot.shooting = out.shooting;

                let input = perturb(out.input, sc.noise.actuation_sigma, &mut slot.actuation_rng);
                let input = saturate(input, &sc.limits);
                if sink.wants_trace() {
                    sink.record(&trace_record(t, slot, &out, &input))?;
                }

                slot.state.gate = out.gate;
                let (next, clamped) = kinematics::step(&slot.state, &input, dt, &sc.arena);
                if clamped && !slot.clamped {
                    events.push(Event {
                        t,
                        kind: EventKind::WallClamp,
                        agent: Some(slot.id),
                        object: None,
                        detail: format!("({:.3}, {:.3}, {:.3})", next.x, next.y, next.z),
                    });
                }
                slot.clamped = clamped;
                slot.state = next;
            }
        }

        self.resolve_captures(t, &mut events);
        self.resolve_scores(t, &mut events);
        self.carry_held_balls();
        self.step_index += 1;

        for ev in &events {
            sink.event(ev)?;
        }
        Ok(())
    }

    /// Free, non-flying balls inside an open cage's capture volume become
    /// held. Agents are checked in id order, so the lowest id wins ties.
    pub fn resolve_captures(&mut self, t: f64, events: &mut Vec<Event>) {
        let cage = &self.scenario.cage;
        let half = cage.face_side / 2.0;
        for slot in &mut self.agents {
            if slot.state.gate != Gate::Open || slot.shooting {
                continue;
            }
            for (ball, flight) in self.balls.iter_mut().zip(&self.flights) {
                if slot.state.held_balls.len() >= cage.capacity {
                    break;
                }
                if ball.status != BallStatus::Free || flight.is_some() {
                    continue;
                }
                let rel = slot.state.world_to_body(&ball.center) - cage.mount_offset;
                let inside = rel.y.abs() <= half
                    && rel.z.abs() <= half
                    && rel.x <= ball.radius
                    && rel.x >= -cage.depth;
                if inside {
                    ball.status = BallStatus::Held(slot.id);
                    slot.state.held_balls.push(ball.id);
                    slot.captures += 1;
                    self.captures += 1;
                    events.push(Event {
                        t,
                        kind: EventKind::Capture,
                        agent: Some(slot.id),
                        object: Some(ball.id),
                        detail: String::new(),
                    });
                }
            }
        }
    }

    /// Advances flying balls and credits goal passes, then releases the
    /// balls of agents that are shooting.
    pub fn resolve_scores(&mut self, t: f64, events: &mut Vec<Event>) {
        let dt = self.scenario.timestep_s;
        let arena = self.scenario.arena;
        for (ball, flight) in self.balls.iter_mut().zip(self.flights.iter_mut()) {
            let Some(f) = flight.as_mut() else { continue };
            let p0 = ball.center;
            let mut p1 = p0 + f.velocity * dt;
            let hit_wall = arena.clamp(&mut p1);
            let passed = self
                .scenario
                .goals
                .iter()
                .find(|g| goal_crossing(g, &p0, &p1).is_some_and(|(a, b, _)| g.admits(a, b, ball.radius)));
            ball.center = p1;
            f.remaining -= dt;
            if let Some(goal) = passed {
                ball.status = BallStatus::Scored;
                self.score[f.team.index()] += 1;
                self.score_events += 1;
                self.first_score_time.get_or_insert(t);
                if let Some(shooter) = self.agents.iter_mut().find(|a| a.id == f.shooter) {
                    shooter.scores += 1;
                }
                events.push(Event {
                    t,
                    kind: EventKind::Score,
                    agent: Some(f.shooter),
                    object: Some(ball.id),
                    detail: format!("goal {} team {}", goal.id, f.team),
                });
                *flight = None;
            } else if hit_wall || f.remaining <= 1e-12 {
                *flight = None;
            }
        }

        let speed = self.scenario.ejection.speed;
        let coast = self.scenario.ejection.coast_time;
        let cage_center = self.scenario.cage.center_offset();
        for slot in &mut self.agents {
            if !slot.shooting || slot.state.held_balls.is_empty() {
                continue;
            }
            let origin = slot.state.body_to_world(&cage_center);
            let velocity = slot.state.forward() * speed;
            for id in slot.state.held_balls.drain(..) {
                let Some(idx) = self.balls.iter().position(|b| b.id == id) else { continue };
                self.balls[idx].status = BallStatus::Free;
                self.balls[idx].center = origin;
                self.flights[idx] = Some(Flight {
                    velocity,
                    remaining: coast,
                    shooter: slot.id,
                    team: slot.team,
                });
                self.releases += 1;
                events.push(Event {
                    t,
                    kind: EventKind::Release,
                    agent: Some(slot.id),
                    object: Some(id),
                    detail: String::new(),
                });
            }
        }
    }

    fn carry_held_balls(&mut self) {
        let offset = self.scenario.cage.center_offset();
        for slot in &self.agents {
            if slot.state.held_balls.is_empty() {
                continue;
            }
            let p = slot.state.body_to_world(&offset);
            for ball in &mut self.balls {
                if ball.status == BallStatus::Held(slot.id) {
                    ball.center = p;
                }
            }
        }
    }

    pub fn report(&self) -> MatchReport {
        MatchReport {
            schema_version: TRACE_SCHEMA_VERSION,
            seed: self.scenario.rng_seed,
            steps: self.step_index,
            duration_s: self.time(),
            timestep_s: self.scenario.timestep_s,
            score_red: self.score[Team::Red.index()],
            score_blue: self.score[Team::Blue.index()],
            first_score_time_s: self.first_score_time,
            captures: self.captures,
            releases: self.releases,
            score_events: self.score_events,
            agents: self
                .agents
                .iter()
                .map(|a| AgentReport {
                    id: a.id,
                    team: a.team,
                    mode_occupancy_s: a.mode_time,
                    captures: a.captures,
                    scores: a.scores,
                })
                .collect(),
            trace_path: None,
            events_path: None,
        }
    }
}

fn perturb(u: ControlInput, sigma: f64, rng: &mut ChaCha8Rng) -> ControlInput {
    if sigma <= 0.0 {
        return u;
    }
    let mut k = || 1.0 + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    ControlInput::new(u.u1 * k(), u.u2 * k(), u.u3 * k())
}

fn trace_record(t: f64, slot: &AgentSlot, out: &TickOutput, input: &ControlInput) -> TraceRecord {
    let s = &slot.state;
    TraceRecord {
        v: TRACE_SCHEMA_VERSION,
        t,
        agent: slot.id,
        mode: out.mode.zeta(),
        gamma: out.flags.gamma,
        sigma: out.flags.sigma,
        chi: out.flags.chi,
        e_yaw: out.errors.map(|e| e.e_yaw),
        e_vert: out.errors.map(|e| e.e_vert),
        target_area: out.errors.map(|e| e.target_area),
        u1: input.u1,
        u2: input.u2,
        u3: input.u3,
        gate: out.gate,
        x: s.x,
        y: s.y,
        z: s.z,
        theta: s.theta,
        held: s.held_balls.len(),
    }
}

/// Where segment `p0 -> p1` pierces the goal plane: in-plane (lateral,
/// vertical) offsets from the goal center and the segment fraction.
/// Touching the plane at `p0` does not count; the previous step already saw
/// that contact at its own endpoint.
pub fn goal_crossing(goal: &Goal, p0: &Vec3, p1: &Vec3) -> Option<(f64, f64, f64)> {
    let n = goal.facing_normal;
    let s0 = n.dot(&(p0 - goal.center));
    let s1 = n.dot(&(p1 - goal.center));
    let crosses = (s0 > 0.0 && s1 <= 0.0) || (s0 < 0.0 && s1 >= 0.0);
    if !crosses {
        return None;
    }
    let lambda = s0 / (s0 - s1);
    let q = p0 + (p1 - p0) * lambda;
    let d = q - goal.center;
    Some((goal.lateral_axis().dot(&d), d.z, lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub id: u32,
    pub team: Team,
    /// Seconds spent in modes 1 through 4.
    pub mode_occupancy_s: [f64; 4],
    pub captures: u32,
    pub scores: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub schema_version: u32,
    pub seed: u64,
    pub steps: u64,
    pub duration_s: f64,
    pub timestep_s: f64,
    pub score_red: u32,
    pub score_blue: u32,
    pub first_score_time_s: Option<f64>,
    pub captures: u32,
    pub releases: u32,
    pub score_events: u32,
    pub agents: Vec<AgentReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub events_path: Option<PathBuf>,
}

impl MatchReport {
    pub fn total_score(&self) -> u32 {
        self.score_red + self.score_blue
    }

    /// Summed over agents, seconds per mode.
    pub fn mode_occupancy(&self) -> [f64; 4] {
        let mut total = [0.0; 4];
        for a in &self.agents {
            for (acc, v) in total.iter_mut().zip(a.mode_occupancy_s) {
                *acc += v;
            }
        }
        total
    }
}

/// Runs a whole match, streaming into `sink`.
pub fn run_match(scenario: &Scenario, sink: &mut dyn TraceSink) -> Result<MatchReport> {
    let steps = scenario.step_count();
    let mut engine = Engine::new(scenario.clone());
    for _ in 0..steps {
        engine.step(sink)?;
    }
    sink.flush()?;
    Ok(engine.report())
}

/// Mode sequence (with repeats collapsed) of one agent's trace.
pub fn mode_sequence(records: &[TraceRecord], agent: u32) -> Vec<Mode> {
    let mut seq: Vec<Mode> = Vec::new();
    for r in records.iter().filter(|r| r.agent == agent) {
        let m = Mode::from_zeta(r.mode).expect("valid mode in trace");
        if seq.last() != Some(&m) {
            seq.push(m);
        }
    }
    seq
}
