//! Arena, game objects, teams and scenario configuration.
//!
//! Scenario files are TOML. Every length is in meters and every duration in
//! seconds. Blocks other than the required ones (`arena`, `timestep_s`,
//! `rng_seed`, `balls`, `goals`, `agents`, `gains`, `noise`,
//! `target_classes`) fall back to documented defaults.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraSpec, DetectionClass, NoiseSpec};
use crate::controller::GainSpec;
use crate::error::{Error, Result};
use crate::kinematics::Limits;
use crate::perception::PerceptionSpec;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Scenario schema version written by this crate and accepted by the loader.
pub const SCHEMA_VERSION: u32 = 1;

/// Competition ball diameter is roughly 500 mm.
pub const DEFAULT_BALL_RADIUS: f64 = 0.25;

/// Default goal aperture. Not a measured competition value.
pub const DEFAULT_GOAL_APERTURE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Team {
    Red,
    Blue,
}

impl Team {
    pub const ALL: [Team; 2] = [Team::Red, Team::Blue];

    pub fn index(self) -> usize {
        match self {
            Team::Red => 0,
            Team::Blue => 1,
        }
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Team::Red => "red",
            Team::Blue => "blue",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallColor {
    Green,
    Purple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalColor {
    Orange,
    Yellow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalShape {
    Circle,
    Square,
    Triangle,
}

/// Axis-aligned play volume with its origin at one floor corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    #[serde(rename = "x")]
    pub extent_x: f64,
    #[serde(rename = "y")]
    pub extent_y: f64,
    #[serde(rename = "z")]
    pub extent_z: f64,
    #[serde(rename = "duration_s")]
    pub match_duration: f64,
}

impl Default for Arena {
    /// 30 x 15 x 8 m placeholder volume and a 60 minute match.
    fn default() -> Self {
        Self {
            extent_x: 30.0,
            extent_y: 15.0,
            extent_z: 8.0,
            match_duration: 3600.0,
        }
    }
}

impl Arena {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.extent_x).contains(&p.x)
            && (0.0..=self.extent_y).contains(&p.y)
            && (0.0..=self.extent_z).contains(&p.z)
    }

    /// Clamps `p` into the box. Returns whether any axis was clamped.
    pub fn clamp(&self, p: &mut Vec3) -> bool {
        let before = *p;
        p.x = p.x.clamp(0.0, self.extent_x);
        p.y = p.y.clamp(0.0, self.extent_y);
        p.z = p.z.clamp(0.0, self.extent_z);
        before != *p
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(self.extent_x / 2.0, self.extent_y / 2.0, self.extent_z / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BallStatus {
    #[default]
    Free,
    Held(u32),
    Scored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub id: u32,
    pub color: BallColor,
    pub center: Vec3,
    #[serde(default = "default_ball_radius")]
    pub radius: f64,
    #[serde(skip)]
    pub status: BallStatus,
}

fn default_ball_radius() -> f64 {
    DEFAULT_BALL_RADIUS
}

impl Ball {
    pub fn class(&self) -> DetectionClass {
        DetectionClass::ball(self.color)
    }
}

/// A static planar aperture. The aperture plane is vertical and contains
/// `center`; `facing_normal` is the horizontal unit normal of that plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub id: u32,
    pub color: GoalColor,
    pub shape: GoalShape,
    pub center: Vec3,
    #[serde(default = "default_goal_aperture")]
    pub aperture: f64,
    pub facing_normal: Vec3,
}

fn default_goal_aperture() -> f64 {
    DEFAULT_GOAL_APERTURE
}

impl Goal {
    pub fn class(&self) -> DetectionClass {
        DetectionClass::goal(self.color, self.shape)
    }

    /// In-plane horizontal axis, `normal` rotated a quarter turn about +z.
    pub fn lateral_axis(&self) -> Vec3 {
        Vec3::new(-self.facing_normal.y, self.facing_normal.x, 0.0)
    }

    /// Whether a sphere of `radius` whose center pierces the goal plane at
    /// in-plane offset (`lateral`, `vertical`) from the goal center passes
    /// through the aperture without touching the frame.
    pub fn admits(&self, lateral: f64, vertical: f64, radius: f64) -> bool {
        let half = self.aperture / 2.0;
        match self.shape {
            GoalShape::Circle => lateral.hypot(vertical) <= half - radius,
            GoalShape::Square => lateral.abs() <= half - radius && vertical.abs() <= half - radius,
            GoalShape::Triangle => {
                // Equilateral, apex up, centered on its centroid.
                let inradius = self.aperture / (2.0 * 3f64.sqrt());
                let limit = inradius - radius;
                let s3 = 3f64.sqrt() / 2.0;
                -vertical <= limit
                    && s3 * lateral + 0.5 * vertical <= limit
                    && -s3 * lateral + 0.5 * vertical <= limit
            }
        }
    }
}

/// Borrowed view over anything the camera can see.
#[derive(Debug, Clone, Copy)]
pub enum GameObject<'a> {
    Ball(&'a Ball),
    Goal(&'a Goal),
}

impl GameObject<'_> {
    pub fn center(&self) -> Vec3 {
        match self {
            GameObject::Ball(b) => b.center,
            GameObject::Goal(g) => g.center,
        }
    }

    pub fn class(&self) -> DetectionClass {
        match self {
            GameObject::Ball(b) => b.class(),
            GameObject::Goal(g) => g.class(),
        }
    }
}

/// Ball cage hanging under the envelope. `mount_offset` locates the center of
/// the open front face in the agent body frame (x forward, y left, z up); the
/// cage extends `depth` meters behind that face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CageSpec {
    pub face_side: f64,
    pub depth: f64,
    pub capacity: usize,
    pub mount_offset: Vec3,
}

impl Default for CageSpec {
    fn default() -> Self {
        Self {
            face_side: 0.6,
            depth: 0.6,
            capacity: 5,
            mount_offset: Vec3::new(0.8, 0.0, 0.0),
        }
    }
}

impl CageSpec {
    /// Body-frame point where held balls ride.
    pub fn center_offset(&self) -> Vec3 {
        self.mount_offset - Vec3::new(self.depth / 2.0, 0.0, 0.0)
    }
}

/// Ball-release and flight parameters used when an agent shoots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EjectionSpec {
    /// Launch speed of a released ball along the shooter's heading.
    pub speed: f64,
    /// Flight time after which a ball stops and is free again.
    pub coast_time: f64,
}

impl Default for EjectionSpec {
    fn default() -> Self {
        Self {
            speed: 2.5,
            coast_time: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpawn {
    pub id: u32,
    pub team: Team,
    pub position: Vec3,
    #[serde(default)]
    pub heading: f64,
}

/// Ball colors and goal colors a team plays for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    pub balls: Vec<BallColor>,
    pub goals: Vec<GoalColor>,
}

impl Default for TargetSet {
    fn default() -> Self {
        Self {
            balls: vec![BallColor::Green, BallColor::Purple],
            goals: vec![GoalColor::Orange, GoalColor::Yellow],
        }
    }
}

impl TargetSet {
    pub fn wants_ball(&self, class: DetectionClass) -> bool {
        class.ball_color().is_some_and(|c| self.balls.contains(&c))
    }

    pub fn wants_goal(&self, class: DetectionClass) -> bool {
        class.goal_color().is_some_and(|c| self.goals.contains(&c))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetClasses {
    pub red: TargetSet,
    pub blue: TargetSet,
}

impl TargetClasses {
    pub fn for_team(&self, team: Team) -> &TargetSet {
        match team {
            Team::Red => &self.red,
            Team::Blue => &self.blue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub timestep_s: f64,
    pub rng_seed: u64,
    pub arena: Arena,
    #[serde(default)]
    pub cage: CageSpec,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub perception: PerceptionSpec,
    pub noise: NoiseSpec,
    pub gains: GainSpec,
    #[serde(default)]
    pub ejection: EjectionSpec,
    pub target_classes: TargetClasses,
    pub balls: Vec<Ball>,
    pub goals: Vec<Goal>,
    pub agents: Vec<AgentSpawn>,
}

/// Minimum center distance between two spawn points.
const SPAWN_CLEARANCE: f64 = 1.0;

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario types always serialize")
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));

        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let a = &self.arena;
        if !(a.extent_x > 0.0 && a.extent_y > 0.0 && a.extent_z > 0.0) {
            return fail("arena extents must be positive".into());
        }
        if !(a.match_duration > 0.0) {
            return fail("arena.duration_s must be positive".into());
        }
        if !(self.timestep_s > 0.0 && self.timestep_s.is_finite()) {
            return fail("timestep_s must be positive".into());
        }
        if !(self.cage.face_side > 0.0) || !(self.cage.depth > 0.0) {
            return fail("cage.face_side and cage.depth must be positive".into());
        }
        if self.cage.capacity < 1 {
            return fail("cage.capacity must be at least 1".into());
        }
        if !(self.ejection.speed > 0.0 && self.ejection.coast_time > 0.0) {
            return fail("ejection.speed and ejection.coast_time must be positive".into());
        }
        self.limits.validate()?;
        self.camera.validate()?;
        self.perception.validate()?;
        self.noise.validate()?;
        self.gains.validate(&self.limits)?;

        let mut ids = std::collections::BTreeSet::new();
        for ball in &self.balls {
            if !ids.insert(ball.id) {
                return fail(format!("duplicate ball id {}", ball.id));
            }
            if !(ball.radius > 0.0) {
                return fail(format!("ball {}: radius must be positive", ball.id));
            }
            if !a.contains(&ball.center) {
                return fail(format!("ball {}: center lies outside the arena", ball.id));
            }
        }
        ids.clear();
        for goal in &self.goals {
            if !ids.insert(goal.id) {
                return fail(format!("duplicate goal id {}", goal.id));
            }
            if !(goal.aperture > 0.0) {
                return fail(format!("goal {}: aperture must be positive", goal.id));
            }
            let n = goal.facing_normal;
            if n.z != 0.0 || ((n.x * n.x + n.y * n.y) - 1.0).abs() > 1e-9 {
                return fail(format!(
                    "goal {}: facing_normal must be a horizontal unit vector",
                    goal.id
                ));
            }
            if !a.contains(&goal.center) {
                return fail(format!("goal {}: center lies outside the arena", goal.id));
            }
        }
        ids.clear();
        for agent in &self.agents {
            if !ids.insert(agent.id) {
                return fail(format!("duplicate agent id {}", agent.id));
            }
            if !a.contains(&agent.position) {
                return fail(format!("agent {}: spawn lies outside the arena", agent.id));
            }
            if !agent.heading.is_finite() {
                return fail(format!("agent {}: heading must be finite", agent.id));
            }
        }
        for (i, p) in self.agents.iter().enumerate() {
            for q in &self.agents[i + 1..] {
                if (p.position - q.position).norm() < SPAWN_CLEARANCE {
                    return fail(format!(
                        "agents {} and {} spawn closer than {SPAWN_CLEARANCE} m",
                        p.id, q.id
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of fixed steps in a full match.
    pub fn step_count(&self) -> u64 {
        (self.arena.match_duration / self.timestep_s - 1e-9).ceil() as u64
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

/// Envelope volume (liters) needed to lift `mass` grams given the gas lift
/// per liter and a multiplicative safety margin.
pub fn required_envelope_volume(mass: f64, lift_per_liter: f64, safety_factor: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    if !(lift_per_liter > 0.0) {
        return Err(Error::Domain(format!(
            "lift_per_liter must be positive, got {lift_per_liter}"
        )));
    }
    if !(safety_factor >= 1.0) {
        return Err(Error::Domain(format!(
            "safety_factor must be at least 1, got {safety_factor}"
        )));
    }
    Ok(mass * safety_factor / lift_per_liter)
}
