//! Deterministic, fixed-timestep simulator of the Defend The Republic
//! lighter-than-air ball capture game.
//!
//! The crate models a single agent's autonomy stack end to end: the 2.5D
//! unicycle plant ([`kinematics`]), a synthetic forward camera producing
//! detector-style bounding boxes ([`camera`]), box-to-pose extraction and the
//! binary mode flags ([`perception`]), the four-mode automaton with its PD
//! servoing behaviors ([`controller`]), and the game loop that resolves ball
//! capture and goal scoring for any number of agents ([`engine`]).

// Validation uses `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod controller;
pub mod engine;
pub mod error;
pub mod kinematics;
pub mod perception;
pub mod world;

pub use camera::{BoundingBox, CameraSpec, Detection, DetectionClass, NoiseSpec};
pub use controller::{ControllerState, GainSpec, Gate, Mode};
pub use engine::{run_match, Engine, Event, EventKind, MatchReport, TraceRecord, TraceSink};
pub use error::{Error, Result};
pub use kinematics::{AgentState, ControlInput, Limits, MotorCommand};
pub use perception::{FrameErrors, ModeFlags, PerceptionSpec, RelativeEstimate};
pub use world::{
    load_scenario, required_envelope_volume, Arena, Ball, BallColor, BallStatus, CageSpec,
    GameObject, Goal, GoalColor, GoalShape, Scenario, Team, Vec3,
};
