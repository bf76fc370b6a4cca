//! The agent plant: 2.5D unicycle kinematics, input saturation and the
//! four-motor mixing.
//!
//! Body frame is x forward, y left, z up; heading is measured
//! counter-clockwise from world +x.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::Gate;
use crate::error::{Error, Result};
use crate::world::{Arena, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Yaw in (-pi, pi].
    pub theta: f64,
    pub gate: Gate,
    pub held_balls: Vec<u32>,
}

impl AgentState {
    pub fn new(position: Vec3, theta: f64) -> Self {
        Self {
            x: position.x,
            y: position.y,
            z: position.z,
            theta: wrap_angle(theta),
            gate: Gate::Closed,
            held_balls: Vec::new(),
        }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Maps a body-frame offset to world coordinates.
    pub fn body_to_world(&self, offset: &Vec3) -> Vec3 {
        let (s, c) = self.theta.sin_cos();
        Vec3::new(
            self.x + c * offset.x - s * offset.y,
            self.y + s * offset.x + c * offset.y,
            self.z + offset.z,
        )
    }

    /// Expresses a world point in the body frame.
    pub fn world_to_body(&self, p: &Vec3) -> Vec3 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.x - self.x, p.y - self.y);
        Vec3::new(c * dx + s * dy, -s * dx + c * dy, p.z - self.z)
    }

    pub fn forward(&self) -> Vec3 {
        let (s, c) = self.theta.sin_cos();
        Vec3::new(c, s, 0.0)
    }
}

/// Velocity command: forward speed, yaw rate, climb rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        u1: 0.0,
        u2: 0.0,
        u3: 0.0,
    };

    pub fn new(u1: f64, u2: f64, u3: f64) -> Self {
        Self { u1, u2, u3 }
    }
}

/// Normalized motor channels. m1/m2 are the differential yaw pair, m3 the
/// vertical thruster and m4 the rear forward thruster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorCommand {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub gate_servo: Gate,
}

/// Hardware bounds and thrust-to-velocity gains. Defaults are plausible
/// values, not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub u1_max: f64,
    pub u2_max: f64,
    pub u3_max: f64,
    pub k_f: f64,
    pub k_y: f64,
    pub k_v: f64,
    pub motor_separation: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            u1_max: 0.8,
            u2_max: 1.0,
            u3_max: 0.5,
            k_f: 1.0,
            k_y: 1.0,
            k_v: 1.0,
            motor_separation: 1.0,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.u1_max,
            self.u2_max,
            self.u3_max,
            self.k_f,
            self.k_y,
            self.k_v,
            self.motor_separation,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Validation("limits must all be positive and finite".into()))
        }
    }

    // Raw thrust needed on each channel at full-scale input.
    fn forward_full_scale(&self) -> f64 {
        self.u1_max / self.k_f
    }

    fn yaw_full_scale(&self) -> f64 {
        self.u2_max * self.motor_separation / (2.0 * self.k_y)
    }

    fn vertical_full_scale(&self) -> f64 {
        self.u3_max / self.k_v
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

pub fn saturate(u: ControlInput, lim: &Limits) -> ControlInput {
    ControlInput {
        u1: u.u1.clamp(-lim.u1_max, lim.u1_max),
        u2: u.u2.clamp(-lim.u2_max, lim.u2_max),
        u3: u.u3.clamp(-lim.u3_max, lim.u3_max),
    }
}

/// One explicit-Euler step of the unicycle model followed by arena clamping.
/// Returns the new state and whether the position was clamped.
pub fn step(state: &AgentState, u: &ControlInput, dt: f64, arena: &Arena) -> (AgentState, bool) {
    let (s, c) = state.theta.sin_cos();
    let mut p = Vec3::new(
        state.x + u.u1 * c * dt,
        state.y + u.u1 * s * dt,
        state.z + u.u3 * dt,
    );
    let clamped = arena.clamp(&mut p);
    let next = AgentState {
        x: p.x,
        y: p.y,
        z: p.z,
        theta: wrap_angle(state.theta + u.u2 * dt),
        gate: state.gate,
        held_balls: state.held_balls.clone(),
    };
    (next, clamped)
}

pub fn mix_motors(u: &ControlInput, lim: &Limits, gate: Gate) -> MotorCommand {
    let forward = u.u1 / lim.k_f;
    let differential = u.u2 * lim.motor_separation / (2.0 * lim.k_y);
    let vertical = u.u3 / lim.k_v;
    let yaw = differential / lim.yaw_full_scale();
    MotorCommand {
        m1: yaw,
        m2: -yaw,
        m3: vertical / lim.vertical_full_scale(),
        m4: forward / lim.forward_full_scale(),
        gate_servo: gate,
    }
}

pub fn unmix_motors(m: &MotorCommand, lim: &Limits) -> ControlInput {
    let differential = (m.m1 - m.m2) / 2.0 * lim.yaw_full_scale();
    ControlInput {
        u1: m.m4 * lim.forward_full_scale() * lim.k_f,
        u2: differential * 2.0 * lim.k_y / lim.motor_separation,
        u3: m.m3 * lim.vertical_full_scale() * lim.k_v,
    }
}
