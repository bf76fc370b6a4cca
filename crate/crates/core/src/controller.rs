//! Four-mode behavior automaton with search, PD visual servoing and
//! goal-size-triggered shooting.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Detection;
use crate::error::{Error, Result};
use crate::kinematics::{mix_motors, saturate, ControlInput, Limits, MotorCommand};
use crate::perception::{
    compute_flags, frame_errors, in_cage_region, select_target, wanted_ball_classes,
    wanted_goal_classes, FrameErrors, ModeFlags, PerceptionSpec,
};
use crate::world::TargetSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    BallSearch,
    BallCapture,
    GoalSearch,
    GoalScore,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::BallSearch,
        Mode::BallCapture,
        Mode::GoalSearch,
        Mode::GoalScore,
    ];

    /// Numeric mode label, 1 through 4.
    pub fn zeta(self) -> u8 {
        match self {
            Mode::BallSearch => 1,
            Mode::BallCapture => 2,
            Mode::GoalSearch => 3,
            Mode::GoalScore => 4,
        }
    }

    pub fn from_zeta(zeta: u8) -> Option<Mode> {
        Mode::ALL.get(usize::from(zeta).wrapping_sub(1)).copied()
    }

    pub fn index(self) -> usize {
        usize::from(self.zeta() - 1)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.zeta())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Open,
    #[default]
    Closed,
}

/// Controller gains and cruise magnitudes. Defaults are tuned values, not
/// measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSpec {
    /// (rad/s) per pixel.
    pub kp_yaw: f64,
    /// (rad/s) per (pixel/s).
    pub kd_yaw: f64,
    /// (m/s) per pixel.
    pub kp_vert: f64,
    /// (m/s) per (pixel/s).
    pub kd_vert: f64,
    pub u1_bar: f64,
    pub u2_bar: f64,
    pub u3_bar: f64,
    /// Goal box area (px^2) above which the agent shoots.
    pub goal_area_threshold: f64,
    pub shoot_duration: f64,
    /// Min and max seconds between vertical direction changes while searching.
    pub vertical_toggle_period_bounds: [f64; 2],
}

impl Default for GainSpec {
    fn default() -> Self {
        Self {
            kp_yaw: 0.01,
            kd_yaw: 0.001,
            kp_vert: 0.01,
            kd_vert: 0.001,
            u1_bar: 0.5,
            u2_bar: 0.4,
            u3_bar: 0.2,
            goal_area_threshold: 3600.0,
            shoot_duration: 2.0,
            vertical_toggle_period_bounds: [2.0, 6.0],
        }
    }
}

impl GainSpec {
    pub fn validate(&self, limits: &Limits) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("gains: {m}")));
        let gains = [self.kp_yaw, self.kd_yaw, self.kp_vert, self.kd_vert];
        if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return bad("PD gains must be non-negative");
        }
        let within = |v: f64, max: f64| v >= 0.0 && v <= max;
        if !(within(self.u1_bar, limits.u1_max)
            && within(self.u2_bar, limits.u2_max)
            && within(self.u3_bar, limits.u3_max))
        {
            return bad("cruise magnitudes must lie within the limits");
        }
        if !(self.goal_area_threshold > 0.0) {
            return bad("goal_area_threshold must be positive");
        }
        if !(self.shoot_duration > 0.0) {
            return bad("shoot_duration must be positive");
        }
        let [lo, hi] = self.vertical_toggle_period_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("vertical_toggle_period_bounds must satisfy 0 < min <= max");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub mode: Mode,
    /// Last (e_yaw, e_vert); `None` right after a mode change.
    pub prev_error: Option<(f64, f64)>,
    pub vertical_toggle_sign: f64,
    pub next_toggle_time: f64,
    pub shoot_until: Option<f64>,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self {
            mode: Mode::BallSearch,
            prev_error: None,
            vertical_toggle_sign: 1.0,
            next_toggle_time: 0.0,
            shoot_until: None,
        }
    }
}

impl ControllerState {
    pub fn is_shooting(&self, t: f64) -> bool {
        self.mode == Mode::GoalScore && self.shoot_until.is_some_and(|until| t < until)
    }

    fn enter(&mut self, mode: Mode) {
        self.mode = mode;
        self.prev_error = None;
        self.shoot_until = None;
    }

    fn pd(&mut self, gains: &GainSpec, e: &FrameErrors, dt: f64) -> (f64, f64) {
        let (d_yaw, d_vert) = match self.prev_error {
            Some((py, pv)) => ((e.e_yaw - py) / dt, (e.e_vert - pv) / dt),
            None => (0.0, 0.0),
        };
        self.prev_error = Some((e.e_yaw, e.e_vert));
        (
            -(gains.kp_yaw * e.e_yaw + gains.kd_yaw * d_yaw),
            -(gains.kp_vert * e.e_vert + gains.kd_vert * d_vert),
        )
    }
}

/// Holding dominates: the ball flag only matters without a ball, the goal
/// flag only with one.
pub fn update_mode(flags: ModeFlags) -> Mode {
    match (flags.gamma, flags.sigma, flags.chi) {
        (false, false, _) => Mode::BallSearch,
        (false, true, _) => Mode::BallCapture,
        (true, _, false) => Mode::GoalSearch,
        (true, _, true) => Mode::GoalScore,
    }
}

/// Spin and drift forward while randomly alternating climb direction.
pub fn control_search<R: Rng + ?Sized>(
    cs: &mut ControllerState,
    gains: &GainSpec,
    t: f64,
    rng: &mut R,
) -> (ControlInput, Gate) {
    if t >= cs.next_toggle_time {
        cs.vertical_toggle_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let [lo, hi] = gains.vertical_toggle_period_bounds;
        cs.next_toggle_time = t + if hi > lo { rng.random_range(lo..hi) } else { lo };
    }
    let gate = match cs.mode {
        Mode::BallSearch => Gate::Open,
        _ => Gate::Closed,
    };
    (
        ControlInput::new(
            gains.u1_bar,
            gains.u2_bar,
            cs.vertical_toggle_sign * gains.u3_bar,
        ),
        gate,
    )
}

/// Drive forward with the gate open while PD-centering the ball.
pub fn control_capture(
    cs: &mut ControllerState,
    gains: &GainSpec,
    e: &FrameErrors,
    dt: f64,
) -> (ControlInput, Gate) {
    let (u2, u3) = cs.pd(gains, e, dt);
    (ControlInput::new(gains.u1_bar, u2, u3), Gate::Open)
}

/// Approach the goal with the gate closed; once it looks big enough, open
/// the gate and reverse thrust for `shoot_duration` seconds.
pub fn control_score(
    cs: &mut ControllerState,
    gains: &GainSpec,
    e: &FrameErrors,
    t: f64,
    dt: f64,
) -> (ControlInput, Gate) {
    let (u2, u3) = cs.pd(gains, e, dt);
    let latched = cs.shoot_until.is_some_and(|until| t < until);
    let shooting = if latched {
        true
    } else if e.target_area > gains.goal_area_threshold {
        cs.shoot_until = Some(t + gains.shoot_duration);
        true
    } else {
        cs.shoot_until = None;
        false
    };
    if shooting {
        (ControlInput::new(-gains.u1_bar, u2, u3), Gate::Open)
    } else {
        (ControlInput::new(gains.u1_bar, u2, u3), Gate::Closed)
    }
}

/// Per-agent configuration the controller reads every tick.
#[derive(Debug, Clone, Copy)]
pub struct ControllerContext<'a> {
    pub gains: &'a GainSpec,
    pub limits: &'a Limits,
    pub perception: &'a PerceptionSpec,
    pub targets: &'a TargetSet,
    /// Overrides the camera-derived holding flag when set.
    pub ground_truth_gamma: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub input: ControlInput,
    pub motors: MotorCommand,
    pub gate: Gate,
    pub flags: ModeFlags,
    pub mode: Mode,
    pub errors: Option<FrameErrors>,
    /// (from, to) when the mode changed this tick.
    pub transition: Option<(Mode, Mode)>,
    pub shooting: bool,
}

/// One control cycle: flags, mode, behavior, saturation and motor mixing.
pub fn tick<R: Rng + ?Sized>(
    cs: &mut ControllerState,
    ctx: &ControllerContext,
    dets: &[Detection],
    t: f64,
    dt: f64,
    rng: &mut R,
) -> TickOutput {
    let cage = &ctx.perception.cage_region;
    let mut flags = compute_flags(dets, cage, ctx.perception.hold_area_threshold, ctx.targets);
    if let Some(gamma) = ctx.ground_truth_gamma {
        flags.gamma = gamma;
    }

    let mode = update_mode(flags);
    let transition = (mode != cs.mode).then_some((cs.mode, mode));
    if transition.is_some() {
        cs.enter(mode);
    }

    let target = match mode {
        Mode::BallCapture => {
            let outside: Vec<Detection> = dets
                .iter()
                .filter(|d| !in_cage_region(d, cage))
                .copied()
                .collect();
            select_target(&outside, &wanted_ball_classes(ctx.targets))
                .map(|d| frame_errors(d, ctx.perception.aim_point))
        }
        Mode::GoalScore => select_target(dets, &wanted_goal_classes(ctx.targets))
            .map(|d| frame_errors(d, ctx.perception.aim_point)),
        Mode::BallSearch | Mode::GoalSearch => None,
    };

    let (raw, gate) = match (mode, target.as_ref()) {
        (Mode::BallCapture, Some(e)) => control_capture(cs, ctx.gains, e, dt),
        (Mode::GoalScore, Some(e)) => control_score(cs, ctx.gains, e, t, dt),
        _ => control_search(cs, ctx.gains, t, rng),
    };
    let input = saturate(raw, ctx.limits);
    TickOutput {
        input,
        motors: mix_motors(&input, ctx.limits, gate),
        gate,
        flags,
        mode,
        errors: target,
        transition,
        shooting: cs.is_shooting(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{BoundingBox, DetectionClass};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn errors(e_yaw: f64, e_vert: f64, area: f64) -> FrameErrors {
        FrameErrors {
            e_yaw,
            e_vert,
            target_class: DetectionClass::OrangeCircle,
            target_area: area,
        }
    }

    fn in_mode(mode: Mode) -> ControllerState {
        ControllerState {
            mode,
            ..ControllerState::default()
        }
    }

    #[test]
    fn mode_examples() {
        assert_eq!(update_mode(ModeFlags::new(false, false, false)), Mode::BallSearch);
        assert_eq!(update_mode(ModeFlags::new(false, false, true)), Mode::BallSearch);
        assert_eq!(update_mode(ModeFlags::new(true, true, false)), Mode::GoalSearch);
        assert_eq!(update_mode(ModeFlags::new(true, false, true)), Mode::GoalScore);
        assert_eq!(update_mode(ModeFlags::new(false, true, true)), Mode::BallCapture);
    }

    #[test]
    fn zeta_round_trip() {
        for m in Mode::ALL {
            assert_eq!(Mode::from_zeta(m.zeta()), Some(m));
        }
        assert_eq!(Mode::from_zeta(0), None);
        assert_eq!(Mode::from_zeta(5), None);
    }

    #[test]
    fn goal_search_keeps_gate_closed() {
        let gains = GainSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in [0.0, 1.0, 17.5] {
            let (u, gate) = control_search(&mut in_mode(Mode::GoalSearch), &gains, t, &mut rng);
            assert_eq!(gate, Gate::Closed);
            assert_eq!(u.u2, gains.u2_bar);
            assert_eq!(u.u1, gains.u1_bar);
        }
        let (_, gate) = control_search(&mut in_mode(Mode::BallSearch), &gains, 0.0, &mut rng);
        assert_eq!(gate, Gate::Open);
    }

    #[test]
    fn search_is_deterministic_under_seed() {
        let gains = GainSpec::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut cs = ControllerState::default();
            (0..2000)
                .map(|k| control_search(&mut cs, &gains, f64::from(k) * 0.02, &mut rng).0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn vertical_toggle_is_a_fair_coin() {
        let gains = GainSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cs = ControllerState::default();
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = cs.next_toggle_time;
            let (u, _) = control_search(&mut cs, &gains, t, &mut rng);
            sum += u.u3.signum();
        }
        let mean = sum / f64::from(n);
        // A fair +-1 coin has mean 0 and standard error 1/sqrt(n).
        assert!(mean.abs() < 3.0 / f64::from(n).sqrt(), "mean {mean}");
    }

    #[test]
    fn capture_on_target_goes_straight() {
        let gains = GainSpec::default();
        let mut cs = in_mode(Mode::BallCapture);
        cs.prev_error = Some((0.0, 0.0));
        let (u, gate) = control_capture(&mut cs, &gains, &errors(0.0, 0.0, 100.0), 0.02);
        assert_eq!(u, ControlInput::new(gains.u1_bar, 0.0, 0.0));
        assert_eq!(gate, Gate::Open);
    }

    #[test]
    fn capture_proportional_term() {
        let gains = GainSpec {
            kp_yaw: 0.01,
            kd_yaw: 0.0,
            ..GainSpec::default()
        };
        let mut cs = in_mode(Mode::BallCapture);
        let (u, _) = control_capture(&mut cs, &gains, &errors(50.0, 0.0, 100.0), 0.02);
        // Target to the right: turn clockwise.
        assert!((u.u2 + 0.5).abs() < 1e-12);
    }

    #[test]
    fn score_below_threshold_approaches() {
        let gains = GainSpec::default();
        let mut cs = in_mode(Mode::GoalScore);
        let (u, gate) = control_score(&mut cs, &gains, &errors(0.0, 0.0, 100.0), 0.0, 0.02);
        assert_eq!(gate, Gate::Closed);
        assert_eq!(u.u1, gains.u1_bar);
    }

    #[test]
    fn score_above_threshold_shoots() {
        let gains = GainSpec::default();
        let mut cs = in_mode(Mode::GoalScore);
        let area = gains.goal_area_threshold + 1.0;
        let (u, gate) = control_score(&mut cs, &gains, &errors(0.0, 0.0, area), 0.0, 0.02);
        assert_eq!(gate, Gate::Open);
        assert_eq!(u.u1, -gains.u1_bar);
    }

    #[test]
    fn shoot_latch_survives_area_dropout() {
        let gains = GainSpec {
            shoot_duration: 1.0,
            ..GainSpec::default()
        };
        let mut cs = in_mode(Mode::GoalScore);
        let t0 = 10.0;
        let big = errors(0.0, 0.0, gains.goal_area_threshold * 2.0);
        let small = errors(0.0, 0.0, gains.goal_area_threshold / 2.0);
        control_score(&mut cs, &gains, &big, t0, 0.02);
        control_score(&mut cs, &gains, &small, t0 + 0.1, 0.02);
        let (u, gate) = control_score(&mut cs, &gains, &small, t0 + 0.5, 0.02);
        assert_eq!((u.u1, gate), (-gains.u1_bar, Gate::Open));
        assert!(cs.is_shooting(t0 + 0.5));
        let (u, gate) = control_score(&mut cs, &gains, &small, t0 + 1.01, 0.02);
        assert_eq!((u.u1, gate), (gains.u1_bar, Gate::Closed));
    }

    fn ctx<'a>(
        gains: &'a GainSpec,
        limits: &'a Limits,
        perception: &'a PerceptionSpec,
        targets: &'a TargetSet,
    ) -> ControllerContext<'a> {
        ControllerContext {
            gains,
            limits,
            perception,
            targets,
            ground_truth_gamma: None,
        }
    }

    #[test]
    fn empty_frame_searches() {
        let (g, l, p, t) = (GainSpec::default(), Limits::default(), PerceptionSpec::default(), TargetSet::default());
        let mut cs = ControllerState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = tick(&mut cs, &ctx(&g, &l, &p, &t), &[], 0.0, 0.02, &mut rng);
        assert_eq!(out.mode, Mode::BallSearch);
        assert_eq!(out.input.u2, g.u2_bar);
        assert!(out.transition.is_none());
        assert!(out.errors.is_none());
    }

    #[test]
    fn held_ball_and_small_goal_approach_with_gate_closed() {
        let (g, l, p, t) = (GainSpec::default(), Limits::default(), PerceptionSpec::default(), TargetSet::default());
        let dets = [
            Detection {
                id: 0,
                class: DetectionClass::GreenBall,
                bbox: BoundingBox::centered(0.0, 112.0, 100.0, 76.0),
                confidence: 0.95,
            },
            Detection {
                id: 1,
                class: DetectionClass::OrangeCircle,
                bbox: BoundingBox::centered(-20.0, 10.0, 30.0, 30.0),
                confidence: 0.8,
            },
        ];
        let mut cs = ControllerState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = tick(&mut cs, &ctx(&g, &l, &p, &t), &dets, 0.0, 0.02, &mut rng);
        assert_eq!(out.mode, Mode::GoalScore);
        assert_eq!(out.transition, Some((Mode::BallSearch, Mode::GoalScore)));
        assert_eq!(out.gate, Gate::Closed);
        assert_eq!(out.input.u1, g.u1_bar);
        // Goal is left of center: counter-clockwise turn.
        assert!(out.input.u2 > 0.0);
        assert_eq!(out.motors.gate_servo, Gate::Closed);
    }

    #[test]
    fn mode_change_drops_derivative_memory() {
        let (g, l, p, t) = (GainSpec::default(), Limits::default(), PerceptionSpec::default(), TargetSet::default());
        let ball = |cx: f64| Detection {
            id: 0,
            class: DetectionClass::GreenBall,
            bbox: BoundingBox::centered(cx, 0.0, 20.0, 20.0),
            confidence: 0.9,
        };
        let mut cs = ControllerState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = ctx(&g, &l, &p, &t);
        let first = tick(&mut cs, &c, &[ball(40.0)], 0.0, 0.02, &mut rng);
        assert_eq!(first.transition, Some((Mode::BallSearch, Mode::BallCapture)));
        // Pure proportional response on the entry tick.
        assert!((first.input.u2 + g.kp_yaw * 40.0).abs() < 1e-12);
        let second = tick(&mut cs, &c, &[ball(30.0)], 0.02, 0.02, &mut rng);
        let expected = -(g.kp_yaw * 30.0 + g.kd_yaw * (30.0 - 40.0) / 0.02);
        assert!((second.input.u2 - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pd_is_odd_in_the_error(e_yaw in -160.0f64..160.0, e_vert in -160.0f64..160.0) {
            let gains = GainSpec::default();
            let mut a = in_mode(Mode::BallCapture);
            let mut b = in_mode(Mode::BallCapture);
            let (ua, _) = control_capture(&mut a, &gains, &errors(e_yaw, e_vert, 10.0), 0.02);
            let (ub, _) = control_capture(&mut b, &gains, &errors(-e_yaw, -e_vert, 10.0), 0.02);
            prop_assert_eq!(ua.u2, -ub.u2);
            prop_assert_eq!(ua.u3, -ub.u3);
        }
    }
}
