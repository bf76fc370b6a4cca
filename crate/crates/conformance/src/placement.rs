use ltasim_core::{AgentState, Ball, BallColor, BallStatus, CameraSpec, Vec3};
use rand::Rng;

/// A ball put at a known range and bearing from a randomly posed agent.
#[derive(Debug, Clone)]
pub struct Placement {
    pub agent: AgentState,
    pub ball: Ball,
    pub range: f64,
    pub theta: f64,
    pub psi: f64,
}

/// Draws a placement whose whole box lies inside the frame, so nothing is
/// clipped. Bearings follow the camera convention: `theta` positive to the
/// right, `psi` positive downward.
pub fn random_placement<R: Rng + ?Sized>(spec: &CameraSpec, rng: &mut R) -> Placement {
    let radius = 0.25;
    let side_px_at_1m = 2.0 * radius / spec.k_theta.sqrt() / spec.k_psi.sqrt();
    let (hw, hh) = (f64::from(spec.width_px) / 2.0, f64::from(spec.height_px) / 2.0);
    loop {
        let range = rng.random_range(1.0..spec.max_range);
        let half_side = side_px_at_1m / range / 2.0;
        let (mx, my) = (hw - half_side, hh - half_side);
        if mx <= 0.0 || my <= 0.0 {
            continue;
        }
        let theta = rng.random_range(-mx..mx) * spec.k_theta;
        let psi = rng.random_range(-my..my) * spec.k_psi;

        let agent = AgentState::new(
            Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.0..10.0)),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        // Body frame: x forward, y left, z up.
        let dir = Vec3::new(psi.cos() * theta.cos(), -psi.cos() * theta.sin(), -psi.sin());
        let center = agent.body_to_world(&(spec.mount_offset + dir * range));
        let ball = Ball {
            id: 0,
            color: BallColor::Green,
            center,
            radius,
            status: BallStatus::Free,
        };
        return Placement { agent, ball, range, theta, psi };
    }
}
