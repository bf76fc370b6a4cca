#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Exact planar pose after `t` seconds of constant forward speed `u1` and
/// yaw rate `u2`. Heading is not wrapped.
pub fn oracle_unicycle(p0: Pose, u1: f64, u2: f64, t: f64) -> Pose {
    if u2 == 0.0 {
        return Pose::new(
            p0.x + u1 * t * p0.theta.cos(),
            p0.y + u1 * t * p0.theta.sin(),
            p0.theta,
        );
    }
    let rho = u1 / u2;
    let th = p0.theta + u2 * t;
    Pose::new(
        p0.x + rho * (th.sin() - p0.theta.sin()),
        p0.y - rho * (th.cos() - p0.theta.cos()),
        th,
    )
}
