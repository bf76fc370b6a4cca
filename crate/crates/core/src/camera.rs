//! Synthetic forward camera.
//!
//! Objects are projected with the same linear pixel/bearing and area/range
//! model that [`crate::perception::extract_pose`] inverts, so at zero noise
//! the two are exact inverses. Frame coordinates are centered on the image
//! center with x growing to the right and y growing downward.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::AgentState;
use crate::world::{
    BallColor, GameObject, GoalColor, GoalShape, Vec3, DEFAULT_BALL_RADIUS, DEFAULT_GOAL_APERTURE,
};

/// The eight detector classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionClass {
    GreenBall,
    PurpleBall,
    OrangeCircle,
    OrangeSquare,
    OrangeTriangle,
    YellowCircle,
    YellowSquare,
    YellowTriangle,
}

impl DetectionClass {
    pub const ALL: [DetectionClass; 8] = [
        DetectionClass::GreenBall,
        DetectionClass::PurpleBall,
        DetectionClass::OrangeCircle,
        DetectionClass::OrangeSquare,
        DetectionClass::OrangeTriangle,
        DetectionClass::YellowCircle,
        DetectionClass::YellowSquare,
        DetectionClass::YellowTriangle,
    ];

    pub fn ball(color: BallColor) -> Self {
        match color {
            BallColor::Green => DetectionClass::GreenBall,
            BallColor::Purple => DetectionClass::PurpleBall,
        }
    }

    pub fn goal(color: GoalColor, shape: GoalShape) -> Self {
        use DetectionClass::*;
        match (color, shape) {
            (GoalColor::Orange, GoalShape::Circle) => OrangeCircle,
            (GoalColor::Orange, GoalShape::Square) => OrangeSquare,
            (GoalColor::Orange, GoalShape::Triangle) => OrangeTriangle,
            (GoalColor::Yellow, GoalShape::Circle) => YellowCircle,
            (GoalColor::Yellow, GoalShape::Square) => YellowSquare,
            (GoalColor::Yellow, GoalShape::Triangle) => YellowTriangle,
        }
    }

    pub fn is_ball(self) -> bool {
        self.ball_color().is_some()
    }

    pub fn ball_color(self) -> Option<BallColor> {
        match self {
            DetectionClass::GreenBall => Some(BallColor::Green),
            DetectionClass::PurpleBall => Some(BallColor::Purple),
            _ => None,
        }
    }

    pub fn goal_color(self) -> Option<GoalColor> {
        use DetectionClass::*;
        match self {
            OrangeCircle | OrangeSquare | OrangeTriangle => Some(GoalColor::Orange),
            YellowCircle | YellowSquare | YellowTriangle => Some(GoalColor::Yellow),
            GreenBall | PurpleBall => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        use DetectionClass::*;
        match self {
            GreenBall => "green_ball",
            PurpleBall => "purple_ball",
            OrangeCircle => "orange_circle",
            OrangeSquare => "orange_square",
            OrangeTriangle => "orange_triangle",
            YellowCircle => "yellow_circle",
            YellowSquare => "yellow_square",
            YellowTriangle => "yellow_triangle",
        }
    }
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pixel box in centered frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Self::new(
            cx - width / 2.0,
            cx + width / 2.0,
            cy - height / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_max + self.x_min) / 2.0,
            (self.y_max + self.y_min) / 2.0,
        )
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    /// Intersection with `other`, or `None` if they do not overlap.
    pub fn intersect(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let b = BoundingBox::new(
            self.x_min.max(other.x_min),
            self.x_max.min(other.x_max),
            self.y_min.max(other.y_min),
            self.y_max.min(other.y_max),
        );
        b.is_valid().then_some(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Per-frame id in emission order; the NMS tie-breaker.
    pub id: u32,
    pub class: DetectionClass,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// Area-to-range factors per class (m^2 px^2). Unset entries are derived
/// from the nominal object size: (size / k_theta) * (size / k_psi).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_ball: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purple_ball: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orange_circle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orange_square: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orange_triangle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yellow_circle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yellow_square: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yellow_triangle: Option<f64>,
}

impl KrTable {
    pub fn get(&self, class: DetectionClass) -> Option<f64> {
        use DetectionClass::*;
        match class {
            GreenBall => self.green_ball,
            PurpleBall => self.purple_ball,
            OrangeCircle => self.orange_circle,
            OrangeSquare => self.orange_square,
            OrangeTriangle => self.orange_triangle,
            YellowCircle => self.yellow_circle,
            YellowSquare => self.yellow_square,
            YellowTriangle => self.yellow_triangle,
        }
    }

    pub fn set(&mut self, class: DetectionClass, value: f64) {
        use DetectionClass::*;
        let slot = match class {
            GreenBall => &mut self.green_ball,
            PurpleBall => &mut self.purple_ball,
            OrangeCircle => &mut self.orange_circle,
            OrangeSquare => &mut self.orange_square,
            OrangeTriangle => &mut self.orange_triangle,
            YellowCircle => &mut self.yellow_circle,
            YellowSquare => &mut self.yellow_square,
            YellowTriangle => &mut self.yellow_triangle,
        };
        *slot = Some(value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub width_px: u32,
    pub height_px: u32,
    /// Horizontal radians per pixel.
    pub k_theta: f64,
    /// Vertical radians per pixel.
    pub k_psi: f64,
    pub k_r: KrTable,
    pub max_range: f64,
    /// Camera position in the body frame.
    pub mount_offset: Vec3,
    /// Detections below this confidence are dropped before NMS.
    pub confidence_cutoff: f64,
    pub iou_threshold: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            width_px: 320,
            height_px: 320,
            k_theta: 0.0035,
            k_psi: 0.0035,
            k_r: KrTable::default(),
            max_range: 15.0,
            mount_offset: Vec3::zeros(),
            confidence_cutoff: 0.25,
            iou_threshold: 0.45,
        }
    }
}

impl CameraSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("camera: {m}")));
        if self.width_px == 0 || self.height_px == 0 {
            return bad("frame size must be positive");
        }
        if !(self.k_theta > 0.0 && self.k_psi > 0.0) {
            return bad("k_theta and k_psi must be positive");
        }
        if !(self.max_range > 0.0) {
            return bad("max_range must be positive");
        }
        if DetectionClass::ALL.iter().any(|c| !(self.k_r(*c) > 0.0)) {
            return bad("every k_r entry must be positive");
        }
        if !(0.0..=1.0).contains(&self.confidence_cutoff) || !(0.0..=1.0).contains(&self.iou_threshold)
        {
            return bad("confidence_cutoff and iou_threshold must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn k_r(&self, class: DetectionClass) -> f64 {
        self.k_r.get(class).unwrap_or_else(|| {
            let size = if class.is_ball() {
                2.0 * DEFAULT_BALL_RADIUS
            } else {
                DEFAULT_GOAL_APERTURE
            };
            size * size / (self.k_theta * self.k_psi)
        })
    }

    pub fn half_width(&self) -> f64 {
        f64::from(self.width_px) / 2.0
    }

    pub fn half_height(&self) -> f64 {
        f64::from(self.height_px) / 2.0
    }

    /// Half field of view (horizontal, vertical) in radians.
    pub fn half_fov(&self) -> (f64, f64) {
        (self.half_width() * self.k_theta, self.half_height() * self.k_psi)
    }

    pub fn frame(&self) -> BoundingBox {
        BoundingBox::new(
            -self.half_width(),
            self.half_width(),
            -self.half_height(),
            self.half_height(),
        )
    }

    pub fn camera_position(&self, agent: &AgentState) -> Vec3 {
        agent.body_to_world(&self.mount_offset)
    }

    /// Range and bearings of a world point: (r, theta_b, psi_b) with theta_b
    /// positive to the right and psi_b positive downward.
    pub fn bearings(&self, agent: &AgentState, point: &Vec3) -> (f64, f64, f64) {
        let rel = agent.world_to_body(point) - self.mount_offset;
        let horizontal = rel.x.hypot(rel.y);
        (rel.norm(), (-rel.y).atan2(rel.x), (-rel.z).atan2(horizontal))
    }
}

/// Detector degradation model. All zero means a perfect detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Std-dev of independent gaussian jitter on each box edge.
    pub pixel_jitter_sigma: f64,
    /// Miss probability at `max_range`; falls linearly to zero at the camera.
    pub miss_rate_at_max_range: f64,
    /// Mean number of spurious boxes per frame.
    pub false_positive_rate: f64,
    /// True detections never score below this; spurious ones always do.
    pub confidence_floor: f64,
    /// Relative std-dev of multiplicative noise on each control channel.
    pub actuation_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            pixel_jitter_sigma: 0.0,
            miss_rate_at_max_range: 0.0,
            false_positive_rate: 0.0,
            confidence_floor: 0.5,
            actuation_sigma: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.pixel_jitter_sigma,
            self.miss_rate_at_max_range,
            self.false_positive_rate,
            self.confidence_floor,
            self.actuation_sigma,
        ];
        if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation("noise: values must be non-negative".into()));
        }
        if self.miss_rate_at_max_range > 1.0 || self.confidence_floor > 1.0 {
            return Err(Error::Validation(
                "noise: probabilities must not exceed 1".into(),
            ));
        }
        Ok(())
    }
}

/// Spurious box side range in pixels.
const SPURIOUS_SIDE: (f64, f64) = (6.0, 40.0);

/// Noise-free box for `obj`, or `None` when it is behind the camera, outside
/// the field of view or beyond `max_range`.
pub fn project(agent: &AgentState, spec: &CameraSpec, obj: &GameObject) -> Option<BoundingBox> {
    let (range, theta_b, psi_b) = spec.bearings(agent, &obj.center());
    let (half_h, half_v) = spec.half_fov();
    if theta_b.abs() > std::f64::consts::FRAC_PI_2
        || theta_b.abs() > half_h
        || psi_b.abs() > half_v
        || range > spec.max_range
        || range <= 0.0
    {
        return None;
    }
    let side = spec.k_r(obj.class()).sqrt() / range;
    BoundingBox::centered(theta_b / spec.k_theta, psi_b / spec.k_psi, side, side)
        .intersect(&spec.frame())
}

fn range_confidence(range: f64, spec: &CameraSpec, noise: &NoiseSpec) -> f64 {
    let closeness = (1.0 - range / spec.max_range).clamp(0.0, 1.0);
    noise.confidence_floor + (1.0 - noise.confidence_floor) * closeness
}

fn jitter<R: Rng + ?Sized>(bbox: BoundingBox, normal: Option<&Normal<f64>>, rng: &mut R) -> BoundingBox {
    let Some(normal) = normal else {
        return bbox;
    };
    let mut b = BoundingBox::new(
        bbox.x_min + normal.sample(rng),
        bbox.x_max + normal.sample(rng),
        bbox.y_min + normal.sample(rng),
        bbox.y_max + normal.sample(rng),
    );
    if b.x_min > b.x_max {
        std::mem::swap(&mut b.x_min, &mut b.x_max);
    }
    if b.y_min > b.y_max {
        std::mem::swap(&mut b.y_min, &mut b.y_max);
    }
    b
}

/// One synthetic detector frame for `agent`.
///
/// Balls held by this agent are reported inside `held_region` (a fixed box
/// where the cage shows up in the image) rather than projected. Every true
/// object consumes the same random draws whether or not it is missed, so
/// runs that differ only in noise levels stay coupled.
pub fn sense<R: Rng + ?Sized>(
    agent: &AgentState,
    world: &[GameObject],
    held_region: &BoundingBox,
    spec: &CameraSpec,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Vec<Detection> {
    let normal = (noise.pixel_jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.pixel_jitter_sigma).expect("finite sigma"));
    let frame = spec.frame();
    let camera = spec.camera_position(agent);
    let (hcx, hcy) = held_region.center();
    let held_box = BoundingBox::centered(
        hcx,
        hcy,
        0.8 * held_region.width(),
        0.8 * held_region.height(),
    );

    let mut out = Vec::new();
    for obj in world {
        let own_ball = matches!(obj, GameObject::Ball(b) if agent.held_balls.contains(&b.id));
        let (bbox, range) = if own_ball {
            (Some(held_box), (obj.center() - camera).norm())
        } else {
            (project(agent, spec, obj), (obj.center() - camera).norm())
        };
        let Some(bbox) = bbox else { continue };

        let p_miss = noise.miss_rate_at_max_range * (range / spec.max_range).min(1.0);
        let missed = rng.random::<f64>() < p_miss;
        let noisy = jitter(bbox, normal.as_ref(), rng);
        if missed {
            continue;
        }
        let Some(noisy) = noisy.intersect(&frame) else { continue };
        out.push(Detection {
            id: out.len() as u32,
            class: obj.class(),
            bbox: noisy,
            confidence: range_confidence(range, spec, noise),
        });
    }

    if noise.false_positive_rate > 0.0 {
        let count = Poisson::new(noise.false_positive_rate)
            .expect("positive rate")
            .sample(rng) as usize;
        for _ in 0..count {
            let class = DetectionClass::ALL[rng.random_range(0..DetectionClass::ALL.len())];
            let side = rng.random_range(SPURIOUS_SIDE.0..SPURIOUS_SIDE.1);
            let cx = rng.random_range(frame.x_min..frame.x_max);
            let cy = rng.random_range(frame.y_min..frame.y_max);
            let confidence = rng.random::<f64>() * noise.confidence_floor;
            if let Some(bbox) = BoundingBox::centered(cx, cy, side, side).intersect(&frame) {
                out.push(Detection {
                    id: out.len() as u32,
                    class,
                    bbox,
                    confidence,
                });
            }
        }
    }
    out
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    match a.intersect(b) {
        Some(i) => {
            let inter = i.area();
            inter / (a.area() + b.area() - inter)
        }
        None => 0.0,
    }
}

/// Detector priority: higher confidence first, then lower id.
pub fn priority(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.id.cmp(&b.id))
}

/// Greedy per-class non-maximum suppression. Output is in priority order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| priority(a, b));

    let mut keep: Vec<Detection> = Vec::with_capacity(order.len());
    for det in order {
        let suppressed = keep
            .iter()
            .any(|k| k.class == det.class && iou(&k.bbox, &det.bbox) > iou_threshold);
        if !suppressed {
            keep.push(*det);
        }
    }
    keep
}
