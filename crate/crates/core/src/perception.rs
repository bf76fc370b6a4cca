//! Bounding-box pose extraction, target selection, image-plane errors and
//! the three binary mode flags.

use serde::{Deserialize, Serialize};

use crate::camera::{BoundingBox, CameraSpec, Detection, DetectionClass};
use crate::error::{Error, Result};
use crate::world::TargetSet;

/// Target position relative to the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEstimate {
    pub range_r: f64,
    pub bearing_theta: f64,
    pub bearing_psi: f64,
    pub class: DetectionClass,
    pub confidence: f64,
}

/// Pixel offsets of the selected target from the aim point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameErrors {
    pub e_yaw: f64,
    pub e_vert: f64,
    pub target_class: DetectionClass,
    pub target_area: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeFlags {
    /// Holding a ball.
    pub gamma: bool,
    /// Seeing a wanted ball outside the cage.
    pub sigma: bool,
    /// Seeing a wanted goal.
    pub chi: bool,
}

impl ModeFlags {
    pub fn new(gamma: bool, sigma: bool, chi: bool) -> Self {
        Self { gamma, sigma, chi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionSpec {
    /// Where the cage, and any ball held in it, appears in the frame.
    pub cage_region: BoundingBox,
    /// Minimum box area for a ball in the cage region to count as held.
    pub hold_area_threshold: f64,
    /// Pixel the controllers steer targets onto.
    pub aim_point: [f64; 2],
    /// Use simulator ground truth for the holding flag instead of the camera.
    pub ground_truth_gamma: bool,
}

impl Default for PerceptionSpec {
    /// Cage region is the bottom-center 40% x 30% of a 320 x 320 frame.
    fn default() -> Self {
        Self {
            cage_region: BoundingBox::new(-64.0, 64.0, 64.0, 160.0),
            hold_area_threshold: 2000.0,
            aim_point: [0.0, 0.0],
            ground_truth_gamma: false,
        }
    }
}

impl PerceptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.cage_region.is_valid() {
            return Err(Error::Validation("perception: cage_region is degenerate".into()));
        }
        if !(self.hold_area_threshold >= 0.0) || !self.aim_point.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(
                "perception: hold_area_threshold must be non-negative and aim_point finite".into(),
            ));
        }
        Ok(())
    }
}

/// Range from box area and bearings from box center.
pub fn extract_pose(det: &Detection, spec: &CameraSpec) -> Result<RelativeEstimate> {
    let b = &det.bbox;
    let area = (b.x_max - b.x_min) * (b.y_max - b.y_min);
    if !(area > 0.0) {
        return Err(Error::DegenerateBox);
    }
    Ok(RelativeEstimate {
        range_r: (spec.k_r(det.class) / area).sqrt(),
        bearing_theta: spec.k_theta * (b.x_max + b.x_min) / 2.0,
        bearing_psi: spec.k_psi * (b.y_max + b.y_min) / 2.0,
        class: det.class,
        confidence: det.confidence,
    })
}

/// Fits k_r = r^2 * area as the mean over observations of (box, true range).
pub fn calibrate_kr(observations: &[(BoundingBox, f64)]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let mut sum = 0.0;
    for (bbox, range) in observations {
        let area = bbox.area();
        if !(area > 0.0 && *range > 0.0) {
            return Err(Error::Domain(format!(
                "calibration observation needs positive area and range (area {area}, range {range})"
            )));
        }
        sum += range * range * area;
    }
    Ok(sum / observations.len() as f64)
}

/// Largest-area detection of a wanted class; ties go to higher confidence,
/// then lower id.
pub fn select_target<'a>(
    dets: &'a [Detection],
    wanted: &[DetectionClass],
) -> Option<&'a Detection> {
    dets.iter()
        .filter(|d| wanted.contains(&d.class))
        .min_by(|a, b| {
            b.bbox
                .area()
                .total_cmp(&a.bbox.area())
                .then_with(|| b.confidence.total_cmp(&a.confidence))
                .then_with(|| a.id.cmp(&b.id))
        })
}

pub fn frame_errors(det: &Detection, aim: [f64; 2]) -> FrameErrors {
    let (cx, cy) = det.bbox.center();
    FrameErrors {
        e_yaw: cx - aim[0],
        e_vert: cy - aim[1],
        target_class: det.class,
        target_area: det.bbox.area(),
    }
}

pub fn in_cage_region(det: &Detection, cage_region: &BoundingBox) -> bool {
    let (cx, cy) = det.bbox.center();
    cage_region.contains_point(cx, cy)
}

pub fn wanted_ball_classes(targets: &TargetSet) -> Vec<DetectionClass> {
    DetectionClass::ALL
        .into_iter()
        .filter(|c| targets.wants_ball(*c))
        .collect()
}

pub fn wanted_goal_classes(targets: &TargetSet) -> Vec<DetectionClass> {
    DetectionClass::ALL
        .into_iter()
        .filter(|c| targets.wants_goal(*c))
        .collect()
}

pub fn compute_flags(
    dets: &[Detection],
    cage_region: &BoundingBox,
    hold_area_threshold: f64,
    targets: &TargetSet,
) -> ModeFlags {
    let mut flags = ModeFlags::default();
    for d in dets {
        if d.class.is_ball() {
            if in_cage_region(d, cage_region) {
                flags.gamma |= d.bbox.area() > hold_area_threshold;
            } else if targets.wants_ball(d.class) {
                flags.sigma = true;
            }
        } else if targets.wants_goal(d.class) {
            flags.chi = true;
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{BallColor, GoalColor};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn det(id: u32, class: DetectionClass, bbox: BoundingBox, confidence: f64) -> Detection {
        Detection {
            id,
            class,
            bbox,
            confidence,
        }
    }

    fn cage() -> BoundingBox {
        PerceptionSpec::default().cage_region
    }

    #[test]
    fn centered_box_has_zero_bearings() {
        let d = det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, 0.0, 30.0, 30.0), 1.0);
        let est = extract_pose(&d, &CameraSpec::default()).unwrap();
        assert_eq!((est.bearing_theta, est.bearing_psi), (0.0, 0.0));
    }

    #[test]
    fn unit_kr_two_pixel_box() {
        let mut spec = CameraSpec::default();
        spec.k_r.set(DetectionClass::GreenBall, 1.0);
        let d = det(0, DetectionClass::GreenBall, BoundingBox::new(0.0, 2.0, 0.0, 2.0), 1.0);
        assert_eq!(extract_pose(&d, &spec).unwrap().range_r, 0.5);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let d = det(0, DetectionClass::GreenBall, BoundingBox::new(1.0, 1.0, 0.0, 2.0), 1.0);
        assert!(matches!(extract_pose(&d, &CameraSpec::default()), Err(Error::DegenerateBox)));
    }

    #[test]
    fn calibration_examples() {
        let sq = |side: f64| BoundingBox::centered(0.0, 0.0, side, side);
        assert_eq!(calibrate_kr(&[(sq(5.0), 2.0)]).unwrap(), 100.0);
        assert_eq!(calibrate_kr(&[(sq(10.0), 1.0), (sq(5.0), 2.0)]).unwrap(), 100.0);
        let once = calibrate_kr(&[(sq(7.0), 3.0)]).unwrap();
        assert_eq!(calibrate_kr(&vec![(sq(7.0), 3.0); 9]).unwrap(), once);
        assert!(matches!(calibrate_kr(&[]), Err(Error::EmptyCalibration)));
        assert!(calibrate_kr(&[(sq(5.0), 0.0)]).is_err());
    }

    #[test]
    fn target_selection() {
        let wanted = [DetectionClass::GreenBall];
        assert!(select_target(&[], &wanted).is_none());
        let purple = det(0, DetectionClass::PurpleBall, BoundingBox::centered(0.0, 0.0, 50.0, 50.0), 1.0);
        assert!(select_target(&[purple], &wanted).is_none());

        let near = det(1, DetectionClass::GreenBall, BoundingBox::centered(30.0, 0.0, 20.0, 20.0), 0.6);
        let far = det(2, DetectionClass::GreenBall, BoundingBox::centered(-30.0, 0.0, 10.0, 10.0), 0.9);
        assert_eq!(select_target(&[near], &wanted), Some(&near));
        assert_eq!(select_target(&[far, purple, near], &wanted).unwrap().id, 1);
    }

    #[test]
    fn frame_error_examples() {
        let centered = det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, 0.0, 10.0, 10.0), 1.0);
        let e = frame_errors(&centered, [0.0, 0.0]);
        assert_eq!((e.e_yaw, e.e_vert), (0.0, 0.0));
        assert_eq!(e.target_area, 100.0);

        let off = det(0, DetectionClass::GreenBall, BoundingBox::centered(20.0, -10.0, 10.0, 10.0), 1.0);
        let e = frame_errors(&off, [0.0, 0.0]);
        assert_eq!((e.e_yaw, e.e_vert), (20.0, -10.0));

        let low = det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, -30.0, 10.0, 10.0), 1.0);
        let e = frame_errors(&low, [0.0, -30.0]);
        assert_eq!((e.e_yaw, e.e_vert), (0.0, 0.0));
    }

    #[test]
    fn flag_examples() {
        let targets = TargetSet::default();
        assert_eq!(compute_flags(&[], &cage(), 2000.0, &targets), ModeFlags::default());

        let ball = det(0, DetectionClass::GreenBall, BoundingBox::centered(-40.0, -20.0, 30.0, 30.0), 0.9);
        assert_eq!(
            compute_flags(&[ball], &cage(), 2000.0, &targets),
            ModeFlags::new(false, true, false)
        );

        let held = det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, 112.0, 100.0, 76.0), 0.95);
        let goal = det(1, DetectionClass::OrangeSquare, BoundingBox::centered(10.0, -5.0, 40.0, 40.0), 0.8);
        let flags = compute_flags(&[held, goal], &cage(), 2000.0, &targets);
        assert!(flags.gamma && flags.chi);
        assert!(!flags.sigma, "a held ball must not count as seen");
    }

    #[test]
    fn small_ball_in_cage_region_is_not_held() {
        let speck = det(0, DetectionClass::PurpleBall, BoundingBox::centered(0.0, 100.0, 20.0, 20.0), 0.9);
        let flags = compute_flags(&[speck], &cage(), 2000.0, &TargetSet::default());
        assert_eq!(flags, ModeFlags::default());
    }

    #[test]
    fn unwanted_colors_do_not_raise_flags() {
        let targets = TargetSet {
            balls: vec![BallColor::Purple],
            goals: vec![GoalColor::Yellow],
        };
        let dets = [
            det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, 0.0, 30.0, 30.0), 0.9),
            det(1, DetectionClass::OrangeCircle, BoundingBox::centered(50.0, 0.0, 30.0, 30.0), 0.9),
        ];
        assert_eq!(compute_flags(&dets, &cage(), 2000.0, &targets), ModeFlags::default());
    }

    fn arb_det(id: u32) -> impl Strategy<Value = Detection> {
        (0usize..2, -150.0f64..150.0, -150.0f64..150.0, 1.0f64..60.0, 0.0f64..1.0).prop_map(
            move |(c, cx, cy, side, conf)| {
                det(id, DetectionClass::ALL[c], BoundingBox::centered(cx, cy, side, side), conf)
            },
        )
    }

    proptest! {
        #[test]
        fn range_decreases_with_area(a in 1.0f64..1e4, grow in 1.0001f64..10.0) {
            let spec = CameraSpec::default();
            let small = det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, 0.0, a.sqrt(), a.sqrt()), 1.0);
            let side = (a * grow).sqrt();
            let big = det(0, DetectionClass::GreenBall, BoundingBox::centered(0.0, 0.0, side, side), 1.0);
            prop_assert!(extract_pose(&big, &spec).unwrap().range_r < extract_pose(&small, &spec).unwrap().range_r);
        }

        #[test]
        fn selection_is_permutation_invariant(
            dets in (0u32..8).prop_flat_map(|n| (0..n).map(arb_det).collect::<Vec<_>>()),
            seed in any::<u64>(),
        ) {
            let wanted = [DetectionClass::GreenBall];
            let mut shuffled = dets.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(select_target(&dets, &wanted), select_target(&shuffled, &wanted));
        }

        #[test]
        fn frame_errors_translate(cx in -100.0f64..100.0, cy in -100.0f64..100.0, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
            let b = BoundingBox::centered(cx, cy, 12.0, 9.0);
            let shifted = BoundingBox::new(b.x_min + dx, b.x_max + dx, b.y_min + dy, b.y_max + dy);
            let e0 = frame_errors(&det(0, DetectionClass::GreenBall, b, 1.0), [0.0, 0.0]);
            let e1 = frame_errors(&det(0, DetectionClass::GreenBall, shifted, 1.0), [0.0, 0.0]);
            prop_assert!((e1.e_yaw - e0.e_yaw - dx).abs() < 1e-9);
            prop_assert!((e1.e_vert - e0.e_vert - dy).abs() < 1e-9);
        }

        #[test]
        fn cage_detections_never_raise_sigma(dets in (0u32..6).prop_flat_map(|n| (0..n).map(arb_det).collect::<Vec<_>>())) {
            let region = cage();
            let inside: Vec<Detection> = dets.into_iter().filter(|d| in_cage_region(d, &region)).collect();
            prop_assert!(!compute_flags(&inside, &region, 2000.0, &TargetSet::default()).sigma);
        }
    }
}
