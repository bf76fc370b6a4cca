use ltasim_core::{BoundingBox, Detection, DetectionClass};
use rand::Rng;

fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let area = |r: &BoundingBox| (r.x_max - r.x_min) * (r.y_max - r.y_min);
    inter / (area(a) + area(b) - inter)
}

/// `a` outranks `b`: strictly more confident, or equally confident with a
/// smaller id.
fn outranks(a: &Detection, b: &Detection) -> bool {
    a.confidence > b.confidence || (a.confidence == b.confidence && a.id < b.id)
}

/// Reference suppression by its defining recursion: a detection survives
/// iff no surviving same-class detection that outranks it overlaps it by
/// more than `iou_threshold`. Quadratic with memoisation; meant for small
/// frames.
pub fn oracle_nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    assert!(dets.len() <= 64, "oracle is for small frames");
    let n = dets.len();
    let mut memo: Vec<Option<bool>> = vec![None; n];

    fn kept(i: usize, dets: &[Detection], thr: f64, memo: &mut Vec<Option<bool>>) -> bool {
        if let Some(k) = memo[i] {
            return k;
        }
        let d = &dets[i];
        let mut survive = true;
        for j in 0..dets.len() {
            let o = &dets[j];
            if j != i
                && o.class == d.class
                && outranks(o, d)
                && overlap(&o.bbox, &d.bbox) > thr
                && kept(j, dets, thr, memo)
            {
                survive = false;
                break;
            }
        }
        memo[i] = Some(survive);
        survive
    }

    let mut out: Vec<Detection> = (0..n)
        .filter(|&i| kept(i, dets, iou_threshold, &mut memo))
        .map(|i| dets[i])
        .collect();
    // Selection sort keeps this free of the library's comparator.
    for i in 0..out.len() {
        let mut best = i;
        for j in i + 1..out.len() {
            if outranks(&out[j], &out[best]) {
                best = j;
            }
        }
        out.swap(i, best);
    }
    out
}

/// A random frame of up to `max_len` detections. Coordinates and
/// confidences come from coarse grids half the time so exact duplicates
/// and priority ties actually occur.
pub fn random_frame<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> Vec<Detection> {
    let n = rng.random_range(0..=max_len);
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|i| {
            let class = DetectionClass::ALL[rng.random_range(0..3)];
            let (x, y, w, h, confidence) = if coarse {
                (
                    f64::from(rng.random_range(0..6u8)) * 8.0,
                    f64::from(rng.random_range(0..6u8)) * 8.0,
                    f64::from(rng.random_range(1..5u8)) * 8.0,
                    f64::from(rng.random_range(1..5u8)) * 8.0,
                    f64::from(rng.random_range(1..5u8)) * 0.2,
                )
            } else {
                (
                    rng.random_range(-60.0..60.0),
                    rng.random_range(-60.0..60.0),
                    rng.random_range(2.0..50.0),
                    rng.random_range(2.0..50.0),
                    rng.random_range(0.0..1.0),
                )
            };
            Detection {
                id: i as u32,
                class,
                bbox: BoundingBox::new(x, x + w, y, y + h),
                confidence,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(id: u32, class: DetectionClass, b: [f64; 4], confidence: f64) -> Detection {
        Detection {
            id,
            class,
            bbox: BoundingBox::new(b[0], b[1], b[2], b[3]),
            confidence,
        }
    }

    #[test]
    fn empty_in_empty_out() {
        assert!(oracle_nms(&[], 0.45).is_empty());
    }

    #[test]
    fn two_box_example() {
        let dets = [
            det(0, DetectionClass::GreenBall, [0.0, 10.0, 0.0, 10.0], 0.9),
            det(1, DetectionClass::GreenBall, [1.0, 11.0, 0.0, 10.0], 0.8),
        ];
        let kept = oracle_nms(&dets, 0.45);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 0);
    }

    #[test]
    fn chain_revives_third_box() {
        // b suppresses c only if b survives; a suppresses b, so c survives.
        let dets = [
            det(0, DetectionClass::GreenBall, [0.0, 10.0, 0.0, 10.0], 0.9),
            det(1, DetectionClass::GreenBall, [4.0, 14.0, 0.0, 10.0], 0.8),
            det(2, DetectionClass::GreenBall, [8.0, 18.0, 0.0, 10.0], 0.7),
        ];
        let ids: Vec<u32> = oracle_nms(&dets, 0.3).iter().map(|d| d.id).collect();
        assert_eq!(ids, vec![0, 2]);
    }

    #[test]
    fn other_classes_never_suppress() {
        let b = [0.0, 10.0, 0.0, 10.0];
        let dets = [
            det(0, DetectionClass::GreenBall, b, 0.9),
            det(1, DetectionClass::PurpleBall, b, 0.8),
        ];
        assert_eq!(oracle_nms(&dets, 0.45).len(), 2);
    }
}
