//! Rule that turns an approach pose into the grasp label.

use super::{ApproachPose, DatasetError, ElementInstance};
use crate::geometry::{BinaryMask, GraspRectangle, Point2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRule {
    /// Largest jaw opening in pixels.
    pub gripper_max_width: f64,
    /// Fingertip length written into every label.
    pub grasp_height: f64,
}

impl Default for GraspRule {
    fn default() -> Self {
        Self {
            gripper_max_width: 80.0,
            grasp_height: 30.0,
        }
    }
}

/// Below this normalised eigenvalue gap a mask counts as isotropic.
const ISOTROPY_THRESHOLD: f64 = 0.05;
/// Extra jaw clearance relative to the element extent.
const WIDTH_MARGIN: f64 = 1.2;

struct Moments {
    centroid: Point2,
    major_deg: Option<f64>,
}

fn moments(mask: &BinaryMask) -> Option<Moments> {
    let centroid = mask.centroid()?;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in mask.iter_set() {
        let dx = x as f64 + 0.5 - centroid.x;
        let dy = y as f64 + 0.5 - centroid.y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let trace = sxx + syy;
    let gap = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
    let major_deg = (trace > 0.0 && gap / trace >= ISOTROPY_THRESHOLD)
        .then(|| 0.5 * (2.0 * sxy).atan2(sxx - syy).to_degrees());
    Some(Moments {
        centroid,
        major_deg,
    })
}

/// Length of the run of mask pixels through `p` along `dir`, and its midpoint.
fn chord(mask: &BinaryMask, p: Point2, dir: (f64, f64)) -> (f64, Point2) {
    const STEP: f64 = 0.25;
    let walk = |sign: f64| {
        let mut t = 0.0;
        while mask.contains_point(Point2::new(p.x + sign * (t + STEP) * dir.0, p.y + sign * (t + STEP) * dir.1)) {
            t += STEP;
        }
        t
    };
    let (fwd, back) = (walk(1.0), walk(-1.0));
    let mid = 0.5 * (fwd - back);
    // a run sampled at STEP spans one pixel more than the distance walked
    (fwd + back + 1.0, Point2::new(p.x + mid * dir.0, p.y + mid * dir.1))
}

/// Index of the element the approach leads to.
pub(crate) fn target_element(elements: &[ElementInstance], approach: &ApproachPose) -> Option<usize> {
    let a = approach.position();
    elements
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.mask.centroid().map(|c| (i, c.distance(a), e.mask.count(), e.element_class)))
        .min_by(|l, r| {
            l.1.total_cmp(&r.1)
                .then(l.2.cmp(&r.2))
                .then(l.3.cmp(&r.3))
        })
        .map(|t| t.0)
}

/// Derives the grasp implied by an approach. Returns the target element's
/// index together with the rectangle.
///
/// The target is the element whose centroid is nearest the approach point
/// (ties: smaller area, then class name). For an element that contains its
/// own centroid the grasp is centred there and closes across the principal
/// axis; isotropic masks get angle 0. For an element whose centroid falls
/// outside its footprint, such as a ring, the grasp closes radially across
/// the band at the point nearest the approach.
pub fn derive_grasp_for_approach(
    elements: &[ElementInstance],
    approach: &ApproachPose,
    rule: &GraspRule,
) -> Result<(usize, GraspRectangle), DatasetError> {
    if !(rule.gripper_max_width > 0.0 && rule.grasp_height > 0.0) {
        return Err(DatasetError::InvalidConfig(
            "gripper width and grasp height must be positive".into(),
        ));
    }
    let idx = target_element(elements, approach)
        .ok_or_else(|| DatasetError::InvalidConfig("no non-empty element to grasp".into()))?;
    let target = &elements[idx];
    let m = moments(&target.mask).expect("target mask is non-empty");

    let (center, theta_deg, extent) = if target.mask.contains_point(m.centroid) {
        let theta = m.major_deg.map_or(0.0, |phi| phi + 90.0);
        let (s, c) = theta.to_radians().sin_cos();
        let (lo, hi) = target.mask.iter_set().fold((f64::MAX, f64::MIN), |(lo, hi), (x, y)| {
            let t = (x as f64 + 0.5) * c + (y as f64 + 0.5) * s;
            (lo.min(t), hi.max(t))
        });
        (m.centroid, theta, hi - lo + 1.0)
    } else {
        let a = approach.position();
        let nearest = target
            .mask
            .iter_set()
            .map(|(x, y)| Point2::new(x as f64 + 0.5, y as f64 + 0.5))
            .min_by(|p, q| p.distance(a).total_cmp(&q.distance(a)))
            .expect("target mask is non-empty");
        let theta = (nearest.y - m.centroid.y).atan2(nearest.x - m.centroid.x);
        let (len, mid) = chord(&target.mask, nearest, (theta.cos(), theta.sin()));
        (mid, theta.to_degrees(), len)
    };

    if extent > rule.gripper_max_width {
        return Err(DatasetError::Ungraspable {
            class: target.element_class,
            extent,
            max_width: rule.gripper_max_width,
        });
    }
    let width = (extent * WIDTH_MARGIN).min(rule.gripper_max_width);
    let grasp = GraspRectangle::new(center.x, center.y, theta_deg, width, rule.grasp_height)?;
    Ok((idx, grasp))
}

/// Draws an approach aimed at a uniformly chosen element.
///
/// The planar point is jittered around the element centroid, or placed on
/// the outer side of the band for elements whose centroid lies outside
/// their footprint. Draws are repeated until the derivation rule selects
/// the intended element.
pub fn sample_approach<R: Rng + ?Sized>(
    elements: &[ElementInstance],
    z_range: (f64, f64),
    rng: &mut R,
) -> Option<ApproachPose> {
    const JITTER_PX: f64 = 2.5;
    const TRIES: usize = 16;
    let nonempty: Vec<usize> = (0..elements.len()).filter(|&i| !elements[i].mask.is_empty()).collect();
    if nonempty.is_empty() {
        return None;
    }
    let chosen = nonempty[rng.random_range(0..nonempty.len())];
    let mask = &elements[chosen].mask;
    let centroid = mask.centroid()?;
    let object_center = elements
        .iter()
        .filter_map(|e| e.mask.centroid().map(|c| (c, e.mask.count() as f64)))
        .fold((0.0, 0.0, 0.0), |(x, y, n), (c, w)| (x + c.x * w, y + c.y * w, n + w));
    let object_center = Point2::new(object_center.0 / object_center.2, object_center.1 / object_center.2);

    let base = if mask.contains_point(centroid) {
        centroid
    } else {
        // mid-band point on the side facing away from the object
        let (dx, dy) = (centroid.x - object_center.x, centroid.y - object_center.y);
        let n = dx.hypot(dy);
        let dir = if n > 1e-9 { (dx / n, dy / n) } else { (1.0, 0.0) };
        let out = (1..400)
            .map(|k| Point2::new(centroid.x + dir.0 * k as f64 * 0.25, centroid.y + dir.1 * k as f64 * 0.25))
            .skip_while(|p| !mask.contains_point(*p));
        let band: Vec<Point2> = out.take_while(|p| mask.contains_point(*p)).collect();
        if band.is_empty() {
            centroid
        } else {
            band[band.len() / 2]
        }
    };

    let noise = Normal::new(0.0, JITTER_PX).expect("valid std");
    let (zlo, zhi) = z_range;
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    for attempt in 0..=TRIES {
        let (x, y) = if attempt < TRIES {
            (base.x + noise.sample(rng), base.y + noise.sample(rng))
        } else {
            (base.x, base.y)
        };
        let z = if zhi > zlo { rng.random_range(zlo..zhi) } else { zlo };
        let yaw = rng.random_range(0.0..360.0);
        let pose = ApproachPose::new(x.clamp(0.0, w), y.clamp(0.0, h), z, yaw);
        if target_element(elements, &pose) == Some(chosen) {
            return Some(pose);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ElementClass;
    use crate::dataset::render::{place, render_placed, Placement};
    use crate::dataset::{find_template, ObjectTemplate};
    use crate::geometry::{angle_diff, grasp_success, rasterize_rect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at_center(t: &ObjectTemplate, orientation_deg: f64) -> Vec<ElementInstance> {
        let p = Placement {
            center: Point2::new(112.0, 112.0),
            orientation_deg,
            scale: 1.0,
        };
        render_placed(&place(t, &p), [180, 80, 60], 224).unwrap().1
    }

    fn oracle_principal_angle(mask: &BinaryMask) -> f64 {
        // brute-force search for the direction of largest spread
        let c = mask.centroid().unwrap();
        let spread = |deg: f64| {
            let (s, co) = deg.to_radians().sin_cos();
            mask.iter_set()
                .map(|(x, y)| {
                    let t = (x as f64 + 0.5 - c.x) * co + (y as f64 + 0.5 - c.y) * s;
                    t * t
                })
                .sum::<f64>()
        };
        (0..1800)
            .map(|k| k as f64 * 0.1)
            .max_by(|a, b| spread(*a).total_cmp(&spread(*b)))
            .unwrap()
    }

    #[test]
    fn stick_at_thirty_degrees_is_grasped_at_one_twenty() {
        let stick = ObjectTemplate {
            name: "stick".into(),
            elements: vec![crate::dataset::ElementSpec {
                class: ElementClass::Stick,
                offset: (0.0, 0.0),
                angle_deg: 30.0,
                shape: crate::dataset::ElementShape::Rod {
                    length: 80.0,
                    diameter: 10.0,
                },
            }],
        };
        let els = at_center(&stick, 0.0);
        let approach = ApproachPose::new(112.0, 112.0, 48.0, 0.0);
        let (i, g) = derive_grasp_for_approach(&els, &approach, &GraspRule::default()).unwrap();
        assert_eq!(i, 0);
        let oracle = oracle_principal_angle(&els[0].mask) + 90.0;
        assert!(angle_diff(g.theta_deg, oracle) < 0.2, "{} vs {oracle}", g.theta_deg);
        assert!(angle_diff(g.theta_deg, 120.0) < 1.0, "{}", g.theta_deg);
        // jaw opening spans the rod's diameter with margin
        assert!(g.width_px > 10.0 && g.width_px < 16.0, "{}", g.width_px);
    }

    #[test]
    fn centred_sphere_gets_angle_zero() {
        let els = at_center(&find_template("ball").unwrap(), 0.0);
        let approach = ApproachPose::new(100.0, 120.0, 48.0, 77.0);
        let (_, g) = derive_grasp_for_approach(&els, &approach, &GraspRule::default()).unwrap();
        assert_eq!(g.theta_deg, 0.0);
        assert!(g.center().distance(Point2::new(112.0, 112.0)) < 1e-9);
    }

    #[test]
    fn mug_handle_approach_grasps_inside_the_ring() {
        let els = at_center(&find_template("mug").unwrap(), 0.0);
        let ring = &els[1];
        assert_eq!(ring.element_class, ElementClass::Ring);
        let c = ring.mask.centroid().unwrap();
        let approach = ApproachPose::new(c.x, c.y + 12.0, 50.0, 0.0);
        let (i, g) = derive_grasp_for_approach(&els, &approach, &GraspRule::default()).unwrap();
        assert_eq!(i, 1);
        let (x0, y0, x1, y1) = ring.mask.bounding_box().unwrap();
        assert!(g.cx >= x0 as f64 && g.cx <= x1 as f64 + 1.0);
        assert!(g.cy >= y0 as f64 && g.cy <= y1 as f64 + 1.0);
        assert!(ring.mask.contains_point(g.center()));
        // radial closing direction across a vertical band
        assert!(angle_diff(g.theta_deg, 90.0) < 5.0, "{}", g.theta_deg);
    }

    #[test]
    fn oversized_element_is_ungraspable() {
        let els = at_center(&find_template("brick").unwrap(), 0.0);
        let rule = GraspRule {
            gripper_max_width: 20.0,
            grasp_height: 30.0,
        };
        let approach = ApproachPose::new(112.0, 112.0, 48.0, 0.0);
        assert!(matches!(
            derive_grasp_for_approach(&els, &approach, &rule),
            Err(DatasetError::Ungraspable { .. })
        ));
    }

    #[test]
    fn sampled_approaches_yield_self_consistent_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for name in crate::dataset::template_names() {
            let t = find_template(name).unwrap();
            for o in [0.0, 37.0, 145.0] {
                let els = at_center(&t, o);
                for _ in 0..4 {
                    let a = sample_approach(&els, (42.0, 56.0), &mut rng).unwrap();
                    let (i, g) = derive_grasp_for_approach(&els, &a, &GraspRule::default()).unwrap();
                    assert!(els[i].mask.contains_point(g.center()), "{name} {o}");
                    assert!(grasp_success(&g, &g, 0.25, 30.0));
                    assert!(!rasterize_rect(&g, 224, 224).is_empty());
                }
            }
        }
    }

    #[test]
    fn equidistant_tie_prefers_smaller_area() {
        let big = BinaryMask::from_fn(224, 224, |x, y| (40..80).contains(&x) && (40..80).contains(&y));
        let small = BinaryMask::from_fn(224, 224, |x, y| (140..160).contains(&x) && (50..70).contains(&y));
        let els = vec![
            ElementInstance {
                element_class: ElementClass::Cuboid,
                mask: big,
                confidence: 1.0,
            },
            ElementInstance {
                element_class: ElementClass::Cuboid,
                mask: small,
                confidence: 1.0,
            },
        ];
        let a = ApproachPose::new(105.0, 60.0, 48.0, 0.0);
        assert_eq!(target_element(&els, &a), Some(1));
    }
}
