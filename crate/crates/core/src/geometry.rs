//! Grasp rectangles, binary masks and the metrics defined on them.
//!
//! Coordinate frame: origin at the top-left image corner, x to the right,
//! y down. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` and its center is
//! `(i + 0.5, j + 0.5)`. Angles rotate the x axis toward the y axis, so a
//! rectangle at angle `theta` opens its jaws along `(cos theta, sin theta)`.
//! Polygons are "counterclockwise" when their shoelace area is positive in
//! these coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default Jaccard threshold of the rectangle success criterion.
pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.25;
/// Default angle threshold of the rectangle success criterion, in degrees.
pub const DEFAULT_ANGLE_THRESHOLD_DEG: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grasp rectangle: {0}")]
    InvalidRectangle(String),
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("mask buffer has {got} entries, expected {expected}")]
    BadMaskBuffer { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Rotates `self` about `center` by `angle_deg` in the frame's angle sense.
    pub fn rotate_about(self, center: Point2, angle_deg: f64) -> Point2 {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let dx = self.x - center.x;
        let dy = self.y - center.y;
        Point2::new(center.x + c * dx - s * dy, center.y + s * dx + c * dy)
    }
}

/// Reduces any angle to `[0, 180)`.
pub fn normalize_angle_180(deg: f64) -> f64 {
    let r = deg.rem_euclid(180.0);
    // rem_euclid can round up to exactly 180 for tiny negative inputs
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

/// Reduces any angle to `[0, 360)`.
pub fn normalize_angle_360(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Deserialize)]
struct RawRect {
    cx: f64,
    cy: f64,
    theta_deg: f64,
    width_px: f64,
    height_px: f64,
}

/// Oriented parallel-jaw grasp in pixel space.
///
/// `width_px` is the jaw opening, measured along the rectangle's angle;
/// `height_px` is the length of the fingertip lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRect")]
pub struct GraspRectangle {
    pub cx: f64,
    pub cy: f64,
    pub theta_deg: f64,
    pub width_px: f64,
    pub height_px: f64,
}

impl TryFrom<RawRect> for GraspRectangle {
    type Error = GeometryError;

    fn try_from(r: RawRect) -> Result<Self, Self::Error> {
        GraspRectangle::new(r.cx, r.cy, r.theta_deg, r.width_px, r.height_px)
    }
}

impl GraspRectangle {
    /// Builds a rectangle, folding the angle into `[0, 180)`.
    pub fn new(
        cx: f64,
        cy: f64,
        theta_deg: f64,
        width_px: f64,
        height_px: f64,
    ) -> Result<Self, GeometryError> {
        if !(cx.is_finite() && cy.is_finite() && theta_deg.is_finite()) {
            return Err(GeometryError::InvalidRectangle(
                "non-finite center or angle".into(),
            ));
        }
        if !(width_px.is_finite() && width_px > 0.0) {
            return Err(GeometryError::InvalidRectangle(format!(
                "width must be positive, got {width_px}"
            )));
        }
        if !(height_px.is_finite() && height_px > 0.0) {
            return Err(GeometryError::InvalidRectangle(format!(
                "height must be positive, got {height_px}"
            )));
        }
        Ok(Self {
            cx,
            cy,
            theta_deg: normalize_angle_180(theta_deg),
            width_px,
            height_px,
        })
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.width_px * self.height_px
    }

    /// Unit vectors along the jaw opening and along the fingertip lines.
    fn axes(&self) -> (Point2, Point2) {
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        (Point2::new(c, s), Point2::new(-s, c))
    }

    pub fn corners(&self) -> [Point2; 4] {
        rect_corners(self)
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (u, v) = self.axes();
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let a = dx * u.x + dy * u.y;
        let b = dx * v.x + dy * v.y;
        a.abs() <= self.width_px / 2.0 && b.abs() <= self.height_px / 2.0
    }
}

/// Corners of `r`, counterclockwise, starting at the (-w/2, -h/2) corner.
pub fn rect_corners(r: &GraspRectangle) -> [Point2; 4] {
    let (u, v) = r.axes();
    let hw = r.width_px / 2.0;
    let hh = r.height_px / 2.0;
    let at = |a: f64, b: f64| Point2::new(r.cx + a * u.x + b * v.x, r.cy + a * u.y + b * v.y);
    [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
}

/// Signed shoelace area; positive for counterclockwise polygons.
pub fn signed_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn polygon_area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

fn ccw(poly: &[Point2]) -> Vec<Point2> {
    let mut v = poly.to_vec();
    if signed_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

#[inline]
fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Area of the intersection of two convex polygons.
///
/// `p` is clipped successively against every edge half-plane of `q`
/// (Sutherland-Hodgman). Either winding is accepted. Degenerate inputs
/// yield zero.
pub fn convex_intersection_area(p: &[Point2], q: &[Point2]) -> f64 {
    if p.len() < 3 || q.len() < 3 {
        return 0.0;
    }
    let q = ccw(q);
    if signed_area(&q) <= 0.0 {
        return 0.0;
    }
    let mut subject = ccw(p);
    for i in 0..q.len() {
        if subject.is_empty() {
            return 0.0;
        }
        let a = q[i];
        let b = q[(i + 1) % q.len()];
        let input = std::mem::take(&mut subject);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    subject.push(segment_line_intersection(prev, cur, a, b));
                }
                subject.push(cur);
            } else if prev_in {
                subject.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    polygon_area(&subject)
}

fn segment_line_intersection(s: Point2, e: Point2, a: Point2, b: Point2) -> Point2 {
    let ds = cross(a, b, s);
    let de = cross(a, b, e);
    let denom = ds - de;
    if denom.abs() < f64::EPSILON {
        return e;
    }
    let t = ds / denom;
    Point2::new(s.x + t * (e.x - s.x), s.y + t * (e.y - s.y))
}

/// Intersection over union of two grasp rectangles.
pub fn jaccard(g: &GraspRectangle, g_hat: &GraspRectangle) -> f64 {
    let inter = convex_intersection_area(&g.corners(), &g_hat.corners());
    let union = g.area() + g_hat.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Distance between two grasp angles modulo 180, in `[0, 90]`.
pub fn angle_diff(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).abs().rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Rectangle-metric success: angle difference strictly below
/// `angle_threshold_deg` and Jaccard strictly above `jaccard_threshold`.
pub fn grasp_success(
    g: &GraspRectangle,
    g_hat: &GraspRectangle,
    jaccard_threshold: f64,
    angle_threshold_deg: f64,
) -> bool {
    success_criterion(
        jaccard(g, g_hat),
        angle_diff(g.theta_deg, g_hat.theta_deg),
        jaccard_threshold,
        angle_threshold_deg,
    )
}

/// The success predicate on precomputed metrics. Both comparisons are strict.
pub fn success_criterion(
    jaccard: f64,
    angle_diff_deg: f64,
    jaccard_threshold: f64,
    angle_threshold_deg: f64,
) -> bool {
    angle_diff_deg < angle_threshold_deg && jaccard > jaccard_threshold
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, GeometryError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(GeometryError::BadMaskBuffer {
                got: bits.len(),
                expected,
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    /// Whether the pixel containing `p` is set; false outside the raster.
    pub fn contains_point(&self, p: Point2) -> bool {
        if p.x < 0.0 || p.y < 0.0 {
            return false;
        }
        let (x, y) = (p.x.floor() as u64, p.y.floor() as u64);
        x < self.width as u64 && y < self.height as u64 && self.get(x as u32, y as u32)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize, GeometryError> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count())
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), GeometryError> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(GeometryError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ))
        }
    }

    /// Set pixels as `(x, y)` pairs in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Mean of set pixel centers, `None` for an empty mask.
    pub fn centroid(&self) -> Option<Point2> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (x, y) in self.iter_set() {
            n += 1;
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
        }
        (n > 0).then(|| Point2::new(sx / n as f64, sy / n as f64))
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, GeometryError> {
        self.check_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        })
    }

    /// Tight bounding box `(x0, y0, x1, y1)`, inclusive, of the set pixels.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bb: Option<(u32, u32, u32, u32)> = None;
        for (x, y) in self.iter_set() {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bb
    }
}

/// Dice similarity `2|A n B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64, GeometryError> {
    let inter = a.intersection_count(b)?;
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Intersection over union of two masks; two empty masks score 1.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, GeometryError> {
    let inter = a.intersection_count(b)?;
    let union = a.count() + b.count() - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Sets every pixel whose center lies inside `r`.
pub fn rasterize_rect(r: &GraspRectangle, width: u32, height: u32) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    let corners = r.corners();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for c in &corners {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    let clamp_lo = |v: f64, max: u32| (v - 0.5).floor().max(0.0).min(max as f64) as u32;
    let clamp_hi = |v: f64, max: u32| (v + 0.5).ceil().max(0.0).min(max as f64) as u32;
    let (ix0, iy0) = (clamp_lo(x0, width), clamp_lo(y0, height));
    let (ix1, iy1) = (clamp_hi(x1, width), clamp_hi(y1, height));
    for y in iy0..iy1 {
        for x in ix0..ix1 {
            if r.contains(Point2::new(x as f64 + 0.5, y as f64 + 0.5)) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}
