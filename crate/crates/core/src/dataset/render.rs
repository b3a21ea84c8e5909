//! Procedural rendering of element-composed objects.
//!
//! The top view is an orthographic raster of the element footprints with a
//! per-class shading pattern. The approach view re-projects that raster as a
//! height field through a fixed 45 degree oblique camera and overlays a
//! two-finger gripper glyph at the approach pose.

use super::{
    ApproachPose, DatasetError, ElementClass, ElementInstance, ElementShape, ObjectTemplate,
    IMAGE_SIZE,
};
use crate::geometry::{BinaryMask, Point2};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

pub const TABLE_RGB: [u8; 3] = [196, 190, 178];
/// Fill of the oblique view outside the projected table.
pub const BACKDROP_RGB: [u8; 3] = [92, 96, 104];
/// Exact fill colour of the gripper glyph.
pub const GRIPPER_RGB: [u8; 3] = [250, 250, 250];
const GRIPPER_OUTLINE_RGB: [u8; 3] = [52, 52, 58];

/// Pose of an object template in the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub center: Point2,
    pub orientation_deg: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub template: ObjectTemplate,
    pub color: [u8; 3],
    pub scale_range: (f64, f64),
    pub orientation_range_deg: (f64, f64),
    /// Minimum clearance between the object's bounding circle and the border.
    pub margin: f64,
    /// Overrides the random placement when set.
    pub placement: Option<Placement>,
    pub seed: u64,
    pub image_size: u32,
}

impl SceneSpec {
    pub fn new(template: ObjectTemplate, color: [u8; 3], seed: u64) -> Self {
        Self {
            template,
            color,
            scale_range: (0.9, 1.1),
            orientation_range_deg: (0.0, 360.0),
            margin: 4.0,
            placement: None,
            seed,
            image_size: IMAGE_SIZE,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let n = self.template.elements.len();
        if !(1..=3).contains(&n) {
            return Err(DatasetError::InvalidConfig(format!(
                "template `{}` has {n} elements, expected 1 to 3",
                self.template.name
            )));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(DatasetError::InvalidConfig("bad scale range".into()));
        }
        Ok(())
    }

    fn sample_placement(&self, rng: &mut impl Rng) -> Placement {
        let (slo, shi) = self.scale_range;
        let scale = if shi > slo { rng.random_range(slo..shi) } else { slo };
        let (olo, ohi) = self.orientation_range_deg;
        let orientation_deg = if ohi > olo { rng.random_range(olo..ohi) } else { olo };
        let radius = self
            .template
            .elements
            .iter()
            .map(|e| e.offset.0.hypot(e.offset.1) + e.shape.bounding_radius())
            .fold(0.0, f64::max)
            * scale;
        let size = self.image_size as f64;
        let lo = radius + self.margin;
        let hi = size - radius - self.margin;
        let coord = |rng: &mut dyn rand::RngCore| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                size / 2.0
            }
        };
        let center = Point2::new(coord(rng), coord(rng));
        Placement {
            center,
            orientation_deg,
            scale,
        }
    }
}

/// An element in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedElement {
    pub class: ElementClass,
    pub center: Point2,
    pub angle_deg: f64,
    pub shape: ElementShape,
}

impl PlacedElement {
    /// Coordinates of `p` along and across the element's axis.
    fn local(&self, p: Point2) -> (f64, f64) {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (a, b) = self.local(p);
        match self.shape {
            ElementShape::Block { length, breadth } => a.abs() <= length / 2.0 && b.abs() <= breadth / 2.0,
            ElementShape::Rod { length, diameter } => a.abs() <= length / 2.0 && b.abs() <= diameter / 2.0,
            ElementShape::Disc { radius } => a.hypot(b) <= radius,
            ElementShape::Annulus { outer, inner } => {
                let d = a.hypot(b);
                d <= outer && d >= inner
            }
        }
    }

    /// Brightness factor and specular weight at a point inside the element.
    fn shade(&self, p: Point2) -> (f64, f64) {
        let (a, b) = self.local(p);
        let dome = |t: f64| (1.0 - t * t).max(0.0).sqrt();
        match (self.class, self.shape) {
            (_, ElementShape::Block { length, breadth }) => {
                let edge = (length / 2.0 - a.abs()).min(breadth / 2.0 - b.abs());
                if edge < 2.5 {
                    (0.55, 0.0)
                } else {
                    (0.78 + 0.1 * a / length, 0.0)
                }
            }
            (ElementClass::Stick, ElementShape::Rod { diameter, .. }) => {
                (0.3 + 0.5 * dome(b / (diameter / 2.0)), 0.0)
            }
            (_, ElementShape::Rod { length, diameter }) => {
                if length / 2.0 - a.abs() < 2.0 {
                    (0.5, 0.0)
                } else {
                    (0.35 + 0.6 * dome(b / (diameter / 2.0)), 0.0)
                }
            }
            (_, ElementShape::Disc { radius }) => {
                let d = a.hypot(b) / radius;
                let hx = a + 0.35 * radius;
                let hy = b + 0.35 * radius;
                let spec = 0.5 * (-(hx * hx + hy * hy) / (0.0625 * radius * radius)).exp();
                (0.3 + 0.7 * dome(d), spec)
            }
            (_, ElementShape::Annulus { outer, inner }) => {
                let mid = 0.5 * (outer + inner);
                let half = 0.5 * (outer - inner);
                (0.35 + 0.6 * dome((a.hypot(b) - mid) / half), 0.0)
            }
        }
    }

    pub fn mask(&self, width: u32, height: u32) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| {
            self.contains(Point2::new(x as f64 + 0.5, y as f64 + 0.5))
        })
    }
}

pub fn place(template: &ObjectTemplate, placement: &Placement) -> Vec<PlacedElement> {
    template
        .elements
        .iter()
        .map(|e| {
            let off = Point2::new(
                placement.center.x + e.offset.0 * placement.scale,
                placement.center.y + e.offset.1 * placement.scale,
            );
            PlacedElement {
                class: e.class,
                center: off.rotate_about(placement.center, placement.orientation_deg),
                angle_deg: e.angle_deg + placement.orientation_deg,
                shape: e.shape.scaled(placement.scale),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RenderedObject {
    pub image: RgbImage,
    /// Amodal element masks in template order, confidence 1.
    pub elements: Vec<ElementInstance>,
    pub placed: Vec<PlacedElement>,
    pub placement: Placement,
}

/// Renders the top view of a scene. Deterministic in `spec.seed`.
pub fn render_object(spec: &SceneSpec) -> Result<RenderedObject, DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let placement = match spec.placement {
        Some(p) => p,
        None => spec.sample_placement(&mut rng),
    };
    let placed = place(&spec.template, &placement);
    render_placed(&placed, spec.color, spec.image_size).map(|(image, elements)| RenderedObject {
        image,
        elements,
        placed,
        placement,
    })
}

/// Rasterises already placed elements; fails if one falls entirely outside.
pub fn render_placed(
    placed: &[PlacedElement],
    color: [u8; 3],
    size: u32,
) -> Result<(RgbImage, Vec<ElementInstance>), DatasetError> {
    let mut image = RgbImage::from_pixel(size, size, Rgb(TABLE_RGB));
    let mut elements = Vec::with_capacity(placed.len());
    for (k, el) in placed.iter().enumerate() {
        let mask = el.mask(size, size);
        if mask.is_empty() {
            return Err(DatasetError::RejectScene(format!(
                "element {k} ({}) lies outside the frame",
                el.class
            )));
        }
        for (x, y) in mask.iter_set() {
            let (f, spec) = el.shade(Point2::new(x as f64 + 0.5, y as f64 + 0.5));
            let px = color.map(|c| {
                let base = c as f64 * f;
                (base + spec * (235.0 - base).max(0.0)).round().clamp(0.0, 255.0) as u8
            });
            image.put_pixel(x, y, Rgb(px));
        }
        elements.push(ElementInstance {
            element_class: el.class,
            mask,
            confidence: 1.0,
        });
    }
    Ok((image, elements))
}

/// Oblique projection of a table point at height `z` into the approach view.
pub fn project(x: f64, y: f64, z: f64, image_height: u32) -> Point2 {
    let cy = image_height as f64 / 2.0;
    Point2::new(x, cy + (y - cy) * FRAC_1_SQRT_2 - z * FRAC_1_SQRT_2)
}

const PALM_HALF_LEN: f64 = 25.0;
const PALM_HALF_THICK: f64 = 4.0;
const FINGER_OFFSET: f64 = 21.0;
const FINGER_HALF_THICK: f64 = 4.0;
const FINGER_HALF_LEN: f64 = 11.0;

fn glyph_contains(a: f64, b: f64, grow: f64) -> bool {
    let palm = a.abs() <= PALM_HALF_LEN + grow && b.abs() <= PALM_HALF_THICK + grow;
    let finger = (a.abs() - FINGER_OFFSET).abs() <= FINGER_HALF_THICK + grow
        && b.abs() <= FINGER_HALF_LEN + grow;
    palm || finger
}

fn glyph_local(approach: &ApproachPose, p: Point2, height: u32) -> (f64, f64) {
    let c = project(approach.x, approach.y, approach.z, height);
    let (s, co) = approach.yaw_deg.to_radians().sin_cos();
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    (dx * co + dy * s, -dx * s + dy * co)
}

/// Pixels covered by the gripper glyph (fill only, no outline).
pub fn gripper_glyph_mask(approach: &ApproachPose, width: u32, height: u32) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let (a, b) = glyph_local(approach, Point2::new(x as f64 + 0.5, y as f64 + 0.5), height);
        glyph_contains(a, b, 0.0)
    })
}

/// Renders the approach view from the top view and the element masks.
///
/// Each top-view pixel is extruded to the render height of the tallest
/// element covering it and splatted through [`project`] with a depth test;
/// sides are drawn darker than tops. A soft shadow marks the approach point
/// on the table and the gripper glyph is drawn on top.
pub fn render_approach(
    object_image: &RgbImage,
    elements: &[ElementInstance],
    approach: &ApproachPose,
) -> RgbImage {
    let (w, h) = (object_image.width(), object_image.height());
    let mut heights = vec![0.0f64; (w * h) as usize];
    for el in elements {
        let z = el.element_class.render_height();
        for (x, y) in el.mask.iter_set() {
            let i = (y * w + x) as usize;
            heights[i] = heights[i].max(z);
        }
    }

    let mut out = RgbImage::from_pixel(w, h, Rgb(BACKDROP_RGB));
    let mut depth = vec![f64::NEG_INFINITY; (w * h) as usize];
    const STEP: f64 = 0.7;
    for y in 0..h {
        for x in 0..w {
            let top = object_image.get_pixel(x, y).0;
            let side = top.map(|c| (c as f64 * 0.55).round() as u8);
            let hz = heights[(y * w + x) as usize];
            let layers = (hz / STEP).ceil() as usize;
            for l in 0..=layers {
                let z = (l as f64 * STEP).min(hz);
                let p = project(x as f64 + 0.5, y as f64 + 0.5, z, h);
                if p.y < 0.0 || p.y >= h as f64 {
                    continue;
                }
                let (px, py) = (x, p.y.floor() as u32);
                let d = (y as f64 + 0.5 + z) * FRAC_1_SQRT_2;
                let i = (py * w + px) as usize;
                if d > depth[i] {
                    depth[i] = d;
                    out.put_pixel(px, py, Rgb(if l == layers { top } else { side }));
                }
            }
        }
    }

    // shadow under the gripper
    let s = project(approach.x, approach.y, 0.0, h);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let dx = (x as f64 + 0.5 - s.x) / 18.0;
        let dy = (y as f64 + 0.5 - s.y) / 12.0;
        if dx * dx + dy * dy <= 1.0 {
            px.0 = px.0.map(|c| (c as f64 * 0.7).round() as u8);
        }
    }

    for (x, y, px) in out.enumerate_pixels_mut() {
        let (a, b) = glyph_local(approach, Point2::new(x as f64 + 0.5, y as f64 + 0.5), h);
        if glyph_contains(a, b, 0.0) {
            *px = Rgb(GRIPPER_RGB);
        } else if glyph_contains(a, b, 1.25) {
            *px = Rgb(GRIPPER_OUTLINE_RGB);
        }
    }
    out
}
