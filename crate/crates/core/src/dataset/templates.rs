//! Named object templates built from primitive elements.
//!
//! Offsets and sizes are in pixels at the native 224 px frame, in the
//! object's own frame (x along the object's main axis).

use super::ElementClass;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElementShape {
    /// Rectangle footprint; `length` runs along the element angle.
    Block { length: f64, breadth: f64 },
    Disc { radius: f64 },
    /// Rectangle footprint shaded as a lying cylinder.
    Rod { length: f64, diameter: f64 },
    Annulus { outer: f64, inner: f64 },
}

impl ElementShape {
    pub fn scaled(self, s: f64) -> Self {
        match self {
            ElementShape::Block { length, breadth } => ElementShape::Block {
                length: length * s,
                breadth: breadth * s,
            },
            ElementShape::Disc { radius } => ElementShape::Disc { radius: radius * s },
            ElementShape::Rod { length, diameter } => ElementShape::Rod {
                length: length * s,
                diameter: diameter * s,
            },
            ElementShape::Annulus { outer, inner } => ElementShape::Annulus {
                outer: outer * s,
                inner: inner * s,
            },
        }
    }

    /// Radius of a circle that encloses the footprint.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            ElementShape::Block { length, breadth } => 0.5 * length.hypot(breadth),
            ElementShape::Disc { radius } => radius,
            ElementShape::Rod { length, diameter } => 0.5 * length.hypot(diameter),
            ElementShape::Annulus { outer, .. } => outer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementSpec {
    pub class: ElementClass,
    pub offset: (f64, f64),
    pub angle_deg: f64,
    pub shape: ElementShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTemplate {
    pub name: String,
    /// Drawn in order; later elements occlude earlier ones.
    pub elements: Vec<ElementSpec>,
}

const fn el(class: ElementClass, dx: f64, dy: f64, angle_deg: f64, shape: ElementShape) -> ElementSpec {
    ElementSpec {
        class,
        offset: (dx, dy),
        angle_deg,
        shape,
    }
}

const fn block(length: f64, breadth: f64) -> ElementShape {
    ElementShape::Block { length, breadth }
}
const fn disc(radius: f64) -> ElementShape {
    ElementShape::Disc { radius }
}
const fn rod(length: f64, diameter: f64) -> ElementShape {
    ElementShape::Rod { length, diameter }
}
const fn annulus(outer: f64, inner: f64) -> ElementShape {
    ElementShape::Annulus { outer, inner }
}

use ElementClass::{Cuboid, Cylinder, Ring, Sphere, Stick};

/// Templates available for training, in the default order.
pub const TRAIN_TEMPLATES: [&str; 10] = [
    "mug",
    "beer-bottle",
    "cubic-bottle",
    "padlock",
    "ball",
    "dumbbell",
    "hammer",
    "brick",
    "kettlebell",
    "rolling-pin",
];

/// Templates reserved for unseen-object evaluation.
pub const NOVEL_TEMPLATES: [&str; 4] = ["goblet", "banana-stick", "bowl", "drink-bottle"];

fn table(name: &str) -> Option<Vec<ElementSpec>> {
    let els = match name {
        "mug" => vec![
            el(Cylinder, 0.0, 0.0, 0.0, rod(62.0, 46.0)),
            el(Ring, 0.0, 36.0, 0.0, annulus(17.0, 8.0)),
        ],
        "beer-bottle" => vec![
            el(Cylinder, -14.0, 0.0, 0.0, rod(76.0, 38.0)),
            el(Stick, 44.0, 0.0, 0.0, rod(42.0, 12.0)),
        ],
        "cubic-bottle" => vec![
            el(Cuboid, -10.0, 0.0, 0.0, block(58.0, 44.0)),
            el(Cylinder, 29.0, 0.0, 0.0, rod(22.0, 24.0)),
        ],
        "padlock" => vec![
            el(Cuboid, 0.0, 10.0, 0.0, block(50.0, 40.0)),
            el(Ring, 0.0, -21.0, 0.0, annulus(19.0, 10.0)),
        ],
        "ball" => vec![el(Sphere, 0.0, 0.0, 0.0, disc(26.0))],
        "dumbbell" => vec![
            el(Stick, 0.0, 0.0, 0.0, rod(56.0, 12.0)),
            el(Sphere, -40.0, 0.0, 0.0, disc(17.0)),
            el(Sphere, 40.0, 0.0, 0.0, disc(17.0)),
        ],
        "hammer" => vec![
            el(Stick, -12.0, 0.0, 0.0, rod(80.0, 12.0)),
            el(Cuboid, 38.0, 0.0, 90.0, block(56.0, 20.0)),
        ],
        "brick" => vec![el(Cuboid, 0.0, 0.0, 0.0, block(72.0, 38.0))],
        "kettlebell" => vec![
            el(Sphere, 0.0, 8.0, 0.0, disc(27.0)),
            el(Ring, 0.0, -30.0, 0.0, annulus(17.0, 9.0)),
        ],
        "rolling-pin" => vec![
            el(Cylinder, 0.0, 0.0, 0.0, rod(66.0, 32.0)),
            el(Stick, -47.0, 0.0, 0.0, rod(30.0, 12.0)),
            el(Stick, 47.0, 0.0, 0.0, rod(30.0, 12.0)),
        ],
        "goblet" => vec![
            el(Stick, -26.0, 0.0, 0.0, rod(36.0, 12.0)),
            el(Cylinder, 16.0, 0.0, 0.0, rod(48.0, 44.0)),
        ],
        "banana-stick" => vec![
            el(Cylinder, 8.0, 0.0, 0.0, rod(62.0, 24.0)),
            el(Stick, -37.0, 0.0, 0.0, rod(30.0, 12.0)),
        ],
        "bowl" => vec![el(Ring, 0.0, 0.0, 0.0, annulus(34.0, 24.0))],
        "drink-bottle" => vec![
            el(Cylinder, -8.0, 0.0, 0.0, rod(70.0, 36.0)),
            el(Sphere, 38.0, 0.0, 0.0, disc(13.0)),
        ],
        _ => return None,
    };
    Some(els)
}

pub fn find_template(name: &str) -> Option<ObjectTemplate> {
    table(name).map(|elements| ObjectTemplate {
        name: name.to_string(),
        elements,
    })
}

/// Every known template name, training ones first.
pub fn template_names() -> impl Iterator<Item = &'static str> {
    TRAIN_TEMPLATES.iter().chain(NOVEL_TEMPLATES.iter()).copied()
}
