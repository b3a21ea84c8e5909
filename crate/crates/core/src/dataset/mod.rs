//! Dataset schema, procedural scene synthesis and the on-disk format.
//!
//! A sample pairs a top-view object image with an oblique view of the
//! gripper's approach, the amodal masks of the object's elements and the
//! single grasp that the approach leads to.

mod generate;
mod grasp_rule;
mod io;
mod render;
mod templates;
mod validate;

pub use generate::{
    dataset_checksum, generate_dataset, generate_samples, sample_seed, write_dataset,
    DatasetManifest, GenerateConfig, GeneratedSample, MANIFEST_FILE, SPLIT_NOVEL, SPLIT_TRAIN,
    SPLIT_VALIDATION,
};
pub use grasp_rule::{derive_grasp_for_approach, sample_approach, GraspRule};
pub use io::{
    list_sample_dirs, list_split_dirs, load_split, mask_file, read_annotation, read_sample, write_sample,
    Annotation, ANNOTATION_FILE, APPROACH_FILE, OBJECT_FILE, RUNS_DIR,
};
pub use render::{
    gripper_glyph_mask, place, project, render_approach, render_object, render_placed, PlacedElement, Placement,
    RenderedObject, SceneSpec, BACKDROP_RGB, GRIPPER_RGB, TABLE_RGB,
};
pub use templates::{
    find_template, template_names, ElementShape, ElementSpec, ObjectTemplate, NOVEL_TEMPLATES,
    TRAIN_TEMPLATES,
};
pub use validate::{validate_dataset, validate_sample, Violation};

use crate::geometry::{normalize_angle_360, BinaryMask, GeometryError, GraspRectangle};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Side length of every dataset image.
pub const IMAGE_SIZE: u32 = 224;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("schema violation in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("dimension mismatch in {path}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("image codec error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("scene rejected: {0}")]
    RejectScene(String),
    #[error("element {class} is ungraspable: extent {extent:.1}px exceeds gripper width {max_width:.1}px")]
    Ungraspable {
        class: ElementClass,
        extent: f64,
        max_width: f64,
    },
    #[error("unknown object template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Primitive graspable element kinds. Declaration order is name order,
/// which is the tie-break order wherever classes are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementClass {
    Cuboid,
    Cylinder,
    Ring,
    Sphere,
    Stick,
}

impl ElementClass {
    pub const ALL: [ElementClass; 5] = [
        ElementClass::Cuboid,
        ElementClass::Cylinder,
        ElementClass::Ring,
        ElementClass::Sphere,
        ElementClass::Stick,
    ];

    /// Row order of the decomposition tables.
    pub const TABLE_ORDER: [ElementClass; 5] = [
        ElementClass::Cuboid,
        ElementClass::Sphere,
        ElementClass::Cylinder,
        ElementClass::Ring,
        ElementClass::Stick,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementClass::Cuboid => "cuboid",
            ElementClass::Cylinder => "cylinder",
            ElementClass::Ring => "ring",
            ElementClass::Sphere => "sphere",
            ElementClass::Stick => "stick",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Extrusion height used by the oblique renderer, in pixels.
    pub fn render_height(self) -> f64 {
        match self {
            ElementClass::Cuboid => 28.0,
            ElementClass::Cylinder => 30.0,
            ElementClass::Ring => 8.0,
            ElementClass::Sphere => 36.0,
            ElementClass::Stick => 8.0,
        }
    }
}

impl std::fmt::Display for ElementClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One decomposed part.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementInstance {
    pub element_class: ElementClass,
    pub mask: BinaryMask,
    /// 1.0 for ground truth.
    pub confidence: f64,
}

/// Gripper pose at the moment the approach image is taken: planar
/// position in pixels, height above the table and yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw_deg: f64,
}

impl ApproachPose {
    pub fn new(x: f64, y: f64, z: f64, yaw_deg: f64) -> Self {
        Self {
            x,
            y,
            z,
            yaw_deg: normalize_angle_360(yaw_deg),
        }
    }

    pub fn position(&self) -> crate::geometry::Point2 {
        crate::geometry::Point2::new(self.x, self.y)
    }
}

/// Whether a sample's object template was available for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeenSplit {
    #[serde(rename = "train-object")]
    TrainObject,
    #[serde(rename = "novel-object")]
    NovelObject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub object_name: String,
    /// Top view, recorded before the approach; no gripper visible.
    pub object_image: RgbImage,
    /// Oblique view with the gripper at the approach pose.
    pub approach_image: RgbImage,
    pub elements: Vec<ElementInstance>,
    pub grasp: GraspRectangle,
    pub approach: ApproachPose,
    pub seen_split: SeenSplit,
    /// Augmentations applied to produce this sample, outermost last.
    pub transforms: Vec<String>,
}

impl Sample {
    pub fn width(&self) -> u32 {
        self.object_image.width()
    }

    pub fn height(&self) -> u32 {
        self.object_image.height()
    }

    pub fn annotation(&self) -> Annotation {
        Annotation::from_sample(self)
    }
}
