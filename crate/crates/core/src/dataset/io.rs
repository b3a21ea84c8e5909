//! Per-sample directory format.
//!
//! ```text
//! <sample>/object.png       top view, RGB
//! <sample>/approach.png     oblique view, RGB
//! <sample>/mask_<k>.png     8-bit, 0 or 255, one per element
//! <sample>/annotation.json
//! ```

use super::{ApproachPose, DatasetError, ElementClass, ElementInstance, Sample, SeenSplit};
use crate::geometry::{BinaryMask, GraspRectangle};
use image::{GrayImage, Luma, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const OBJECT_FILE: &str = "object.png";
pub const APPROACH_FILE: &str = "approach.png";
pub const ANNOTATION_FILE: &str = "annotation.json";

pub fn mask_file(k: usize) -> String {
    format!("mask_{k}.png")
}

/// The JSON half of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub id: String,
    pub object_name: String,
    /// Class of `mask_<k>.png` at index `k`.
    pub elements: Vec<ElementClass>,
    pub grasp: GraspRectangle,
    pub approach: ApproachPose,
    pub seen_split: SeenSplit,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<String>,
}

impl Annotation {
    pub fn from_sample(s: &Sample) -> Self {
        Self {
            id: s.id.clone(),
            object_name: s.object_name.clone(),
            elements: s.elements.iter().map(|e| e.element_class).collect(),
            grasp: s.grasp,
            approach: s.approach,
            seen_split: s.seen_split,
            transforms: s.transforms.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serialises") + "\n"
    }
}

fn save_png(path: &Path, result: image::ImageResult<()>) -> Result<(), DatasetError> {
    result.map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `sample` into `dir`, creating it if needed.
pub fn write_sample(sample: &Sample, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let p = dir.join(OBJECT_FILE);
    save_png(&p, sample.object_image.save(&p))?;
    let p = dir.join(APPROACH_FILE);
    save_png(&p, sample.approach_image.save(&p))?;
    for (k, e) in sample.elements.iter().enumerate() {
        let m = &e.mask;
        let img = GrayImage::from_fn(m.width(), m.height(), |x, y| Luma([if m.get(x, y) { 255 } else { 0 }]));
        let p = dir.join(mask_file(k));
        save_png(&p, img.save(&p))?;
    }
    let p = dir.join(ANNOTATION_FILE);
    fs::write(&p, sample.annotation().to_json()).map_err(|e| DatasetError::io(&p, e))
}

fn require(path: PathBuf) -> Result<PathBuf, DatasetError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(DatasetError::MissingFile(path))
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage, DatasetError> {
    image::open(path).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rgb(path: PathBuf) -> Result<RgbImage, DatasetError> {
    let path = require(path)?;
    Ok(open_image(&path)?.into_rgb8())
}

pub fn read_annotation(dir: &Path) -> Result<Annotation, DatasetError> {
    let path = require(dir.join(ANNOTATION_FILE))?;
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let mut ann: Annotation = serde_json::from_str(&text).map_err(|e| DatasetError::Schema {
        path: path.clone(),
        message: e.to_string(),
    })?;
    ann.approach = ApproachPose::new(ann.approach.x, ann.approach.y, ann.approach.z, ann.approach.yaw_deg);
    if ann.elements.is_empty() {
        return Err(DatasetError::Schema {
            path,
            message: "no elements listed".into(),
        });
    }
    Ok(ann)
}

/// Reads one sample directory written by [`write_sample`].
pub fn read_sample(dir: &Path) -> Result<Sample, DatasetError> {
    let ann = read_annotation(dir)?;
    let object_image = read_rgb(dir.join(OBJECT_FILE))?;
    let dims = object_image.dimensions();
    let approach_path = dir.join(APPROACH_FILE);
    let approach_image = read_rgb(approach_path.clone())?;
    if approach_image.dimensions() != dims {
        return Err(DatasetError::DimensionMismatch {
            path: approach_path,
            expected: dims,
            found: approach_image.dimensions(),
        });
    }
    let mut elements = Vec::with_capacity(ann.elements.len());
    for (k, &class) in ann.elements.iter().enumerate() {
        let path = require(dir.join(mask_file(k)))?;
        let img = open_image(&path)?.into_luma8();
        if img.dimensions() != dims {
            return Err(DatasetError::DimensionMismatch {
                path,
                expected: dims,
                found: img.dimensions(),
            });
        }
        if let Some(v) = img.pixels().map(|p| p.0[0]).find(|v| *v != 0 && *v != 255) {
            return Err(DatasetError::Schema {
                path,
                message: format!("mask value {v} is neither 0 nor 255"),
            });
        }
        let mask = BinaryMask::from_fn(dims.0, dims.1, |x, y| img.get_pixel(x, y).0[0] == 255);
        elements.push(ElementInstance {
            element_class: class,
            mask,
            confidence: 1.0,
        });
    }
    Ok(Sample {
        id: ann.id,
        object_name: ann.object_name,
        object_image,
        approach_image,
        elements,
        grasp: ann.grasp,
        approach: ann.approach,
        seen_split: ann.seen_split,
        transforms: ann.transforms,
    })
}

/// Subdirectories of `split_dir`, sorted by name.
/// Directory under a dataset root for CLI run manifests; not part of the data.
pub const RUNS_DIR: &str = "runs";

pub fn list_sample_dirs(split_dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let entries = fs::read_dir(split_dir).map_err(|e| DatasetError::io(split_dir, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| DatasetError::io(split_dir, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Split directories of a dataset root; the run-record directory is skipped.
pub fn list_split_dirs(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut dirs = list_sample_dirs(root)?;
    dirs.retain(|d| d.file_name().is_none_or(|n| n != RUNS_DIR));
    Ok(dirs)
}

/// Reads every sample of `<root>/<split>` in name order.
pub fn load_split(root: &Path, split: &str) -> Result<Vec<Sample>, DatasetError> {
    let dirs = list_sample_dirs(&root.join(split))?;
    dirs.par_iter().map(|d| read_sample(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_samples, GenerateConfig};

    fn one_sample() -> Sample {
        let cfg = GenerateConfig {
            count: 2,
            novel_count: 0,
            ..GenerateConfig::default()
        };
        generate_samples(&cfg).unwrap().remove(0).sample
    }

    #[test]
    fn write_then_read_is_identity() {
        let s = one_sample();
        let dir = tempfile::tempdir().unwrap();
        write_sample(&s, dir.path()).unwrap();
        let back = read_sample(dir.path()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn theta_is_normalised_on_read() {
        let s = one_sample();
        let dir = tempfile::tempdir().unwrap();
        write_sample(&s, dir.path()).unwrap();
        let path = dir.path().join(ANNOTATION_FILE);
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["grasp"]["theta_deg"] = serde_json::json!(200.0);
        fs::write(&path, v.to_string()).unwrap();
        let back = read_sample(dir.path()).unwrap();
        assert!((back.grasp.theta_deg - 20.0).abs() < 1e-9);
    }

    #[test]
    fn errors_are_distinct() {
        let s = one_sample();
        let dir = tempfile::tempdir().unwrap();
        write_sample(&s, dir.path()).unwrap();

        let small = GrayImage::new(10, 10);
        small.save(dir.path().join(mask_file(0))).unwrap();
        assert!(matches!(read_sample(dir.path()), Err(DatasetError::DimensionMismatch { .. })));

        fs::remove_file(dir.path().join(OBJECT_FILE)).unwrap();
        assert!(matches!(read_sample(dir.path()), Err(DatasetError::MissingFile(_))));

        fs::write(dir.path().join(ANNOTATION_FILE), "{\"id\": 3}").unwrap();
        assert!(matches!(read_sample(dir.path()), Err(DatasetError::Schema { .. })));
    }
}
