//! Invariant checks over samples and dataset trees.

use super::generate::{MANIFEST_FILE, SPLIT_NOVEL, SPLIT_TRAIN};
use super::io::{list_sample_dirs, list_split_dirs, read_sample};
use super::{Sample, SeenSplit};
use crate::geometry::{grasp_success, DEFAULT_ANGLE_THRESHOLD_DEG, DEFAULT_JACCARD_THRESHOLD};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// One broken invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub sample_id: Option<String>,
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sample_id {
            Some(id) => write!(f, "{id} ({}): {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// Checks the invariants of a single in-memory sample.
pub fn validate_sample(s: &Sample) -> Vec<String> {
    let mut out = Vec::new();
    let (w, h) = s.object_image.dimensions();
    if s.id.is_empty() {
        out.push("empty id".to_string());
    }
    if s.approach_image.dimensions() != (w, h) {
        out.push(format!(
            "approach image is {:?}, object image is {:?}",
            s.approach_image.dimensions(),
            (w, h)
        ));
    }
    if !(1..=3).contains(&s.elements.len()) {
        out.push(format!("{} elements, expected 1 to 3", s.elements.len()));
    }
    for (k, e) in s.elements.iter().enumerate() {
        if e.mask.width() != w || e.mask.height() != h {
            out.push(format!("mask {k} dimensions differ from the image"));
        }
        if e.mask.is_empty() {
            out.push(format!("mask {k} is empty"));
        }
        if !(0.0..=1.0).contains(&e.confidence) {
            out.push(format!("element {k} confidence {} outside [0, 1]", e.confidence));
        }
    }
    let center = s.grasp.center();
    if !s.elements.iter().any(|e| e.mask.contains_point(center)) {
        out.push(format!(
            "grasp center ({:.1}, {:.1}) lies outside every element mask",
            center.x, center.y
        ));
    }
    if !grasp_success(&s.grasp, &s.grasp, DEFAULT_JACCARD_THRESHOLD, DEFAULT_ANGLE_THRESHOLD_DEG) {
        out.push("grasp is not self-consistent".to_string());
    }
    let a = &s.approach;
    if !(a.x >= 0.0 && a.x <= w as f64 && a.y >= 0.0 && a.y <= h as f64) {
        out.push(format!("approach ({:.1}, {:.1}) outside the frame", a.x, a.y));
    }
    if !(a.z >= 0.0 && a.z.is_finite()) {
        out.push(format!("approach height {} is negative", a.z));
    }
    if !(0.0..360.0).contains(&a.yaw_deg) {
        out.push(format!("approach yaw {} outside [0, 360)", a.yaw_deg));
    }
    out
}

/// Validates every sample under `root` and the split contract. Problems are
/// reported, never raised.
pub fn validate_dataset(root: &Path) -> Vec<Violation> {
    let mut out = Vec::new();
    let top = |path: &Path, message: String| Violation {
        sample_id: None,
        path: path.to_path_buf(),
        message,
    };
    let splits = match list_split_dirs(root) {
        Ok(s) => s,
        Err(e) => return vec![top(root, e.to_string())],
    };
    let mut seen_ids: BTreeMap<String, PathBuf> = BTreeMap::new();
    for split_dir in &splits {
        let split = split_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let dirs = match list_sample_dirs(split_dir) {
            Ok(d) => d,
            Err(e) => {
                out.push(top(split_dir, e.to_string()));
                continue;
            }
        };
        for dir in dirs {
            let dir_name = dir.file_name().map(|n| n.to_string_lossy().into_owned());
            let violation = |message: String| Violation {
                sample_id: dir_name.clone(),
                path: dir.clone(),
                message,
            };
            let s = match read_sample(&dir) {
                Ok(s) => s,
                Err(e) => {
                    out.push(violation(e.to_string()));
                    continue;
                }
            };
            if dir_name.as_deref() != Some(s.id.as_str()) {
                out.push(violation(format!("annotation id `{}` differs from directory name", s.id)));
            }
            if let Some(prev) = seen_ids.insert(s.id.clone(), dir.clone()) {
                out.push(violation(format!("id also used by {}", prev.display())));
            }
            match (split.as_str(), s.seen_split) {
                (SPLIT_TRAIN, SeenSplit::NovelObject) => {
                    out.push(violation("novel-object sample in the train split".into()))
                }
                (SPLIT_NOVEL, SeenSplit::TrainObject) => {
                    out.push(violation("train-object sample in the novel split".into()))
                }
                _ => {}
            }
            out.extend(validate_sample(&s).into_iter().map(&violation));
        }
    }
    let manifest = root.join(MANIFEST_FILE);
    if manifest.is_file() {
        match recorded_checksum(&manifest) {
            Ok(recorded) => match super::dataset_checksum(root) {
                Ok(sum) if sum != recorded => out.push(top(
                    &root.join(MANIFEST_FILE),
                    "checksum does not match the files on disk".into(),
                )),
                Ok(_) => {}
                Err(e) => out.push(top(root, e.to_string())),
            },
            Err(message) => out.push(top(&manifest, message)),
        }
    }
    out
}

/// The `checksum` field of any manifest kind.
fn recorded_checksum(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v.get("checksum")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| "manifest has no checksum".to_string())
}
