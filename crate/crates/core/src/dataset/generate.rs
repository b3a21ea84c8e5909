//! Seeded dataset synthesis.

use super::io::write_sample;
use super::render::{render_approach, render_object, SceneSpec};
use super::{
    derive_grasp_for_approach, find_template, sample_approach, DatasetError, GraspRule, Sample,
    SeenSplit, IMAGE_SIZE, NOVEL_TEMPLATES, TRAIN_TEMPLATES,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const SPLIT_TRAIN: &str = "train";
pub const SPLIT_VALIDATION: &str = "validation";
pub const SPLIT_NOVEL: &str = "novel";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Templates for the train and validation splits, assigned round-robin.
    pub templates: Vec<String>,
    /// Templates for the novel split; never used for training.
    pub novel_templates: Vec<String>,
    /// Samples shared by train and validation.
    pub count: usize,
    pub novel_count: usize,
    pub seed: u64,
    pub colors: Vec<[u8; 3]>,
    pub validation_fraction: f64,
    pub gripper_max_width: f64,
    pub grasp_height: f64,
    pub scale_range: (f64, f64),
    pub z_range: (f64, f64),
    pub image_size: u32,
    /// Re-draws per sample before a rejected scene becomes an error.
    pub max_attempts: u32,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            templates: TRAIN_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            novel_templates: NOVEL_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            count: 1180,
            novel_count: 200,
            seed: 0,
            colors: vec![
                [200, 60, 50],
                [60, 120, 200],
                [70, 170, 90],
                [220, 180, 60],
                [150, 80, 170],
                [90, 90, 90],
                [230, 130, 60],
                [40, 160, 170],
            ],
            validation_fraction: 0.2,
            gripper_max_width: 80.0,
            grasp_height: 30.0,
            scale_range: (0.9, 1.1),
            z_range: (42.0, 56.0),
            image_size: IMAGE_SIZE,
            max_attempts: 16,
        }
    }
}

impl GenerateConfig {
    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        toml::from_str(text).map_err(|e| DatasetError::InvalidConfig(e.to_string()))
    }

    pub fn rule(&self) -> GraspRule {
        GraspRule {
            gripper_max_width: self.gripper_max_width,
            grasp_height: self.grasp_height,
        }
    }

    pub fn validation_count(&self) -> usize {
        (self.count as f64 * self.validation_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidConfig(m.to_string()));
        for name in self.templates.iter().chain(&self.novel_templates) {
            if find_template(name).is_none() {
                return Err(DatasetError::UnknownTemplate(name.clone()));
            }
        }
        if self.count > 0 && self.templates.is_empty() {
            return bad("no training templates");
        }
        if self.novel_count > 0 && self.novel_templates.is_empty() {
            return bad("novel_count > 0 but no novel templates");
        }
        if let Some(t) = self.novel_templates.iter().find(|t| self.templates.contains(t)) {
            return Err(DatasetError::InvalidConfig(format!(
                "template `{t}` is listed as both training and novel"
            )));
        }
        if self.colors.is_empty() {
            return bad("colour list is empty");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if !(self.gripper_max_width > 0.0 && self.grasp_height > 0.0) {
            return bad("gripper_max_width and grasp_height must be positive");
        }
        let (slo, shi) = self.scale_range;
        if !(slo > 0.0 && shi >= slo) {
            return bad("scale_range must be positive and ordered");
        }
        let (zlo, zhi) = self.z_range;
        if !(zlo >= 0.0 && zhi >= zlo) {
            return bad("z_range must be non-negative and ordered");
        }
        if self.image_size < 32 {
            return bad("image_size must be at least 32");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }
}

/// Deterministic per-sample seed; `stream` separates the train and novel pools.
pub fn sample_seed(seed: u64, stream: u64, index: u64, attempt: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    [stream, index, attempt].iter().fold(mix(seed), |h, v| mix(h ^ mix(*v)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub split: &'static str,
    pub sample: Sample,
}

fn make_sample(
    cfg: &GenerateConfig,
    template_name: &str,
    id: String,
    seen_split: SeenSplit,
    stream: u64,
    index: usize,
) -> Result<Sample, DatasetError> {
    let template =
        find_template(template_name).ok_or_else(|| DatasetError::UnknownTemplate(template_name.into()))?;
    let rule = cfg.rule();
    let mut last_err = None;
    for attempt in 0..cfg.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, stream, index as u64, attempt as u64));
        let color = cfg.colors[rng.random_range(0..cfg.colors.len())];
        let mut spec = SceneSpec::new(template.clone(), color, rng.random());
        spec.scale_range = cfg.scale_range;
        spec.image_size = cfg.image_size;
        let scene = match render_object(&spec) {
            Ok(s) => s,
            Err(e @ DatasetError::RejectScene(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some(approach) = sample_approach(&scene.elements, cfg.z_range, &mut rng) else {
            last_err = Some(DatasetError::RejectScene("no valid approach".into()));
            continue;
        };
        let grasp = match derive_grasp_for_approach(&scene.elements, &approach, &rule) {
            Ok((_, g)) => g,
            Err(e @ DatasetError::Ungraspable { .. }) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let approach_image = render_approach(&scene.image, &scene.elements, &approach);
        return Ok(Sample {
            id,
            object_name: template.name.clone(),
            object_image: scene.image,
            approach_image,
            elements: scene.elements,
            grasp,
            approach,
            seen_split,
            transforms: Vec::new(),
        });
    }
    Err(last_err.unwrap_or_else(|| DatasetError::RejectScene("no attempts".into())))
}

/// Sample indices assigned to validation.
fn validation_indices(cfg: &GenerateConfig) -> Vec<bool> {
    let mut order: Vec<usize> = (0..cfg.count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, u64::MAX, 0, 0));
    order.shuffle(&mut rng);
    let mut is_val = vec![false; cfg.count];
    for &i in &order[..cfg.validation_count()] {
        is_val[i] = true;
    }
    is_val
}

/// Generates every sample in memory: train and validation by index, then novel.
pub fn generate_samples(cfg: &GenerateConfig) -> Result<Vec<GeneratedSample>, DatasetError> {
    cfg.validate()?;
    let is_val = validation_indices(cfg);
    let seen = (0..cfg.count).into_par_iter().map(|i| {
        let name = &cfg.templates[i % cfg.templates.len()];
        let split = if is_val[i] { SPLIT_VALIDATION } else { SPLIT_TRAIN };
        make_sample(cfg, name, format!("s{i:05}"), SeenSplit::TrainObject, 0, i)
            .map(|sample| GeneratedSample { split, sample })
    });
    let novel = (0..cfg.novel_count).into_par_iter().map(|i| {
        let name = &cfg.novel_templates[i % cfg.novel_templates.len()];
        make_sample(cfg, name, format!("n{i:05}"), SeenSplit::NovelObject, 1, i)
            .map(|sample| GeneratedSample { split: SPLIT_NOVEL, sample })
    });
    seen.chain(novel).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: GenerateConfig,
    pub split_counts: BTreeMap<String, usize>,
    pub class_histogram: BTreeMap<String, usize>,
    /// SHA-256 over every file except this manifest; see [`dataset_checksum`].
    pub checksum: String,
}

impl DatasetManifest {
    pub fn read(root: &Path) -> Result<Self, DatasetError> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Schema {
            path,
            message: e.to_string(),
        })
    }

    pub fn write(&self, root: &Path) -> Result<(), DatasetError> {
        let path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serialises") + "\n";
        fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))
    }
}

/// Hash of a dataset tree: relative paths in sorted order, each followed by
/// the file length and bytes. The top-level manifest is excluded.
pub fn dataset_checksum(root: &Path) -> Result<String, DatasetError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            DatasetError::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under root");
        if rel == Path::new(MANIFEST_FILE) || rel.starts_with(super::RUNS_DIR) {
            continue;
        }
        let key: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        files.push((key.join("/"), entry.path().to_path_buf()));
    }
    files.sort();
    let mut hasher = Sha256::new();
    for (key, path) in files {
        let bytes = fs::read(&path).map_err(|e| DatasetError::io(&path, e))?;
        hasher.update(key.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Writes samples into `<root>/<split>/<id>/` and a manifest.
pub fn write_dataset(
    root: &Path,
    samples: &[GeneratedSample],
    config: &GenerateConfig,
) -> Result<DatasetManifest, DatasetError> {
    fs::create_dir_all(root).map_err(|e| DatasetError::io(root, e))?;
    samples
        .par_iter()
        .try_for_each(|g| write_sample(&g.sample, &root.join(g.split).join(&g.sample.id)))?;
    let mut split_counts = BTreeMap::new();
    let mut class_histogram = BTreeMap::new();
    for g in samples {
        *split_counts.entry(g.split.to_string()).or_insert(0) += 1;
        for e in &g.sample.elements {
            *class_histogram.entry(e.element_class.name().to_string()).or_insert(0) += 1;
        }
    }
    let manifest = DatasetManifest {
        config: config.clone(),
        split_counts,
        class_histogram,
        checksum: dataset_checksum(root)?,
    };
    manifest.write(root)?;
    Ok(manifest)
}

/// Generates a dataset under `root`, which must be absent or empty.
pub fn generate_dataset(cfg: &GenerateConfig, root: &Path) -> Result<DatasetManifest, DatasetError> {
    if root.exists() {
        let mut it = fs::read_dir(root).map_err(|e| DatasetError::io(root, e))?;
        if it.next().is_some() {
            return Err(DatasetError::InvalidConfig(format!(
                "output directory {} is not empty",
                root.display()
            )));
        }
    }
    let samples = generate_samples(cfg)?;
    write_dataset(root, &samples, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(count: usize, novel: usize, seed: u64) -> GenerateConfig {
        GenerateConfig {
            count,
            novel_count: novel,
            seed,
            ..GenerateConfig::default()
        }
    }

    #[test]
    fn split_sizes_follow_the_fraction() {
        assert_eq!(small(1180, 0, 0).validation_count(), 236);
        let cfg = small(20, 4, 3);
        let s = generate_samples(&cfg).unwrap();
        let count = |name| s.iter().filter(|g| g.split == name).count();
        assert_eq!(count(SPLIT_TRAIN), 16);
        assert_eq!(count(SPLIT_VALIDATION), 4);
        assert_eq!(count(SPLIT_NOVEL), 4);
    }

    #[test]
    fn novel_templates_stay_out_of_train() {
        let s = generate_samples(&small(20, 8, 5)).unwrap();
        for g in &s {
            let is_novel = NOVEL_TEMPLATES.contains(&g.sample.object_name.as_str());
            assert_eq!(is_novel, g.split == SPLIT_NOVEL, "{}", g.sample.id);
            assert_eq!(is_novel, g.sample.seen_split == SeenSplit::NovelObject);
        }
    }

    #[test]
    fn unknown_template_is_an_error() {
        let cfg = GenerateConfig {
            templates: vec!["teapot".into()],
            ..small(4, 0, 0)
        };
        assert!(matches!(generate_samples(&cfg), Err(DatasetError::UnknownTemplate(t)) if t == "teapot"));
        let cfg = GenerateConfig {
            novel_templates: vec!["mug".into()],
            ..small(4, 1, 0)
        };
        assert!(matches!(generate_samples(&cfg), Err(DatasetError::InvalidConfig(_))));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = small(50, 10, 17);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(GenerateConfig::from_toml(&text).unwrap(), cfg);
        let partial = GenerateConfig::from_toml("count = 12\nseed = 4\n").unwrap();
        assert_eq!(partial.count, 12);
        assert_eq!(partial.templates.len(), 10);
        assert!(GenerateConfig::from_toml("colour = 3").is_err());
    }

    #[test]
    fn seeds_differ_across_streams() {
        assert_ne!(sample_seed(1, 0, 0, 0), sample_seed(1, 1, 0, 0));
        assert_ne!(sample_seed(1, 0, 0, 0), sample_seed(1, 0, 1, 0));
        assert_ne!(sample_seed(1, 0, 0, 0), sample_seed(2, 0, 0, 0));
        assert_eq!(sample_seed(7, 1, 2, 3), sample_seed(7, 1, 2, 3));
    }

    #[test]
    fn dataset_tree_is_reproducible() {
        let cfg = small(10, 2, 1);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_dataset(&cfg, a.path()).unwrap();
        let mb = generate_dataset(&cfg, b.path()).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(dataset_checksum(a.path()).unwrap(), ma.checksum);
        assert!(generate_dataset(&cfg, a.path()).is_err());
    }
}
