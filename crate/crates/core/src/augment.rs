//! Label-consistent augmentation.
//!
//! Geometric transforms move the top view, the masks, the grasp and the
//! approach pose together and then re-render the approach view from the
//! transformed scene. Photometric transforms touch pixels only.

use crate::dataset::{
    list_sample_dirs, list_split_dirs, read_sample, render_approach, sample_seed, validate_sample, write_sample,
    ApproachPose, DatasetError, ElementInstance, Sample, GRIPPER_RGB, MANIFEST_FILE, SPLIT_TRAIN,
    TABLE_RGB,
};
use crate::geometry::{GraspRectangle, Point2};
use crate::raster::{flip_image, flip_mask, flip_point, image_center, rotate_image, rotate_mask};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub use crate::raster::FlipAxis;

/// Largest rotation magnitude accepted by [`rotate_sample`].
pub const MAX_ROTATION_DEG: f64 = 45.0;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("augmentation discarded: {0}")]
    DiscardAugmentation(String),
    #[error("rotation of {0} degrees exceeds the allowed 45")]
    InvalidAngle(f64),
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub rotation_prob: f64,
    pub rotation_range_deg: (f64, f64),
    pub flip_horizontal_prob: f64,
    pub flip_vertical_prob: f64,
    pub gaussian_prob: f64,
    pub gaussian_std: f64,
    pub iso_prob: f64,
    /// Luminance noise std at full brightness, as a fraction of 255.
    pub iso_strength: f64,
    pub multiplicative_prob: f64,
    pub multiplicative_range: (f64, f64),
    pub brightness_contrast_prob: f64,
    /// Additive shift as a fraction of 255.
    pub brightness_range: (f64, f64),
    pub contrast_range: (f64, f64),
    pub dropout_prob: f64,
    pub dropout_fraction: f64,
    pub gripper_color_shift: bool,
    pub gripper_color_prob: f64,
    pub seed: u64,
    /// Re-draws of a discarded chain before the variant is skipped.
    pub max_retries: u32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation_prob: 0.8,
            rotation_range_deg: (-45.0, 45.0),
            flip_horizontal_prob: 0.5,
            flip_vertical_prob: 0.5,
            gaussian_prob: 0.3,
            gaussian_std: 6.0,
            iso_prob: 0.3,
            iso_strength: 0.04,
            multiplicative_prob: 0.3,
            multiplicative_range: (0.9, 1.1),
            brightness_contrast_prob: 0.5,
            brightness_range: (-0.15, 0.15),
            contrast_range: (0.8, 1.2),
            dropout_prob: 0.2,
            dropout_fraction: 0.02,
            gripper_color_shift: true,
            gripper_color_prob: 0.5,
            seed: 0,
            max_retries: 8,
        }
    }
}

impl AugmentConfig {
    pub fn from_toml(text: &str) -> Result<Self, AugmentError> {
        toml::from_str(text).map_err(|e| AugmentError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let probs = [
            ("rotation_prob", self.rotation_prob),
            ("flip_horizontal_prob", self.flip_horizontal_prob),
            ("flip_vertical_prob", self.flip_vertical_prob),
            ("gaussian_prob", self.gaussian_prob),
            ("iso_prob", self.iso_prob),
            ("multiplicative_prob", self.multiplicative_prob),
            ("brightness_contrast_prob", self.brightness_contrast_prob),
            ("dropout_prob", self.dropout_prob),
            ("gripper_color_prob", self.gripper_color_prob),
            ("dropout_fraction", self.dropout_fraction),
        ];
        if let Some((name, v)) = probs.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(AugmentError::InvalidConfig(format!("{name} = {v} is not in [0, 1]")));
        }
        let ordered = |name: &str, (lo, hi): (f64, f64)| {
            if lo <= hi && lo.is_finite() && hi.is_finite() {
                Ok(())
            } else {
                Err(AugmentError::InvalidConfig(format!("{name} is not an ordered range")))
            }
        };
        ordered("rotation_range_deg", self.rotation_range_deg)?;
        ordered("multiplicative_range", self.multiplicative_range)?;
        ordered("brightness_range", self.brightness_range)?;
        ordered("contrast_range", self.contrast_range)?;
        let (rlo, rhi) = self.rotation_range_deg;
        if rlo < -MAX_ROTATION_DEG || rhi > MAX_ROTATION_DEG {
            return Err(AugmentError::InvalidConfig("rotation range exceeds [-45, 45]".into()));
        }
        if self.gaussian_std < 0.0 || self.iso_strength < 0.0 || self.multiplicative_range.0 < 0.0 {
            return Err(AugmentError::InvalidConfig("noise strengths must be non-negative".into()));
        }
        Ok(())
    }
}

fn rebuild(s: &Sample, object_image: RgbImage, elements: Vec<ElementInstance>, grasp: GraspRectangle, approach: ApproachPose) -> Result<Sample, AugmentError> {
    let (w, h) = (object_image.width() as f64, object_image.height() as f64);
    let inside = |p: Point2| p.x >= 0.0 && p.y >= 0.0 && p.x <= w && p.y <= h;
    if !inside(grasp.center()) {
        return Err(AugmentError::DiscardAugmentation("grasp center left the frame".into()));
    }
    if !inside(approach.position()) {
        return Err(AugmentError::DiscardAugmentation("approach point left the frame".into()));
    }
    let approach_image = render_approach(&object_image, &elements, &approach);
    let out = Sample {
        id: s.id.clone(),
        object_name: s.object_name.clone(),
        object_image,
        approach_image,
        elements,
        grasp,
        approach,
        seen_split: s.seen_split,
        transforms: s.transforms.clone(),
    };
    match validate_sample(&out).into_iter().next() {
        Some(problem) => Err(AugmentError::DiscardAugmentation(problem)),
        None => Ok(out),
    }
}

/// Rotates the scene about the image center by `angle_deg`.
pub fn rotate_sample(s: &Sample, angle_deg: f64) -> Result<Sample, AugmentError> {
    if !(angle_deg.abs() <= MAX_ROTATION_DEG) {
        return Err(AugmentError::InvalidAngle(angle_deg));
    }
    if angle_deg == 0.0 {
        return Ok(s.clone());
    }
    let c = image_center(s.width(), s.height());
    let image = rotate_image(&s.object_image, angle_deg, TABLE_RGB);
    let elements = s
        .elements
        .iter()
        .map(|e| ElementInstance {
            mask: rotate_mask(&e.mask, angle_deg),
            ..e.clone()
        })
        .collect();
    let g = &s.grasp;
    let gc = g.center().rotate_about(c, angle_deg);
    let grasp = GraspRectangle::new(gc.x, gc.y, g.theta_deg + angle_deg, g.width_px, g.height_px)
        .map_err(DatasetError::from)?;
    let ac = s.approach.position().rotate_about(c, angle_deg);
    let approach = ApproachPose::new(ac.x, ac.y, s.approach.z, s.approach.yaw_deg + angle_deg);
    rebuild(s, image, elements, grasp, approach)
}

/// Mirrors the scene. Angles reflect as `180 - theta` for both axes
/// (modulo 180 for the grasp, modulo 360 with the matching sign for yaw).
pub fn flip_sample(s: &Sample, axis: FlipAxis) -> Result<Sample, AugmentError> {
    let (w, h) = (s.width(), s.height());
    let image = flip_image(&s.object_image, axis);
    let elements = s
        .elements
        .iter()
        .map(|e| ElementInstance {
            mask: flip_mask(&e.mask, axis),
            ..e.clone()
        })
        .collect();
    let g = &s.grasp;
    let gc = flip_point(g.center(), axis, w, h);
    let grasp = GraspRectangle::new(gc.x, gc.y, 180.0 - g.theta_deg, g.width_px, g.height_px)
        .map_err(DatasetError::from)?;
    let ac = flip_point(s.approach.position(), axis, w, h);
    let yaw = match axis {
        FlipAxis::Horizontal => 180.0 - s.approach.yaw_deg,
        FlipAxis::Vertical => -s.approach.yaw_deg,
    };
    let approach = ApproachPose::new(ac.x, ac.y, s.approach.z, yaw);
    rebuild(s, image, elements, grasp, approach)
}

/// Pixel-only transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Photometric {
    /// Additive Gaussian noise with std in 8-bit levels.
    Gaussian { std: f64 },
    /// Luminance-dependent Gaussian plus weaker per-channel chroma noise.
    Iso { strength: f64 },
    /// Per-pixel gain drawn uniformly from `[low, high]`.
    Multiplicative { low: f64, high: f64 },
    BrightnessContrast { brightness: f64, contrast: f64 },
    /// Sets each pixel to black with probability `fraction`.
    Dropout { fraction: f64 },
    /// Recolours the gripper glyph in the approach view.
    GripperColor { rgb: [u8; 3] },
}

impl Photometric {
    pub fn label(&self) -> String {
        match self {
            Photometric::Gaussian { std } => format!("gaussian(std={std:.2})"),
            Photometric::Iso { strength } => format!("iso(strength={strength:.3})"),
            Photometric::Multiplicative { low, high } => format!("multiplicative({low:.2},{high:.2})"),
            Photometric::BrightnessContrast { brightness, contrast } => {
                format!("brightness_contrast({brightness:+.3},{contrast:.3})")
            }
            Photometric::Dropout { fraction } => format!("dropout({fraction:.3})"),
            Photometric::GripperColor { rgb } => format!("gripper_color({},{},{})", rgb[0], rgb[1], rgb[2]),
        }
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn apply_pixels(img: &mut RgbImage, kind: &Photometric, rng: &mut impl Rng) {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    match *kind {
        Photometric::Gaussian { std } => {
            for p in img.pixels_mut() {
                for c in p.0.iter_mut() {
                    let n: f64 = unit.sample(rng);
                    *c = clamp_u8(*c as f64 + std * n);
                }
            }
        }
        Photometric::Iso { strength } => {
            for p in img.pixels_mut() {
                let [r, g, b] = p.0.map(f64::from);
                let lum = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
                let l_std = strength * 255.0 * lum.sqrt();
                let l: f64 = unit.sample(rng);
                let l = l * l_std;
                for c in p.0.iter_mut() {
                    let chroma: f64 = unit.sample(rng);
                    *c = clamp_u8(*c as f64 + l + 0.5 * strength * 255.0 * chroma);
                }
            }
        }
        Photometric::Multiplicative { low, high } => {
            for p in img.pixels_mut() {
                let gain = if high > low { rng.random_range(low..=high) } else { low };
                p.0 = p.0.map(|c| clamp_u8(c as f64 * gain));
            }
        }
        Photometric::BrightnessContrast { brightness, contrast } => {
            for p in img.pixels_mut() {
                p.0 = p.0.map(|c| clamp_u8((c as f64 - 128.0) * contrast + 128.0 + brightness * 255.0));
            }
        }
        Photometric::Dropout { fraction } => {
            for p in img.pixels_mut() {
                if rng.random_bool(fraction) {
                    p.0 = [0, 0, 0];
                }
            }
        }
        Photometric::GripperColor { rgb } => {
            for p in img.pixels_mut() {
                if p.0 == GRIPPER_RGB {
                    *p = Rgb(rgb);
                }
            }
        }
    }
}

/// Applies a pixel transform to both views (only the approach view for
/// [`Photometric::GripperColor`]). Labels are untouched.
pub fn photometric<R: Rng + ?Sized>(s: &Sample, kind: &Photometric, rng: &mut R) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut out = s.clone();
    if !matches!(kind, Photometric::GripperColor { .. }) {
        apply_pixels(&mut out.object_image, kind, &mut rng);
    }
    apply_pixels(&mut out.approach_image, kind, &mut rng);
    out
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws and applies one random transform chain; returns the sample with
/// the chain appended to `transforms`.
pub fn random_chain(s: &Sample, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<Sample, AugmentError> {
    let mut out = s.clone();
    let mut chain = Vec::new();
    if rng.random_bool(cfg.flip_horizontal_prob) {
        out = flip_sample(&out, FlipAxis::Horizontal)?;
        chain.push("flip(horizontal)".to_string());
    }
    if rng.random_bool(cfg.flip_vertical_prob) {
        out = flip_sample(&out, FlipAxis::Vertical)?;
        chain.push("flip(vertical)".to_string());
    }
    if rng.random_bool(cfg.rotation_prob) {
        let angle = uniform(rng, cfg.rotation_range_deg);
        out = rotate_sample(&out, angle)?;
        chain.push(format!("rotate({angle:+.3})"));
    }
    let mut ops = Vec::new();
    if rng.random_bool(cfg.brightness_contrast_prob) {
        ops.push(Photometric::BrightnessContrast {
            brightness: uniform(rng, cfg.brightness_range),
            contrast: uniform(rng, cfg.contrast_range),
        });
    }
    if rng.random_bool(cfg.gaussian_prob) {
        ops.push(Photometric::Gaussian {
            std: rng.random_range(0.0..=cfg.gaussian_std),
        });
    }
    if rng.random_bool(cfg.iso_prob) {
        ops.push(Photometric::Iso {
            strength: rng.random_range(0.0..=cfg.iso_strength),
        });
    }
    if rng.random_bool(cfg.multiplicative_prob) {
        let (lo, hi) = cfg.multiplicative_range;
        ops.push(Photometric::Multiplicative { low: lo, high: hi });
    }
    if rng.random_bool(cfg.dropout_prob) {
        ops.push(Photometric::Dropout {
            fraction: cfg.dropout_fraction,
        });
    }
    if cfg.gripper_color_shift && rng.random_bool(cfg.gripper_color_prob) {
        ops.push(Photometric::GripperColor {
            rgb: [rng.random_range(150..=255), rng.random_range(150..=255), rng.random_range(150..=255)],
        });
    }
    for op in &ops {
        out = photometric(&out, op, rng);
        chain.push(op.label());
    }
    out.transforms.extend(chain);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentManifest {
    pub config: AugmentConfig,
    pub multiplier: usize,
    pub split_counts: BTreeMap<String, usize>,
    /// Variants skipped after exhausting retries.
    pub skipped: usize,
    pub checksum: String,
}

/// Writes `multiplier` samples per train sample (the original plus
/// augmented variants with ids `<id>_a<k>`) into `dst`; other splits are
/// copied unchanged.
pub fn augment_dataset(
    src: &Path,
    dst: &Path,
    cfg: &AugmentConfig,
    multiplier: usize,
) -> Result<AugmentManifest, AugmentError> {
    cfg.validate()?;
    if multiplier < 1 {
        return Err(AugmentError::InvalidConfig("multiplier must be at least 1".into()));
    }
    if dst.exists() && fs::read_dir(dst).map_err(|e| DatasetError::io(dst, e))?.next().is_some() {
        return Err(AugmentError::InvalidConfig(format!("{} is not empty", dst.display())));
    }
    let mut split_counts = BTreeMap::new();
    let mut skipped = 0;
    for split_dir in list_split_dirs(src)? {
        let split = split_dir.file_name().expect("directory has a name").to_string_lossy().into_owned();
        let out_split = dst.join(&split);
        let dirs = list_sample_dirs(&split_dir)?;
        if split != SPLIT_TRAIN {
            dirs.par_iter().try_for_each(|d| copy_dir(d, &out_split.join(d.file_name().expect("named"))))?;
            split_counts.insert(split, dirs.len());
            continue;
        }
        let results: Vec<Result<(usize, usize), AugmentError>> = dirs
            .par_iter()
            .enumerate()
            .map(|(index, d)| {
                let s = read_sample(d)?;
                write_sample(&s, &out_split.join(&s.id))?;
                let (mut written, mut lost) = (1, 0);
                for k in 1..multiplier {
                    let variant = (0..=cfg.max_retries).find_map(|attempt| {
                        let seed = sample_seed(cfg.seed, k as u64, index as u64, attempt as u64);
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        random_chain(&s, cfg, &mut rng).ok()
                    });
                    match variant {
                        Some(mut v) => {
                            v.id = format!("{}_a{k}", s.id);
                            write_sample(&v, &out_split.join(&v.id))?;
                            written += 1;
                        }
                        None => lost += 1,
                    }
                }
                Ok((written, lost))
            })
            .collect();
        let mut total = 0;
        for r in results {
            let (w, l) = r?;
            total += w;
            skipped += l;
        }
        split_counts.insert(split, total);
    }
    let manifest = AugmentManifest {
        config: cfg.clone(),
        multiplier,
        split_counts,
        skipped,
        checksum: crate::dataset::dataset_checksum(dst)?,
    };
    let path = dst.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))?;
    Ok(manifest)
}

fn copy_dir(src: &Path, dst: &Path) -> Result<(), AugmentError> {
    fs::create_dir_all(dst).map_err(|e| DatasetError::io(dst, e))?;
    for entry in fs::read_dir(src).map_err(|e| DatasetError::io(src, e))? {
        let entry = entry.map_err(|e| DatasetError::io(src, e))?;
        if entry.path().is_file() {
            let to = dst.join(entry.file_name());
            fs::copy(entry.path(), &to).map_err(|e| DatasetError::io(&to, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_samples, GenerateConfig};
    use crate::geometry::{angle_diff, mask_iou, rasterize_rect};

    fn samples(n: usize) -> Vec<Sample> {
        let cfg = GenerateConfig {
            count: n,
            novel_count: 0,
            seed: 21,
            ..GenerateConfig::default()
        };
        generate_samples(&cfg).unwrap().into_iter().map(|g| g.sample).collect()
    }

    /// A ball placed at the image center with a hand-set grasp there.
    fn centred_ball(theta: f64) -> Sample {
        use crate::dataset::{find_template, render_object, Placement, SceneSpec};
        let mut spec = SceneSpec::new(find_template("ball").unwrap(), [60, 120, 200], 0);
        spec.placement = Some(Placement {
            center: Point2::new(112.0, 112.0),
            orientation_deg: 0.0,
            scale: 1.0,
        });
        let r = render_object(&spec).unwrap();
        let approach = ApproachPose::new(112.0, 112.0, 48.0, 0.0);
        Sample {
            id: "ball".into(),
            object_name: "ball".into(),
            approach_image: render_approach(&r.image, &r.elements, &approach),
            object_image: r.image,
            elements: r.elements,
            grasp: GraspRectangle::new(112.0, 112.0, theta, 40.0, 20.0).unwrap(),
            approach,
            seen_split: crate::dataset::SeenSplit::TrainObject,
            transforms: vec![],
        }
    }

    #[test]
    fn centred_grasp_only_turns() {
        let r = rotate_sample(&centred_ball(10.0), 30.0).unwrap().grasp;
        assert!((r.cx - 112.0).abs() < 1e-9 && (r.cy - 112.0).abs() < 1e-9);
        assert!((r.theta_deg - 40.0).abs() < 1e-9);
        assert_eq!((r.width_px, r.height_px), (40.0, 20.0));
    }

    #[test]
    fn rotated_grasp_agrees_with_rotated_raster() {
        for s in samples(10) {
            for angle in [-40.0, -17.5, 12.0, 45.0] {
                let Ok(r) = rotate_sample(&s, angle) else { continue };
                let expected = rotate_mask(&rasterize_rect(&s.grasp, 224, 224), angle);
                let got = rasterize_rect(&r.grasp, 224, 224);
                assert!(mask_iou(&got, &expected).unwrap() >= 0.9, "{} {angle}", s.id);
                assert!(angle_diff(r.grasp.theta_deg, s.grasp.theta_deg + angle) < 1e-9);
            }
        }
    }

    #[test]
    fn flips_are_involutions_and_reflect_angles() {
        for s in samples(4) {
            for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
                let once = flip_sample(&s, axis).unwrap();
                let twice = flip_sample(&once, axis).unwrap();
                assert_eq!(twice.object_image, s.object_image);
                assert_eq!(twice.elements, s.elements);
                assert!((twice.grasp.cx - s.grasp.cx).abs() < 1e-9);
                assert!(angle_diff(twice.grasp.theta_deg, s.grasp.theta_deg) < 1e-9);
                assert!(angle_diff(twice.approach.yaw_deg, s.approach.yaw_deg) < 1e-9);
                let differing = twice
                    .approach_image
                    .pixels()
                    .zip(s.approach_image.pixels())
                    .filter(|(a, b)| a != b)
                    .count();
                assert!(differing < 10, "{differing}");
            }
        }
        let s = centred_ball(30.0);
        assert!((flip_sample(&s, FlipAxis::Horizontal).unwrap().grasp.theta_deg - 150.0).abs() < 1e-9);
        let s = centred_ball(0.0);
        assert_eq!(flip_sample(&s, FlipAxis::Horizontal).unwrap().grasp.theta_deg, 0.0);
    }

    #[test]
    fn photometric_leaves_labels_alone() {
        let s = &samples(1)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let before = s.annotation().to_json();
        for op in [
            Photometric::Gaussian { std: 8.0 },
            Photometric::Iso { strength: 0.05 },
            Photometric::Multiplicative { low: 0.9, high: 1.1 },
            Photometric::BrightnessContrast {
                brightness: 0.1,
                contrast: 1.2,
            },
            Photometric::Dropout { fraction: 0.1 },
            Photometric::GripperColor { rgb: [200, 180, 160] },
        ] {
            let out = photometric(s, &op, &mut rng);
            assert_eq!(out.annotation().to_json(), before);
            assert_eq!(out.elements, s.elements);
            assert_ne!(out.approach_image, s.approach_image, "{op:?}");
        }
    }

    #[test]
    fn zero_strength_noise_is_identity() {
        let s = &samples(1)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for op in [
            Photometric::Gaussian { std: 0.0 },
            Photometric::Iso { strength: 0.0 },
            Photometric::Multiplicative { low: 1.0, high: 1.0 },
            Photometric::Dropout { fraction: 0.0 },
        ] {
            assert_eq!(&photometric(s, &op, &mut rng), s);
        }
    }

    #[test]
    fn dropout_rate_is_close_to_fraction() {
        let mut s = samples(1).remove(0);
        s.object_image = RgbImage::from_pixel(224, 224, Rgb([100, 100, 100]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = photometric(&s, &Photometric::Dropout { fraction: 0.05 }, &mut rng);
        let n = out.object_image.pixels().filter(|p| p.0 == [0, 0, 0]).count() as f64;
        let total = 224.0 * 224.0;
        assert!(n >= 0.04 * total && n <= 0.06 * total, "{n}");
    }

    #[test]
    fn gripper_shift_changes_only_glyph_pixels() {
        let s = &samples(1)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = photometric(s, &Photometric::GripperColor { rgb: [10, 200, 30] }, &mut rng);
        assert_eq!(out.object_image, s.object_image);
        for (a, b) in s.approach_image.pixels().zip(out.approach_image.pixels()) {
            if a.0 == GRIPPER_RGB {
                assert_eq!(b.0, [10, 200, 30]);
            } else {
                assert_eq!(a, b);
            }
        }
    }
}
