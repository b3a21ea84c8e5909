//! Element decomposition: top-view image to up to three class-labelled
//! element masks with confidences.
//!
//! The model is a compact encoder-decoder that predicts one sigmoid map
//! per element class at a reduced resolution. Maps are upsampled to the
//! image, thresholded at 0.5 and split into 4-connected instances; an
//! instance's confidence is its median in-mask probability.

use crate::dataset::{ElementClass, ElementInstance, Sample};
use crate::geometry::{dice, BinaryMask};
use crate::nn::{
    bce_with_logits, Adam, Concat, Conv2d, ConvCache, MaxPool2, Optimizer, Param, Parameters, PoolCache,
    Relu, Scalar, Sgd, Sigmoid, Tensor, Upsample2,
};
use crate::raster::{image_to_tensor, mask_to_coverage, upsample_map};
use crate::train::{self, epoch_order, ArtifactError, LogRecord, OptimizerKind};
use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

/// Every element detection is an [`ElementInstance`] with a model confidence.
pub type Detection = ElementInstance;

pub const NUM_CLASSES: usize = 5;
const KIND: &str = "decomposer";

#[derive(Debug, Error)]
pub enum DecomposerError {
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("a validation split is required")]
    MissingSplit,
    #[error("invalid decomposer config: {0}")]
    InvalidConfig(String),
    #[error("backbone `{0:?}` is not available in this build")]
    UnsupportedBackbone(Backbone),
    #[error("sample {id}: image is {found:?}, expected square input")]
    BadImage { id: String, found: (u32, u32) },
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backbone {
    /// Region-proposal instance segmentation; not bundled.
    RegionProposal,
    /// Per-class mask head on a small encoder-decoder.
    PerClassMaskHead,
}

/// How an instance's confidence is read off its in-mask probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceKind {
    Mean,
    Median,
}

impl ConfidenceKind {
    pub fn score(self, mut probs: Vec<f32>) -> f64 {
        if probs.is_empty() {
            return 0.0;
        }
        match self {
            ConfidenceKind::Mean => probs.iter().map(|p| *p as f64).sum::<f64>() / probs.len() as f64,
            ConfidenceKind::Median => {
                let mid = probs.len() / 2;
                *probs.select_nth_unstable_by(mid, f32::total_cmp).1 as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposerConfig {
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Used by SGD only.
    pub momentum: f64,
    pub batch_size: usize,
    pub mdc_default: f64,
    pub max_instances: usize,
    pub backbone: Backbone,
    /// Side of the network input and output maps.
    pub input_size: usize,
    /// Channels of the first encoder stage; doubled per stage.
    pub base_channels: usize,
    /// Connected components smaller than this many image pixels are dropped.
    pub min_component_px: usize,
    pub confidence: ConfidenceKind,
    /// Validation DSC is computed every this many epochs and at the end.
    pub val_every: usize,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for DecomposerConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 8,
            mdc_default: 0.85,
            max_instances: 3,
            backbone: Backbone::PerClassMaskHead,
            input_size: 56,
            base_channels: 16,
            min_component_px: 24,
            confidence: ConfidenceKind::Median,
            val_every: 10,
            seed: 0,
            deterministic: true,
        }
    }
}

impl DecomposerConfig {
    pub fn validate(&self) -> Result<(), DecomposerError> {
        let bad = |m: String| Err(DecomposerError::InvalidConfig(m));
        if self.backbone != Backbone::PerClassMaskHead {
            return Err(DecomposerError::UnsupportedBackbone(self.backbone));
        }
        if !(self.mdc_default > 0.0 && self.mdc_default <= 1.0) {
            return bad(format!("mdc_default {} not in (0, 1]", self.mdc_default));
        }
        if self.max_instances != 3 {
            return bad(format!("max_instances must be 3, got {}", self.max_instances));
        }
        if self.input_size < 8 || self.input_size % 4 != 0 {
            return bad(format!("input_size {} must be a multiple of 4, at least 8", self.input_size));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.base_channels == 0 || self.val_every == 0 {
            return bad("epochs, batch_size, base_channels and val_every must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning_rate must be positive and momentum in [0, 1)".into());
        }
        Ok(())
    }
}

/// Two-level U-shaped network with skip connections.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposerNet<T> {
    pub size: usize,
    enc1: [Conv2d<T>; 2],
    enc2: [Conv2d<T>; 2],
    mid: [Conv2d<T>; 2],
    dec2: Conv2d<T>,
    dec1: Conv2d<T>,
    head: Conv2d<T>,
}

/// Forward-pass state needed by [`DecomposerNet::backward`].
pub struct DecomposerTrace<T> {
    caches: Vec<ConvCache<T>>,
    acts: Vec<Tensor<T>>,
    pools: [PoolCache; 2],
}

impl<T: Scalar> DecomposerNet<T> {
    pub fn new(size: usize, base: usize, rng: &mut ChaCha8Rng) -> Self {
        let (c1, c2, c3) = (base, base * 2, base * 4);
        let mut head = Conv2d::new(c1, NUM_CLASSES, 1, rng);
        // background dominates every map; start from a low prior
        head.bias.value.iter_mut().for_each(|b| *b = T::of(-3.0));
        Self {
            size,
            enc1: [Conv2d::new(3, c1, 3, rng), Conv2d::new(c1, c1, 3, rng)],
            enc2: [Conv2d::new(c1, c2, 3, rng), Conv2d::new(c2, c2, 3, rng)],
            mid: [Conv2d::new(c2, c3, 3, rng), Conv2d::new(c3, c3, 3, rng)],
            dec2: Conv2d::new(c3 + c2, c2, 3, rng),
            dec1: Conv2d::new(c2 + c1, c1, 3, rng),
            head,
        }
    }

    fn convs(&self) -> [&Conv2d<T>; 9] {
        [
            &self.enc1[0], &self.enc1[1], &self.enc2[0], &self.enc2[1], &self.mid[0], &self.mid[1],
            &self.dec2, &self.dec1, &self.head,
        ]
    }

    /// Per-class logits, `5 x size x size`.
    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, DecomposerTrace<T>) {
        let mut caches = Vec::with_capacity(9);
        let mut acts = Vec::with_capacity(8);
        let conv_relu = |conv: &Conv2d<T>, x: &Tensor<T>, caches: &mut Vec<ConvCache<T>>| {
            let (mut y, c) = conv.forward(x);
            Relu::forward(&mut y);
            caches.push(c);
            y
        };
        let a = conv_relu(&self.enc1[0], x, &mut caches);
        let s1 = conv_relu(&self.enc1[1], &a, &mut caches);
        acts.push(a);
        let (p1, pc1) = MaxPool2::forward(&s1);
        let a = conv_relu(&self.enc2[0], &p1, &mut caches);
        let s2 = conv_relu(&self.enc2[1], &a, &mut caches);
        acts.push(a);
        let (p2, pc2) = MaxPool2::forward(&s2);
        let a = conv_relu(&self.mid[0], &p2, &mut caches);
        let m = conv_relu(&self.mid[1], &a, &mut caches);
        acts.push(a);
        let cat2 = Concat::forward(&[&Upsample2::forward(&m), &s2]);
        let d2 = conv_relu(&self.dec2, &cat2, &mut caches);
        let cat1 = Concat::forward(&[&Upsample2::forward(&d2), &s1]);
        let d1 = conv_relu(&self.dec1, &cat1, &mut caches);
        let (logits, hc) = self.head.forward(&d1);
        caches.push(hc);
        acts.extend([s1, s2, m, d2, d1]);
        (
            logits,
            DecomposerTrace {
                caches,
                acts,
                pools: [pc1, pc2],
            },
        )
    }

    /// Accumulates parameter gradients for `dlogits`.
    pub fn backward(&mut self, trace: &DecomposerTrace<T>, dlogits: &Tensor<T>) {
        let [a1, a2, a3, s1, s2, m, d2, d1] = &trace.acts[..] else {
            panic!("trace from a different network")
        };
        let cc = &trace.caches;
        let back = |conv: &mut Conv2d<T>, cache: &ConvCache<T>, y: &Tensor<T>, mut dy: Tensor<T>, need: bool| {
            Relu::backward(y, &mut dy);
            conv.backward(cache, &dy, need)
        };
        let dd1 = self.head.backward(&cc[8], dlogits, true).expect("dx");
        let dcat1 = back(&mut self.dec1, &cc[7], d1, dd1, true).expect("dx");
        let parts = Concat::split(&dcat1, &[d2.c, s1.c]);
        let [du1, ds1_skip] = <[Tensor<T>; 2]>::try_from(parts).ok().expect("two parts");
        let dd2 = Upsample2::backward(&du1);
        let dcat2 = back(&mut self.dec2, &cc[6], d2, dd2, true).expect("dx");
        let parts = Concat::split(&dcat2, &[m.c, s2.c]);
        let [du2, ds2_skip] = <[Tensor<T>; 2]>::try_from(parts).ok().expect("two parts");
        let dm = Upsample2::backward(&du2);
        let da3 = back(&mut self.mid[1], &cc[5], m, dm, true).expect("dx");
        let dp2 = back(&mut self.mid[0], &cc[4], a3, da3, true).expect("dx");
        let mut ds2 = MaxPool2::backward(&trace.pools[1], &dp2);
        add_assign(&mut ds2, &ds2_skip);
        let da2 = back(&mut self.enc2[1], &cc[3], s2, ds2, true).expect("dx");
        let dp1 = back(&mut self.enc2[0], &cc[2], a2, da2, true).expect("dx");
        let mut ds1 = MaxPool2::backward(&trace.pools[0], &dp1);
        add_assign(&mut ds1, &ds1_skip);
        let da1 = back(&mut self.enc1[1], &cc[1], s1, ds1, true).expect("dx");
        back(&mut self.enc1[0], &cc[0], a1, da1, false);
    }

    pub fn cast<U: Scalar>(&self) -> DecomposerNet<U> {
        let c = |l: &Conv2d<T>| Conv2d {
            in_c: l.in_c,
            out_c: l.out_c,
            k: l.k,
            weight: l.weight.cast(),
            bias: l.bias.cast(),
        };
        DecomposerNet {
            size: self.size,
            enc1: [c(&self.enc1[0]), c(&self.enc1[1])],
            enc2: [c(&self.enc2[0]), c(&self.enc2[1])],
            mid: [c(&self.mid[0]), c(&self.mid[1])],
            dec2: c(&self.dec2),
            dec1: c(&self.dec1),
            head: c(&self.head),
        }
    }
}

fn add_assign<T: Scalar>(a: &mut Tensor<T>, b: &Tensor<T>) {
    for (x, y) in a.data.iter_mut().zip(&b.data) {
        *x = *x + *y;
    }
}

impl<T: Scalar> Parameters<T> for DecomposerNet<T> {
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let [e10, e11] = &mut self.enc1;
        let [e20, e21] = &mut self.enc2;
        let [m0, m1] = &mut self.mid;
        [e10, e11, e20, e21, m0, m1, &mut self.dec2, &mut self.dec1, &mut self.head]
            .into_iter()
            .flat_map(|c| c.params_mut())
            .collect()
    }

    fn params(&self) -> Vec<&Param<T>> {
        self.convs().into_iter().flat_map(|c| c.params()).collect()
    }
}

/// Per-class soft targets at network resolution, one map per class.
pub fn class_targets(elements: &[ElementInstance], size: usize) -> Vec<f32> {
    let plane = size * size;
    let mut t = vec![0.0f32; NUM_CLASSES * plane];
    for e in elements {
        let cov = mask_to_coverage(&e.mask, size);
        let dst = &mut t[e.element_class.index() * plane..(e.element_class.index() + 1) * plane];
        for (d, c) in dst.iter_mut().zip(cov) {
            *d = d.max(c);
        }
    }
    t
}

/// 4-connected components in row-major order of their first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.bits();
    let mut label = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !bits[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = BinaryMask::new(w as u32, h as u32);
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            comp.set(x as u32, y as u32, true);
            let mut visit = |j: usize| {
                if bits[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        out.push(comp);
    }
    out
}

/// Ranks detections by confidence (then larger area, then class order),
/// drops those below `mdc` and keeps at most `max`.
pub fn select_detections(mut raw: Vec<Detection>, mdc: f64, max: usize) -> Vec<Detection> {
    raw.retain(|d| d.confidence >= mdc);
    raw.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.mask.count().cmp(&a.mask.count()))
            .then(a.element_class.cmp(&b.element_class))
    });
    raw.truncate(max);
    raw
}

/// A trained decomposition model.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposer {
    pub config: DecomposerConfig,
    pub net: DecomposerNet<f32>,
}

impl Decomposer {
    pub fn new(config: DecomposerConfig) -> Result<Self, DecomposerError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = DecomposerNet::new(config.input_size, config.base_channels, &mut rng);
        Ok(Self { config, net })
    }

    /// Per-class probability maps at image resolution.
    pub fn probabilities(&self, image: &RgbImage) -> Vec<Vec<f32>> {
        let s = self.config.input_size;
        let (logits, _) = self.net.forward(&image_to_tensor(image, s));
        let (w, h) = image.dimensions();
        (0..NUM_CLASSES)
            .map(|c| {
                upsample_map(&logits.data[c * s * s..(c + 1) * s * s], s, w, h)
                    .into_iter()
                    .map(Sigmoid::apply)
                    .collect()
            })
            .collect()
    }

    /// Every instance the model finds, unfiltered and unranked.
    pub fn raw_detections(&self, image: &RgbImage) -> Vec<Detection> {
        let (w, h) = image.dimensions();
        let mut out = Vec::new();
        for (c, probs) in self.probabilities(image).into_iter().enumerate() {
            let class = ElementClass::from_index(c).expect("class index");
            let fg = BinaryMask::from_fn(w, h, |x, y| probs[(y * w + x) as usize] > 0.5);
            for comp in connected_components(&fg) {
                if comp.count() < self.config.min_component_px {
                    continue;
                }
                let inside: Vec<f32> = comp.iter_set().map(|(x, y)| probs[(y * w + x) as usize]).collect();
                out.push(Detection {
                    element_class: class,
                    mask: comp,
                    confidence: self.config.confidence.score(inside),
                });
            }
        }
        out
    }

    /// Up to three detections with confidence at least `mdc`, best first.
    pub fn decompose(&self, image: &RgbImage, mdc: f64) -> Vec<Detection> {
        select_detections(self.raw_detections(image), mdc, self.config.max_instances)
    }

    pub fn fingerprint(&self) -> String {
        train::fingerprint(&self.config)
    }

    pub fn save(&self, dir: &Path) -> Result<(), DecomposerError> {
        let mut extra = serde_json::Map::new();
        extra.insert(
            "classes".into(),
            serde_json::json!(ElementClass::ALL.iter().map(|c| c.name()).collect::<Vec<_>>()),
        );
        extra.insert("input_size".into(), self.config.input_size.into());
        train::save_model(dir, KIND, &self.config, &self.net.params(), extra)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DecomposerError> {
        let meta = train::read_meta::<DecomposerConfig>(dir, KIND)?;
        let mut model = Self::new(meta.config)?;
        train::load_weights(dir, &meta.weights_sha256, model.net.params_mut())?;
        Ok(model)
    }
}

/// Anything that can decompose an object image.
pub trait ElementDetector: Sync {
    fn detect(&self, id: &str, image: &RgbImage, mdc: f64) -> Vec<Detection>;
}

impl ElementDetector for Decomposer {
    fn detect(&self, _id: &str, image: &RgbImage, mdc: f64) -> Vec<Detection> {
        self.decompose(image, mdc)
    }
}

/// Echoes ground-truth elements (confidence 1) looked up by sample id.
#[derive(Debug, Clone, Default)]
pub struct OracleDetector {
    by_id: HashMap<String, Vec<ElementInstance>>,
}

impl OracleDetector {
    pub fn new<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        Self {
            by_id: samples.into_iter().map(|s| (s.id.clone(), s.elements.clone())).collect(),
        }
    }
}

impl ElementDetector for OracleDetector {
    fn detect(&self, id: &str, _image: &RgbImage, mdc: f64) -> Vec<Detection> {
        let raw = self.by_id.get(id).cloned().unwrap_or_default();
        select_detections(raw, mdc, 3)
    }
}

/// Detector that never finds anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyDetector;

impl ElementDetector for EmptyDetector {
    fn detect(&self, _id: &str, _image: &RgbImage, _mdc: f64) -> Vec<Detection> {
        Vec::new()
    }
}

/// Dice of each ground-truth instance after greedy maximum-dice matching
/// restricted to equal classes; unmatched ground truth scores 0.
pub fn match_instances(truth: &[ElementInstance], predicted: &[Detection]) -> Vec<(ElementClass, f64)> {
    let mut scores = vec![0.0; truth.len()];
    for class in ElementClass::ALL {
        let gt: Vec<usize> = (0..truth.len()).filter(|&i| truth[i].element_class == class).collect();
        let pr: Vec<usize> = (0..predicted.len()).filter(|&j| predicted[j].element_class == class).collect();
        let mut pairs: Vec<(f64, usize, usize)> = gt
            .iter()
            .flat_map(|&i| {
                pr.iter()
                    .map(move |&j| (dice(&truth[i].mask, &predicted[j].mask).unwrap_or(0.0), i, j))
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let (mut used_gt, mut used_pr) = (vec![false; truth.len()], vec![false; predicted.len()]);
        for (d, i, j) in pairs {
            if !used_gt[i] && !used_pr[j] {
                used_gt[i] = true;
                used_pr[j] = true;
                scores[i] = d;
            }
        }
    }
    truth.iter().map(|t| t.element_class).zip(scores).collect()
}

/// Per-class mean DSC (percent) for each MDC, in the layout of a
/// decomposition results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DscTable {
    pub mdc: Vec<f64>,
    /// One row per class in table order, then the mean row.
    pub rows: Vec<DscRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DscRow {
    /// Class name, or `mean`.
    pub label: String,
    /// Ground-truth instances behind each cell.
    pub instances: usize,
    /// `None` when the class does not occur in the split.
    pub values: Vec<Option<f64>>,
}

impl DscTable {
    pub fn mean_row(&self) -> &DscRow {
        self.rows.last().expect("table has a mean row")
    }

    pub fn cell(&self, label: &str, mdc_index: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).and_then(|r| r.values[mdc_index])
    }
}

/// Scores a detector on `samples` at each MDC. The mean row averages the
/// class cells that are defined.
pub fn evaluate_decomposer(detector: &dyn ElementDetector, samples: &[Sample], mdc_list: &[f64]) -> DscTable {
    let per_mdc: Vec<Vec<(ElementClass, f64)>> = mdc_list
        .iter()
        .map(|&mdc| {
            samples
                .par_iter()
                .map(|s| match_instances(&s.elements, &detector.detect(&s.id, &s.object_image, mdc)))
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for class in ElementClass::TABLE_ORDER {
        let instances = per_mdc.first().map_or(0, |v| v.iter().filter(|(c, _)| *c == class).count());
        let values = per_mdc
            .iter()
            .map(|scores| {
                let v: Vec<f64> = scores.iter().filter(|(c, _)| *c == class).map(|(_, d)| *d).collect();
                (!v.is_empty()).then(|| 100.0 * v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        rows.push(DscRow {
            label: class.name().to_string(),
            instances,
            values,
        });
    }
    let mean = (0..mdc_list.len())
        .map(|k| {
            let cells: Vec<f64> = rows.iter().filter_map(|r| r.values[k]).collect();
            (!cells.is_empty()).then(|| cells.iter().sum::<f64>() / cells.len() as f64)
        })
        .collect();
    let instances = rows.iter().map(|r| r.instances).sum();
    rows.push(DscRow {
        label: "mean".into(),
        instances,
        values: mean,
    });
    DscTable {
        mdc: mdc_list.to_vec(),
        rows,
    }
}

struct Prepared {
    input: Tensor<f32>,
    target: Vec<f32>,
}

fn prepare(samples: &[Sample], size: usize) -> Vec<Prepared> {
    samples
        .par_iter()
        .map(|s| Prepared {
            input: image_to_tensor(&s.object_image, size),
            target: class_targets(&s.elements, size),
        })
        .collect()
}

fn sample_loss(net: &DecomposerNet<f32>, p: &Prepared) -> (f32, DecomposerTrace<f32>, Vec<f32>) {
    let (logits, trace) = net.forward(&p.input);
    let (loss, grad) = bce_with_logits(&logits.data, &p.target, 1.0);
    (loss, trace, grad)
}

/// Trains a decomposer. When `out_dir` is given the model, its config
/// fingerprint and `train_log.jsonl` are written there.
pub fn train_decomposer(
    train_split: &[Sample],
    val_split: Option<&[Sample]>,
    config: &DecomposerConfig,
    out_dir: Option<&Path>,
) -> Result<(Decomposer, Vec<LogRecord>), DecomposerError> {
    let mut model = Decomposer::new(config.clone())?;
    let val_split = val_split.ok_or(DecomposerError::MissingSplit)?;
    if train_split.is_empty() {
        return Err(DecomposerError::EmptySplit("train"));
    }
    if val_split.is_empty() {
        return Err(DecomposerError::EmptySplit("validation"));
    }
    if let Some(s) = train_split.iter().chain(val_split).find(|s| s.width() != s.height()) {
        return Err(DecomposerError::BadImage {
            id: s.id.clone(),
            found: s.object_image.dimensions(),
        });
    }
    let size = config.input_size;
    let train_data = prepare(train_split, size);
    let val_data = prepare(val_split, size);
    let mut opt: Box<dyn Optimizer<f32>> = match config.optimizer {
        OptimizerKind::Adam => Box::new(Adam::new(config.learning_rate)),
        OptimizerKind::Sgd => Box::new(Sgd::new(config.learning_rate, config.momentum)),
    };
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let order = epoch_order(train_data.len(), config.seed, epoch);
        let mut total = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            model.net.zero_grad();
            for &i in batch {
                let (loss, trace, grad) = sample_loss(&model.net, &train_data[i]);
                total += loss as f64;
                model.net.backward(&trace, &Tensor::from_vec(NUM_CLASSES, size, size, grad));
            }
            let scale = 1.0 / batch.len() as f32;
            let mut params = model.net.params_mut();
            params.iter_mut().for_each(|p| p.scale_grad(scale));
            opt.step(params);
        }
        let loss = total / train_data.len() as f64;
        if !loss.is_finite() {
            return Err(DecomposerError::Diverged(epoch));
        }
        let val_loss = val_data
            .par_iter()
            .map(|p| {
                let (logits, _) = model.net.forward(&p.input);
                bce_with_logits(&logits.data, &p.target, 1.0).0 as f64
            })
            .sum::<f64>()
            / val_data.len() as f64;
        let val_metric = (epoch % config.val_every == 0 || epoch == config.epochs).then(|| {
            evaluate_decomposer(&model, val_split, &[config.mdc_default])
                .mean_row()
                .values[0]
                .unwrap_or(0.0)
        });
        log::info!("decomposer epoch {epoch}: loss {loss:.5} val_loss {val_loss:.5} val_dsc {val_metric:?}");
        log.push(LogRecord {
            epoch,
            loss,
            val_loss,
            val_metric,
        });
    }
    if let Some(dir) = out_dir {
        model.save(dir)?;
        train::write_log(&dir.join(train::LOG_FILE), &log)?;
    }
    Ok((model, log))
}
