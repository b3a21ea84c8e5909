//! Grasp regression from masked element images and an approach image.
//!
//! Each detected element is cut out of the object image and passed through
//! a part branch whose first convolution is shared across the three
//! slots. A second branch encodes the approach image. Both feature maps are
//! stacked in depth, fused by three convolutions and regressed to four
//! normalized grasp parameters.

use crate::dataset::Sample;
use crate::decomposer::{select_detections, Detection};
use crate::geometry::{
    grasp_success, GeometryError, GraspRectangle, DEFAULT_ANGLE_THRESHOLD_DEG, DEFAULT_JACCARD_THRESHOLD,
};
use crate::nn::{
    mae_loss, Adam, Concat, Conv2d, ConvCache, Dense, MaxPool2, Optimizer, Param, Parameters, PoolCache, Relu,
    Scalar, Sgd, Sigmoid, Tensor,
};
use crate::raster::{apply_mask, image_to_tensor};
use crate::train::{self, epoch_order, ArtifactError, LogRecord, OptimizerKind};
use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

const KIND: &str = "graspnet";
/// Number of part slots.
pub const PART_SLOTS: usize = 3;

#[derive(Debug, Error)]
pub enum GraspNetError {
    #[error("no elements detected; a grasp cannot be predicted")]
    NoElementsDetected,
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("a validation split is required")]
    MissingSplit,
    #[error("invalid grasp network config: {0}")]
    InvalidConfig(String),
    #[error("approach branch `{0:?}` is not available in this build")]
    UnsupportedBranch(ApproachBranch),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproachBranch {
    /// Pretrained classification backbone; not bundled.
    Pretrained,
    /// Five-block convolutional encoder trained from scratch.
    ScratchEncoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspNetConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub loss: LossKind,
    /// Shared stem width, then one conv-conv-pool stage per entry.
    pub part_channels: Vec<usize>,
    /// Appends normalized x and y coordinate planes to every branch input.
    pub coord_channels: bool,
    pub approach_branch: ApproachBranch,
    /// Encoder blocks; every block but the last is followed by pooling.
    pub approach_channels: Vec<usize>,
    /// Width of the convolution closing the approach branch.
    pub approach_depth: usize,
    pub fused_depth: usize,
    pub fusion_channels: Vec<usize>,
    pub output_dim: usize,
    /// Side every branch input is resized to.
    pub input_size: usize,
    pub gripper_max_width: f64,
    pub grasp_height: f64,
    /// Validation success rate is computed every this many epochs and at the end.
    pub val_every: usize,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for GraspNetConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-4,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            loss: LossKind::Mae,
            part_channels: vec![16, 64, 128, 256],
            coord_channels: false,
            approach_branch: ApproachBranch::ScratchEncoder,
            approach_channels: vec![16, 32, 64, 128, 256],
            approach_depth: 256,
            fused_depth: 512,
            fusion_channels: vec![256, 128, 64],
            output_dim: 4,
            input_size: 64,
            gripper_max_width: 80.0,
            grasp_height: 30.0,
            val_every: 10,
            seed: 0,
            deterministic: true,
        }
    }
}

impl GraspNetConfig {
    pub fn validate(&self) -> Result<(), GraspNetError> {
        let bad = |m: String| Err(GraspNetError::InvalidConfig(m));
        if self.approach_branch != ApproachBranch::ScratchEncoder {
            return Err(GraspNetError::UnsupportedBranch(self.approach_branch));
        }
        if self.output_dim != 4 {
            return bad(format!("output_dim must be 4, got {}", self.output_dim));
        }
        if self.part_channels.len() < 2 || self.approach_channels.is_empty() || self.fusion_channels.is_empty() {
            return bad("channel plans must not be empty".into());
        }
        let part_depth = *self.part_channels.last().expect("non-empty");
        if self.fused_depth != part_depth + self.approach_depth {
            return bad(format!(
                "fused_depth {} must equal part depth {part_depth} plus approach depth {}",
                self.fused_depth, self.approach_depth
            ));
        }
        let (part_pools, app_pools) = (self.part_channels.len(), self.approach_channels.len() - 1);
        if part_pools != app_pools {
            return bad(format!(
                "branches reach different resolutions ({part_pools} vs {app_pools} poolings)"
            ));
        }
        if self.input_size == 0 || self.input_size % (1 << part_pools) != 0 {
            return bad(format!("input_size {} must be divisible by {}", self.input_size, 1 << part_pools));
        }
        if [&self.part_channels, &self.approach_channels, &self.fusion_channels]
            .iter()
            .any(|v| v.contains(&0))
            || self.approach_depth == 0
        {
            return bad("channel counts must be positive".into());
        }
        if self.epochs == 0 || self.batch_size == 0 || self.val_every == 0 {
            return bad("epochs, batch_size and val_every must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning_rate must be positive and momentum in [0, 1)".into());
        }
        if !(self.gripper_max_width > 0.0 && self.grasp_height > 0.0) {
            return bad("gripper_max_width and grasp_height must be positive".into());
        }
        Ok(())
    }

    fn feature_size(&self) -> usize {
        self.input_size >> self.part_channels.len()
    }

    fn input_channels(&self) -> usize {
        if self.coord_channels {
            5
        } else {
            3
        }
    }
}

/// Network output, every field in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspOutput {
    pub cx_norm: f64,
    pub cy_norm: f64,
    pub theta_norm: f64,
    pub width_norm: f64,
}

impl GraspOutput {
    pub fn from_slice(v: &[f64]) -> Self {
        let c = |x: f64| if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.5 };
        Self {
            cx_norm: c(v[0]),
            cy_norm: c(v[1]),
            theta_norm: c(v[2]),
            width_norm: c(v[3]),
        }
    }

    /// Label encoding of a rectangle on a `width x height` image.
    pub fn normalize(g: &GraspRectangle, width: u32, height: u32, max_width: f64) -> Self {
        Self::from_slice(&[
            g.cx / (width as f64 - 1.0),
            g.cy / (height as f64 - 1.0),
            g.theta_deg / 180.0,
            g.width_px / max_width,
        ])
    }

    /// Widths are floored at one pixel so every output is a valid rectangle.
    pub fn denormalize(
        &self,
        width: u32,
        height: u32,
        max_width: f64,
        grasp_height: f64,
    ) -> Result<GraspRectangle, GeometryError> {
        GraspRectangle::new(
            self.cx_norm * (width as f64 - 1.0),
            self.cy_norm * (height as f64 - 1.0),
            self.theta_norm * 180.0,
            (self.width_norm * max_width).max(1.0),
            grasp_height,
        )
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx_norm, self.cy_norm, self.theta_norm, self.width_norm]
    }
}

/// Part images for up to three detections, in detection order, with
/// blank slots after them.
pub fn masked_parts(object_image: &RgbImage, detections: &[Detection]) -> Result<Vec<RgbImage>, GraspNetError> {
    if detections.is_empty() {
        return Err(GraspNetError::NoElementsDetected);
    }
    let (w, h) = object_image.dimensions();
    Ok((0..PART_SLOTS)
        .map(|k| match detections.get(k) {
            Some(d) => apply_mask(object_image, &d.mask),
            None => RgbImage::new(w, h),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Conv(usize),
    Pool,
}

enum Rec<T> {
    Conv(ConvCache<T>, Tensor<T>),
    Pool(PoolCache),
}

/// Sequence of ReLU convolutions and 2x2 max pools.
#[derive(Debug, Clone, PartialEq)]
struct Chain<T> {
    convs: Vec<Conv2d<T>>,
    plan: Vec<Op>,
}

impl<T: Scalar> Chain<T> {
    fn new() -> Self {
        Self {
            convs: Vec::new(),
            plan: Vec::new(),
        }
    }

    fn conv(&mut self, conv: Conv2d<T>) {
        self.plan.push(Op::Conv(self.convs.len()));
        self.convs.push(conv);
    }

    fn pool(&mut self) {
        self.plan.push(Op::Pool);
    }

    fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, Vec<Rec<T>>) {
        let mut recs = Vec::with_capacity(self.plan.len());
        let mut cur = x.clone();
        for op in &self.plan {
            match *op {
                Op::Conv(i) => {
                    let (mut y, c) = self.convs[i].forward(&cur);
                    Relu::forward(&mut y);
                    recs.push(Rec::Conv(c, y.clone()));
                    cur = y;
                }
                Op::Pool => {
                    let (y, c) = MaxPool2::forward(&cur);
                    recs.push(Rec::Pool(c));
                    cur = y;
                }
            }
        }
        (cur, recs)
    }

    fn backward(&mut self, recs: &[Rec<T>], mut dy: Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        for (k, (op, rec)) in self.plan.iter().zip(recs).enumerate().rev() {
            match (*op, rec) {
                (Op::Conv(i), Rec::Conv(cache, y)) => {
                    Relu::backward(y, &mut dy);
                    match self.convs[i].backward(cache, &dy, k > 0 || need_dx) {
                        Some(dx) => dy = dx,
                        None => return None,
                    }
                }
                (Op::Pool, Rec::Pool(cache)) => dy = MaxPool2::backward(cache, &dy),
                _ => unreachable!("record does not match plan"),
            }
        }
        Some(dy)
    }

    fn cast<U: Scalar>(&self) -> Chain<U> {
        Chain {
            convs: self
                .convs
                .iter()
                .map(|l| Conv2d {
                    in_c: l.in_c,
                    out_c: l.out_c,
                    k: l.k,
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            plan: self.plan.clone(),
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.convs.iter_mut().flat_map(|c| c.params_mut())
    }

    fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.convs.iter().flat_map(|c| c.params())
    }
}

/// One network input: three part tensors and the approach tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspInput<T> {
    pub parts: [Tensor<T>; PART_SLOTS],
    pub approach: Tensor<T>,
}

impl GraspInput<f32> {
    pub fn build(
        object_image: &RgbImage,
        approach_image: &RgbImage,
        detections: &[Detection],
        size: usize,
    ) -> Result<Self, GraspNetError> {
        if detections.is_empty() {
            return Err(GraspNetError::NoElementsDetected);
        }
        let part = |k: usize| match detections.get(k) {
            Some(d) => image_to_tensor(&apply_mask(object_image, &d.mask), size),
            None => Tensor::zeros(3, size, size),
        };
        Ok(Self {
            parts: [part(0), part(1), part(2)],
            approach: image_to_tensor(approach_image, size),
        })
    }
}

impl<T: Scalar> GraspInput<T> {
    pub fn cast<U: Scalar>(&self) -> GraspInput<U> {
        GraspInput {
            parts: [self.parts[0].cast(), self.parts[1].cast(), self.parts[2].cast()],
            approach: self.approach.cast(),
        }
    }
}

/// Forward-pass state needed by [`GraspNet::backward`].
pub struct GraspTrace<T> {
    stem: Vec<Vec<Rec<T>>>,
    stem_channels: usize,
    body: Vec<Rec<T>>,
    part_depth: usize,
    approach: Vec<Rec<T>>,
    fusion: Vec<Rec<T>>,
    fused: Tensor<T>,
    output: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspNet<T> {
    coords: bool,
    stem: Chain<T>,
    body: Chain<T>,
    approach: Chain<T>,
    fusion: Chain<T>,
    dense: Dense<T>,
}

impl<T: Scalar> GraspNet<T> {
    pub fn new(cfg: &GraspNetConfig, rng: &mut ChaCha8Rng) -> Result<Self, GraspNetError> {
        cfg.validate()?;
        let pc = &cfg.part_channels;
        let mut stem = Chain::new();
        stem.conv(Conv2d::new(cfg.input_channels(), pc[0], 3, rng));
        stem.pool();
        let mut body = Chain::new();
        let mut c_in = PART_SLOTS * pc[0];
        for &c in &pc[1..] {
            body.conv(Conv2d::new(c_in, c, 3, rng));
            body.conv(Conv2d::new(c, c, 3, rng));
            body.pool();
            c_in = c;
        }
        let mut approach = Chain::new();
        let mut c_in = cfg.input_channels();
        for (i, &c) in cfg.approach_channels.iter().enumerate() {
            approach.conv(Conv2d::new(c_in, c, 3, rng));
            if i + 1 < cfg.approach_channels.len() {
                approach.pool();
            }
            c_in = c;
        }
        approach.conv(Conv2d::new(c_in, cfg.approach_depth, 3, rng));
        let mut fusion = Chain::new();
        let mut c_in = cfg.fused_depth;
        for &c in &cfg.fusion_channels {
            fusion.conv(Conv2d::new(c_in, c, 3, rng));
            c_in = c;
        }
        let fs = cfg.feature_size();
        let dense = Dense::new(c_in * fs * fs, cfg.output_dim, rng);
        Ok(Self {
            coords: cfg.coord_channels,
            stem,
            body,
            approach,
            fusion,
            dense,
        })
    }

    fn branch_input<'a>(&self, x: &'a Tensor<T>) -> std::borrow::Cow<'a, Tensor<T>> {
        if !self.coords {
            return std::borrow::Cow::Borrowed(x);
        }
        let (c, h, w) = x.shape();
        let mut data = Vec::with_capacity((c + 2) * h * w);
        data.extend_from_slice(&x.data);
        data.extend((0..h).flat_map(|_| (0..w).map(move |i| T::of((i as f64 + 0.5) / w as f64))));
        data.extend((0..h).flat_map(|j| (0..w).map(move |_| T::of((j as f64 + 0.5) / h as f64))));
        std::borrow::Cow::Owned(Tensor::from_vec(c + 2, h, w, data))
    }

    /// Outputs in `[0, 1]` and the trace for backpropagation.
    pub fn forward(&self, input: &GraspInput<T>) -> (Vec<T>, GraspTrace<T>) {
        let mut stem_recs = Vec::with_capacity(PART_SLOTS);
        let mut stem_out = Vec::with_capacity(PART_SLOTS);
        for p in &input.parts {
            let (y, r) = self.stem.forward(&self.branch_input(p));
            stem_out.push(y);
            stem_recs.push(r);
        }
        let stem_channels = stem_out[0].c;
        let cat = Concat::forward(&stem_out.iter().collect::<Vec<_>>());
        let (part, body) = self.body.forward(&cat);
        let (app, approach) = self.approach.forward(&self.branch_input(&input.approach));
        let part_depth = part.c;
        let (fused, fusion) = self.fusion.forward(&Concat::forward(&[&part, &app]));
        let output = Sigmoid::forward(&self.dense.forward(&fused.data));
        (
            output.clone(),
            GraspTrace {
                stem: stem_recs,
                stem_channels,
                body,
                part_depth,
                approach,
                fusion,
                fused,
                output,
            },
        )
    }

    /// Accumulates parameter gradients for the output gradient `dy`.
    pub fn backward(&mut self, trace: &GraspTrace<T>, dy: &[T]) {
        let dz = Sigmoid::backward(&trace.output, dy);
        let dfused = self.dense.backward(&trace.fused.data, &dz);
        let f = &trace.fused;
        let dfused = Tensor::from_vec(f.c, f.h, f.w, dfused);
        let dcat = self.fusion.backward(&trace.fusion, dfused, true).expect("dx");
        let app_depth = dcat.c - trace.part_depth;
        let mut split = Concat::split(&dcat, &[trace.part_depth, app_depth]).into_iter();
        let (dpart, dapp) = (split.next().expect("part"), split.next().expect("approach"));
        self.approach.backward(&trace.approach, dapp, false);
        let dstem = self.body.backward(&trace.body, dpart, true).expect("dx");
        let parts = Concat::split(&dstem, &[trace.stem_channels; PART_SLOTS]);
        for (recs, d) in trace.stem.iter().zip(parts) {
            self.stem.backward(recs, d, false);
        }
    }

    /// Shifts the output bias so that the mean pre-activation over `inputs`
    /// equals the logit of `mean`.
    pub fn calibrate_output_bias<'a>(&mut self, inputs: impl Iterator<Item = &'a GraspInput<T>>, mean: &[f64])
    where
        T: 'a,
    {
        let logit = |p: f64| {
            let p = p.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        };
        let (mut z, mut n) = (vec![0.0f64; self.dense.outputs], 0usize);
        for x in inputs {
            for (acc, y) in z.iter_mut().zip(self.forward(x).0) {
                *acc += logit(y.as_f64());
            }
            n += 1;
        }
        if n == 0 {
            return;
        }
        for ((b, m), zsum) in self.dense.bias.value.iter_mut().zip(mean).zip(z) {
            let shift = logit(m.clamp(0.02, 0.98)) - zsum / n as f64;
            *b = *b + T::of(shift);
        }
    }

    pub fn cast<U: Scalar>(&self) -> GraspNet<U> {
        GraspNet {
            coords: self.coords,
            stem: self.stem.cast(),
            body: self.body.cast(),
            approach: self.approach.cast(),
            fusion: self.fusion.cast(),
            dense: Dense {
                inputs: self.dense.inputs,
                outputs: self.dense.outputs,
                weight: self.dense.weight.cast(),
                bias: self.dense.bias.cast(),
            },
        }
    }
}

impl<T: Scalar> Parameters<T> for GraspNet<T> {
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.stem
            .params_mut()
            .chain(self.body.params_mut())
            .chain(self.approach.params_mut())
            .chain(self.fusion.params_mut())
            .chain(self.dense.params_mut())
            .collect()
    }

    fn params(&self) -> Vec<&Param<T>> {
        self.stem
            .params()
            .chain(self.body.params())
            .chain(self.approach.params())
            .chain(self.fusion.params())
            .chain(self.dense.params())
            .collect()
    }
}

/// A trained grasp network with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspModel {
    pub config: GraspNetConfig,
    pub net: GraspNet<f32>,
}

impl GraspModel {
    pub fn new(config: GraspNetConfig) -> Result<Self, GraspNetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = GraspNet::new(&config, &mut rng)?;
        Ok(Self { config, net })
    }

    pub fn raw_output(&self, input: &GraspInput<f32>) -> GraspOutput {
        let (y, _) = self.net.forward(input);
        GraspOutput::from_slice(&y.iter().map(|v| *v as f64).collect::<Vec<_>>())
    }

    pub fn predict_grasp(
        &self,
        object_image: &RgbImage,
        approach_image: &RgbImage,
        detections: &[Detection],
    ) -> Result<GraspRectangle, GraspNetError> {
        let input = GraspInput::build(object_image, approach_image, detections, self.config.input_size)?;
        let (w, h) = object_image.dimensions();
        Ok(self
            .raw_output(&input)
            .denormalize(w, h, self.config.gripper_max_width, self.config.grasp_height)?)
    }

    pub fn fingerprint(&self) -> String {
        train::fingerprint(&self.config)
    }

    pub fn save(&self, dir: &Path) -> Result<(), GraspNetError> {
        let mut extra = serde_json::Map::new();
        extra.insert("approach_branch".into(), serde_json::to_value(self.config.approach_branch).expect("enum"));
        extra.insert("gripper_max_width".into(), self.config.gripper_max_width.into());
        extra.insert("grasp_height".into(), self.config.grasp_height.into());
        extra.insert(
            "normalization".into(),
            serde_json::json!({ "cx": "W-1", "cy": "H-1", "theta": 180.0, "width": self.config.gripper_max_width }),
        );
        train::save_model(dir, KIND, &self.config, &self.net.params(), extra)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GraspNetError> {
        let meta = train::read_meta::<GraspNetConfig>(dir, KIND)?;
        let mut model = Self::new(meta.config)?;
        train::load_weights(dir, &meta.weights_sha256, model.net.params_mut())?;
        Ok(model)
    }
}

/// Anything that maps a probe and its detections to a grasp.
pub trait GraspPredictor: Sync {
    fn predict(
        &self,
        id: &str,
        object_image: &RgbImage,
        approach_image: &RgbImage,
        detections: &[Detection],
    ) -> Result<GraspRectangle, GraspNetError>;
}

impl GraspPredictor for GraspModel {
    fn predict(
        &self,
        _id: &str,
        object_image: &RgbImage,
        approach_image: &RgbImage,
        detections: &[Detection],
    ) -> Result<GraspRectangle, GraspNetError> {
        self.predict_grasp(object_image, approach_image, detections)
    }
}

/// Returns the labelled grasp of each known sample id.
#[derive(Debug, Clone, Default)]
pub struct OracleGraspPredictor {
    by_id: HashMap<String, GraspRectangle>,
}

impl OracleGraspPredictor {
    pub fn new<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        Self {
            by_id: samples.into_iter().map(|s| (s.id.clone(), s.grasp)).collect(),
        }
    }
}

impl GraspPredictor for OracleGraspPredictor {
    fn predict(
        &self,
        id: &str,
        object_image: &RgbImage,
        _approach_image: &RgbImage,
        detections: &[Detection],
    ) -> Result<GraspRectangle, GraspNetError> {
        if detections.is_empty() {
            return Err(GraspNetError::NoElementsDetected);
        }
        let (w, h) = object_image.dimensions();
        Ok(self
            .by_id
            .get(id)
            .copied()
            .unwrap_or(GraspRectangle::new(w as f64 / 2.0, h as f64 / 2.0, 0.0, 1.0, 1.0)?))
    }
}

/// Ground-truth element order used as the training input.
pub fn training_detections(s: &Sample) -> Vec<Detection> {
    select_detections(s.elements.clone(), 0.0, PART_SLOTS)
}

struct Prepared {
    input: GraspInput<f32>,
    target: [f32; 4],
}

fn prepare(samples: &[Sample], cfg: &GraspNetConfig) -> Result<Vec<Prepared>, GraspNetError> {
    samples
        .par_iter()
        .map(|s| {
            let input = GraspInput::build(&s.object_image, &s.approach_image, &training_detections(s), cfg.input_size)?;
            let t = GraspOutput::normalize(&s.grasp, s.width(), s.height(), cfg.gripper_max_width).to_array();
            Ok(Prepared {
                input,
                target: t.map(|v| v as f32),
            })
        })
        .collect()
}

/// Fraction of samples whose prediction from ground-truth masks meets
/// the default success criterion.
pub fn success_rate(model: &GraspModel, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .par_iter()
        .filter(|s| {
            model
                .predict_grasp(&s.object_image, &s.approach_image, &training_detections(s))
                .is_ok_and(|g| grasp_success(&g, &s.grasp, DEFAULT_JACCARD_THRESHOLD, DEFAULT_ANGLE_THRESHOLD_DEG))
        })
        .count();
    hits as f64 / samples.len() as f64
}

/// Trains a grasp network on ground-truth element masks. When `out_dir`
/// is given the model and `train_log.jsonl` are written there.
pub fn train_grasp_net(
    train_split: &[Sample],
    val_split: Option<&[Sample]>,
    config: &GraspNetConfig,
    out_dir: Option<&Path>,
) -> Result<(GraspModel, Vec<LogRecord>), GraspNetError> {
    let mut model = GraspModel::new(config.clone())?;
    let val_split = val_split.ok_or(GraspNetError::MissingSplit)?;
    if train_split.is_empty() {
        return Err(GraspNetError::EmptySplit("train"));
    }
    if val_split.is_empty() {
        return Err(GraspNetError::EmptySplit("validation"));
    }
    let train_data = prepare(train_split, config)?;
    let val_data = prepare(val_split, config)?;
    let mut mean = [0.0f64; 4];
    for p in &train_data {
        for (m, t) in mean.iter_mut().zip(p.target) {
            *m += t as f64 / train_data.len() as f64;
        }
    }
    model.net.calibrate_output_bias(train_data.iter().map(|p| &p.input), &mean);
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
                let p = &train_data[i];
                let (y, trace) = model.net.forward(&p.input);
                let (loss, grad) = mae_loss(&y, &p.target);
                total += loss as f64;
                model.net.backward(&trace, &grad);
            }
            let scale = 1.0 / batch.len() as f32;
            let mut params = model.net.params_mut();
            params.iter_mut().for_each(|p| p.scale_grad(scale));
            opt.step(params);
        }
        let loss = total / train_data.len() as f64;
        if !loss.is_finite() {
            return Err(GraspNetError::Diverged(epoch));
        }
        let val_loss = val_data
            .par_iter()
            .map(|p| mae_loss(&model.net.forward(&p.input).0, &p.target).0 as f64)
            .sum::<f64>()
            / val_data.len() as f64;
        let val_metric =
            (epoch % config.val_every == 0 || epoch == config.epochs).then(|| success_rate(&model, val_split));
        log::info!("graspnet epoch {epoch}: loss {loss:.5} val_loss {val_loss:.5} val_success {val_metric:?}");
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
