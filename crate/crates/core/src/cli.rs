//! Command-line front end. Every subcommand reads its hyperparameters from
//! one TOML experiment file; flags override individual fields.

use crate::augment::{augment_dataset, AugmentConfig, AugmentError};
use crate::dataset::{
    dataset_checksum, generate_dataset, load_split, validate_dataset, DatasetError, GenerateConfig, Sample,
    RUNS_DIR, SPLIT_NOVEL, SPLIT_TRAIN, SPLIT_VALIDATION,
};
use crate::decomposer::{train_decomposer, Decomposer, DecomposerConfig, DecomposerError, ElementDetector, OracleDetector};
use crate::eval::{evaluate_pipeline, write_report, EvalConfig, EvalError, ReportFormat, RunMeta};
use crate::geometry::{GraspRectangle, Point2};
use crate::graspnet::{train_grasp_net, GraspModel, GraspNetConfig, GraspNetError, GraspPredictor, OracleGraspPredictor};
use crate::raster::draw_segment;
use crate::train::ArtifactError;
use clap::{Args, Parser, Subcommand};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
/// Model path accepted by `evaluate` in place of an artifact directory.
pub const ORACLE: &str = "oracle";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("no elements detected in {0}; no grasp can be predicted")]
    NoElementsDetected(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NoElementsDetected(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidConfig(_) | DatasetError::UnknownTemplate(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::InvalidConfig(_) | AugmentError::InvalidAngle(_) => CliError::Config(e.to_string()),
            AugmentError::Dataset(d) => d.into(),
            AugmentError::DiscardAugmentation(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<DecomposerError> for CliError {
    fn from(e: DecomposerError) -> Self {
        match e {
            DecomposerError::InvalidConfig(_) | DecomposerError::UnsupportedBackbone(_) => {
                CliError::Config(e.to_string())
            }
            DecomposerError::EmptySplit(_) | DecomposerError::MissingSplit | DecomposerError::BadImage { .. } => {
                CliError::Data(e.to_string())
            }
            DecomposerError::Diverged(_) | DecomposerError::Artifact(_) => CliError::Other(e.to_string()),
        }
    }
}

impl From<GraspNetError> for CliError {
    fn from(e: GraspNetError) -> Self {
        match e {
            GraspNetError::NoElementsDetected => CliError::NoElementsDetected("the input".into()),
            GraspNetError::InvalidConfig(_) | GraspNetError::UnsupportedBranch(_) => CliError::Config(e.to_string()),
            GraspNetError::EmptySplit(_) | GraspNetError::MissingSplit => CliError::Data(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidThresholds(_) => CliError::Config(e.to_string()),
            EvalError::EmptySplit => CliError::Data(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

/// All hyperparameters of an experiment; every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generate: GenerateConfig,
    pub augment: AugmentConfig,
    pub decomposer: DecomposerConfig,
    pub graspnet: GraspNetConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "graspkit", version, about = "Approach-conditioned grasp inference on decomposed objects")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the experiment file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Require reproducible artifacts; needs an explicit seed.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a dataset.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Number of train-object samples.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        novel_count: Option<usize>,
    },
    /// Write an augmented copy of a dataset.
    Augment {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Samples per train sample, the original included.
        #[arg(long, default_value_t = 2)]
        multiplier: usize,
    },
    /// Train the element decomposer.
    TrainDecomposer {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the grasp network on ground-truth masks.
    TrainGraspnet {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score decomposer plus grasp network and write report files.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Decomposer artifact directory, or `oracle`.
        #[arg(long)]
        decomposer: String,
        /// Grasp network artifact directory, or `oracle`.
        #[arg(long)]
        graspnet: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [SPLIT_VALIDATION.to_string(), SPLIT_NOVEL.to_string()])]
        splits: Vec<String>,
        #[arg(long)]
        mdc: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_values_t = [Format::Json, Format::Csv, Format::Svg])]
        formats: Vec<Format>,
    },
    /// Predict a grasp for one object image and approach image.
    Infer {
        #[arg(long)]
        decomposer: PathBuf,
        #[arg(long)]
        graspnet: PathBuf,
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        approach: PathBuf,
        #[arg(long)]
        mdc: Option<f64>,
        /// Write the object image with detections and the grasp drawn on it.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Directory for the run manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every sample and the split contract of a dataset.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        })
    }
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Svg => ReportFormat::Svg,
        }
    }
}

/// Provenance written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub deterministic: bool,
    pub seed: Option<u64>,
    pub config: ExperimentConfig,
    pub config_fingerprint: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// Resolved settings for one invocation.
pub struct RunConfig {
    pub common: Common,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn resolve(common: Common) -> Result<Self, CliError> {
        if common.deterministic && common.seed.is_none() {
            return Err(CliError::Config("--deterministic requires --seed".into()));
        }
        let mut experiment = ExperimentConfig::load(common.config.as_deref())?;
        if let Some(seed) = common.seed {
            experiment.generate.seed = seed;
            experiment.augment.seed = seed;
            experiment.decomposer.seed = seed;
            experiment.graspnet.seed = seed;
        }
        if common.deterministic {
            experiment.decomposer.deterministic = true;
            experiment.graspnet.deterministic = true;
        }
        Ok(Self { common, experiment })
    }

    fn manifest(&self, command: &str, args: &[String], inputs: Vec<String>, outputs: Vec<String>) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            deterministic: self.common.deterministic,
            seed: self.common.seed,
            config: self.experiment.clone(),
            config_fingerprint: crate::train::fingerprint(&self.experiment),
            inputs,
            outputs,
        }
    }
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    let path = dir.join(RUN_MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialises") + "\n";
    fs::write(&path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn require_dir(p: &Path) -> Result<(), CliError> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} is not a directory", p.display())))
    }
}

fn load_splits(root: &Path, splits: &[&str]) -> Result<Vec<Vec<Sample>>, CliError> {
    require_dir(root)?;
    splits.iter().map(|s| Ok(load_split(root, s)?)).collect()
}

fn read_rgb(path: &Path) -> Result<RgbImage, CliError> {
    Ok(image::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .to_rgb8())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run_from<I, S>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Other(e.to_string()),
        _ => CliError::Config(e.to_string()),
    })?;
    run(cli, &args[1..])
}

pub fn run(cli: Cli, args: &[String]) -> Result<(), CliError> {
    let rc = RunConfig::resolve(cli.common)?;
    match cli.command {
        Command::Generate { out, count, novel_count } => {
            let mut cfg = rc.experiment.generate.clone();
            cfg.count = count.unwrap_or(cfg.count);
            cfg.novel_count = novel_count.unwrap_or(cfg.novel_count);
            let manifest = generate_dataset(&cfg, &out)?;
            println!("generated {:?} into {}, checksum {}", manifest.split_counts, out.display(), manifest.checksum);
            let run = rc.manifest("generate", args, vec![], vec![display(&out)]);
            write_manifest(&out.join(RUNS_DIR).join("generate"), &run)
        }
        Command::Augment { dataset, out, multiplier } => {
            require_dir(&dataset)?;
            let manifest = augment_dataset(&dataset, &out, &rc.experiment.augment, multiplier)?;
            println!(
                "augmented into {}: {:?}, {} variants skipped",
                out.display(),
                manifest.split_counts,
                manifest.skipped
            );
            let run = rc.manifest("augment", args, vec![display(&dataset)], vec![display(&out)]);
            write_manifest(&out.join(RUNS_DIR).join("augment"), &run)
        }
        Command::TrainDecomposer { dataset, out, epochs } => {
            let mut cfg = rc.experiment.decomposer.clone();
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            let splits = load_splits(&dataset, &[SPLIT_TRAIN, SPLIT_VALIDATION])?;
            let (_, log) = train_decomposer(&splits[0], Some(&splits[1]), &cfg, Some(&out))?;
            if let Some(last) = log.last() {
                println!("decomposer trained: loss {:.5}, val dsc {:?}", last.loss, last.val_metric);
            }
            let run = rc.manifest("train-decomposer", args, vec![display(&dataset)], vec![display(&out)]);
            write_manifest(&out, &run)
        }
        Command::TrainGraspnet { dataset, out, epochs } => {
            let mut cfg = rc.experiment.graspnet.clone();
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            let splits = load_splits(&dataset, &[SPLIT_TRAIN, SPLIT_VALIDATION])?;
            let (_, log) = train_grasp_net(&splits[0], Some(&splits[1]), &cfg, Some(&out))?;
            if let Some(last) = log.last() {
                println!("grasp network trained: loss {:.5}, val success {:?}", last.loss, last.val_metric);
            }
            let run = rc.manifest("train-graspnet", args, vec![display(&dataset)], vec![display(&out)]);
            write_manifest(&out, &run)
        }
        Command::Evaluate {
            dataset,
            decomposer,
            graspnet,
            out,
            splits,
            mdc,
            thresholds,
            formats,
        } => {
            let mut cfg = rc.experiment.eval.clone();
            cfg.mdc = mdc.unwrap_or(cfg.mdc);
            if let Some(t) = thresholds {
                cfg.thresholds = t;
            }
            let names: Vec<&str> = splits.iter().map(String::as_str).collect();
            let samples: Vec<Sample> = load_splits(&dataset, &names)?.into_iter().flatten().collect();
            let mut meta = RunMeta {
                dataset_checksum: dataset_checksum(&dataset).ok(),
                ..RunMeta::default()
            };
            let (det_box, det_print): (Box<dyn ElementDetector>, _) = if decomposer == ORACLE {
                (Box::new(OracleDetector::new(&samples)), None)
            } else {
                let m = Decomposer::load(Path::new(&decomposer))?;
                let fp = m.fingerprint();
                (Box::new(m), Some(fp))
            };
            let (pred_box, pred_print): (Box<dyn GraspPredictor>, _) = if graspnet == ORACLE {
                (Box::new(OracleGraspPredictor::new(&samples)), None)
            } else {
                let m = GraspModel::load(Path::new(&graspnet))?;
                meta.notes.insert(
                    "approach_branch".into(),
                    serde_json::to_value(m.config.approach_branch).expect("enum").as_str().unwrap_or("").into(),
                );
                let fp = m.fingerprint();
                (Box::new(m), Some(fp))
            };
            meta.decomposer_fingerprint = det_print;
            meta.grasp_fingerprint = pred_print;
            meta.notes.insert("decomposer".into(), decomposer.clone());
            meta.notes.insert("graspnet".into(), graspnet.clone());
            let report = evaluate_pipeline(det_box.as_ref(), pred_box.as_ref(), &samples, &cfg, meta)?;
            let formats: Vec<ReportFormat> = formats.into_iter().map(Into::into).collect();
            let files = write_report(&report, &out, &formats)?;
            println!(
                "success {:.1}% over {} samples (seen {:?}, unseen {:?}), mean jaccard {:.1}%",
                report.overall.success_rate,
                report.overall.attempts,
                report.seen.as_ref().map(|s| s.success_rate),
                report.unseen.as_ref().map(|s| s.success_rate),
                report.overall.mean_jaccard
            );
            let run = rc.manifest(
                "evaluate",
                args,
                vec![display(&dataset), decomposer, graspnet],
                files.iter().map(|p| display(p)).collect(),
            );
            write_manifest(&out, &run)
        }
        Command::Infer {
            decomposer,
            graspnet,
            object,
            approach,
            mdc,
            overlay,
            out,
        } => {
            let det = Decomposer::load(&decomposer)?;
            let net = GraspModel::load(&graspnet)?;
            let object_image = read_rgb(&object)?;
            let approach_image = read_rgb(&approach)?;
            let mdc = mdc.unwrap_or(rc.experiment.eval.mdc);
            let detections = det.decompose(&object_image, mdc);
            let result = net.predict_grasp(&object_image, &approach_image, &detections);
            let grasp = match result {
                Err(GraspNetError::NoElementsDetected) => {
                    return Err(CliError::NoElementsDetected(display(&object)));
                }
                other => other?,
            };
            let summary = serde_json::json!({
                "grasp": grasp,
                "detections": detections.iter().map(|d| serde_json::json!({
                    "class": d.element_class.name(),
                    "confidence": d.confidence,
                    "area_px": d.mask.count(),
                })).collect::<Vec<_>>(),
                "mdc": mdc,
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            let mut outputs = Vec::new();
            if let Some(path) = &overlay {
                let img = draw_overlay(&object_image, &detections, &grasp);
                img.save(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
                outputs.push(display(path));
            }
            if let Some(dir) = out {
                let run = rc.manifest(
                    "infer",
                    args,
                    vec![display(&decomposer), display(&graspnet), display(&object), display(&approach)],
                    outputs,
                );
                write_manifest(&dir, &run)?;
            }
            Ok(())
        }
        Command::Validate { dataset } => {
            require_dir(&dataset)?;
            let violations = validate_dataset(&dataset);
            for v in &violations {
                eprintln!("{v}");
            }
            if violations.is_empty() {
                println!("{}: no violations", dataset.display());
                Ok(())
            } else {
                Err(CliError::Data(format!("{} violations in {}", violations.len(), dataset.display())))
            }
        }
    }
}

const DETECTION_TINTS: [[u8; 3]; 3] = [[230, 80, 60], [60, 160, 230], [90, 200, 90]];

/// Object image with detections tinted and the grasp rectangle outlined:
/// fingertip edges in red, jaw-travel edges in blue.
pub fn draw_overlay(
    object_image: &RgbImage,
    detections: &[crate::decomposer::Detection],
    grasp: &GraspRectangle,
) -> RgbImage {
    let mut img = object_image.clone();
    for (d, tint) in detections.iter().zip(DETECTION_TINTS) {
        for (x, y) in d.mask.iter_set() {
            let p = img.get_pixel_mut(x, y);
            for c in 0..3 {
                p.0[c] = ((p.0[c] as u16 * 3 + tint[c] as u16 * 2) / 5) as u8;
            }
        }
    }
    let c = grasp.corners();
    let jaw = Point2::new(grasp.theta_deg.to_radians().cos(), grasp.theta_deg.to_radians().sin());
    for k in 0..4 {
        let (a, b) = (c[k], c[(k + 1) % 4]);
        let along_jaw = ((b.x - a.x) * jaw.x + (b.y - a.y) * jaw.y).abs() > 0.5 * a.distance(b);
        let color = if along_jaw { [40, 90, 255] } else { [255, 30, 30] };
        draw_segment(&mut img, a, b, 2.0, color);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<(), CliError> {
        run_from(std::iter::once("graspkit").chain(args.iter().copied()))
    }

    #[test]
    fn deterministic_needs_a_seed() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d");
        let e = run_args(&["--deterministic", "generate", "--out", out.to_str().unwrap(), "--count", "2"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn bad_config_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("x.toml");
        fs::write(&cfg, "[decomposer]\nepochz = 3\n").unwrap();
        let out = dir.path().join("d");
        let e = run_args(&["--config", cfg.to_str().unwrap(), "generate", "--out", out.to_str().unwrap()]).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }

    #[test]
    fn missing_dataset_is_a_data_error() {
        let e = run_args(&["validate", "--dataset", "/nonexistent/graspkit"]).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn overlay_marks_the_rectangle() {
        let img = RgbImage::from_pixel(64, 64, image::Rgb([128, 128, 128]));
        let g = GraspRectangle::new(32.0, 32.0, 0.0, 20.0, 10.0).unwrap();
        let o = draw_overlay(&img, &[], &g);
        // fingertip edges are vertical at x = 22 and x = 42 for theta 0
        assert_eq!(o.get_pixel(22, 32).0, [255, 30, 30]);
        assert_eq!(o.get_pixel(32, 27).0, [40, 90, 255]);
        assert_eq!(o.get_pixel(32, 32).0, [128, 128, 128]);
    }
}
