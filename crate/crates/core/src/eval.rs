//! End-to-end scoring of decomposer plus grasp network, and the report
//! files derived from it.

use crate::dataset::{Sample, SeenSplit};
use crate::decomposer::{evaluate_decomposer, DscTable, ElementDetector};
use crate::geometry::{angle_diff, jaccard, success_criterion, GraspRectangle, DEFAULT_ANGLE_THRESHOLD_DEG};
use crate::graspnet::{GraspNetError, GraspPredictor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.20, 0.25, 0.30, 0.35];
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("sample {id}: {source}")]
    Predictor {
        id: String,
        #[source]
        source: GraspNetError,
    },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("report invariant violated: {0}")]
    Invariant(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mdc: f64,
    /// Ascending Jaccard thresholds of the sweep.
    pub thresholds: Vec<f64>,
    /// Threshold behind the headline rates; must be one of `thresholds`.
    pub primary_threshold: f64,
    pub angle_threshold_deg: f64,
    /// MDC values of the decomposition table; empty skips it.
    pub dsc_mdc: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mdc: 0.85,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            primary_threshold: 0.25,
            angle_threshold_deg: DEFAULT_ANGLE_THRESHOLD_DEG,
            dsc_mdc: vec![0.8, 0.85, 0.9],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidThresholds(m));
        if self.thresholds.is_empty() {
            return bad("no thresholds".into());
        }
        if self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad(format!("{:?} not all in [0, 1]", self.thresholds));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("{:?} not strictly ascending", self.thresholds));
        }
        if !self.thresholds.contains(&self.primary_threshold) {
            return bad(format!("primary threshold {} is not in the sweep", self.primary_threshold));
        }
        if !(self.angle_threshold_deg > 0.0 && self.angle_threshold_deg <= 90.0) {
            return bad(format!("angle threshold {}", self.angle_threshold_deg));
        }
        if !(0.0..=1.0).contains(&self.mdc) {
            return bad(format!("mdc {} not in [0, 1]", self.mdc));
        }
        Ok(())
    }

    fn primary_index(&self) -> usize {
        self.thresholds
            .iter()
            .position(|t| *t == self.primary_threshold)
            .expect("validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    NoElements,
    AngleFail,
    JaccardFail,
    Both,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::NoElements => "no-elements",
            FailureKind::AngleFail => "angle-fail",
            FailureKind::JaccardFail => "jaccard-fail",
            FailureKind::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub object_name: String,
    pub seen_split: SeenSplit,
    pub detections: usize,
    pub predicted: Option<GraspRectangle>,
    /// 0 when nothing was predicted.
    pub jaccard: f64,
    pub angle_error_deg: Option<f64>,
    /// Success at each sweep threshold.
    pub success: Vec<bool>,
    /// Why the primary-threshold attempt failed.
    pub failure: Option<FailureKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub successes: usize,
    pub attempts: usize,
}

impl Tally {
    /// Percent, `None` without attempts.
    pub fn rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| 100.0 * self.successes as f64 / self.attempts as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub object_name: String,
    pub seen_split: SeenSplit,
    /// One tally per sweep threshold.
    pub tallies: Vec<Tally>,
    pub mean_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub attempts: usize,
    pub successes: usize,
    /// Percent at the primary threshold.
    pub success_rate: f64,
    /// Percent, failures counted as 0.
    pub mean_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub seen: Option<f64>,
    pub unseen: Option<f64>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub decomposer_fingerprint: Option<String>,
    pub grasp_fingerprint: Option<String>,
    pub dataset_checksum: Option<String>,
    /// Free-form provenance such as the approach branch type.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub version: u32,
    pub config: EvalConfig,
    pub meta: RunMeta,
    pub per_object: Vec<ObjectRow>,
    pub seen: Option<SplitSummary>,
    pub unseen: Option<SplitSummary>,
    pub overall: SplitSummary,
    pub sweep: Vec<SweepRow>,
    pub failures: BTreeMap<FailureKind, usize>,
    pub dsc: Option<DscTable>,
    pub samples: Vec<SampleOutcome>,
}

fn score(
    s: &Sample,
    detector: &dyn ElementDetector,
    predictor: &dyn GraspPredictor,
    cfg: &EvalConfig,
) -> Result<SampleOutcome, EvalError> {
    let detections = detector.detect(&s.id, &s.object_image, cfg.mdc);
    let predicted = match predictor.predict(&s.id, &s.object_image, &s.approach_image, &detections) {
        Ok(g) => Some(g),
        Err(GraspNetError::NoElementsDetected) => None,
        Err(source) => {
            return Err(EvalError::Predictor {
                id: s.id.clone(),
                source,
            })
        }
    };
    let (j, angle) = match &predicted {
        Some(g) => (jaccard(g, &s.grasp), Some(angle_diff(g.theta_deg, s.grasp.theta_deg))),
        None => (0.0, None),
    };
    let success: Vec<bool> = cfg
        .thresholds
        .iter()
        .map(|&t| angle.is_some_and(|a| success_criterion(j, a, t, cfg.angle_threshold_deg)))
        .collect();
    let failure = match angle {
        None => Some(FailureKind::NoElements),
        Some(_) if success[cfg.primary_index()] => None,
        Some(a) => {
            let angle_ok = success_criterion(1.0, a, 0.0, cfg.angle_threshold_deg);
            let jac_ok = success_criterion(j, 0.0, cfg.primary_threshold, cfg.angle_threshold_deg);
            Some(match (angle_ok, jac_ok) {
                (false, false) => FailureKind::Both,
                (false, true) => FailureKind::AngleFail,
                _ => FailureKind::JaccardFail,
            })
        }
    };
    Ok(SampleOutcome {
        id: s.id.clone(),
        object_name: s.object_name.clone(),
        seen_split: s.seen_split,
        detections: detections.len(),
        predicted,
        jaccard: j,
        angle_error_deg: angle,
        success,
        failure,
    })
}

fn summarize<'a>(outcomes: impl Iterator<Item = &'a SampleOutcome>, k: usize) -> Option<SplitSummary> {
    let (mut n, mut hits, mut jsum) = (0usize, 0usize, 0.0f64);
    for o in outcomes {
        n += 1;
        hits += o.success[k] as usize;
        jsum += o.jaccard;
    }
    (n > 0).then(|| SplitSummary {
        attempts: n,
        successes: hits,
        success_rate: 100.0 * hits as f64 / n as f64,
        mean_jaccard: 100.0 * jsum / n as f64,
    })
}

/// Runs every sample through decomposition and grasp prediction. A sample
/// without detections fails at every threshold.
pub fn evaluate_pipeline(
    detector: &dyn ElementDetector,
    predictor: &dyn GraspPredictor,
    samples: &[Sample],
    cfg: &EvalConfig,
    meta: RunMeta,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .map(|s| score(s, detector, predictor, cfg))
        .collect::<Result<_, _>>()?;
    let report = aggregate(cfg, meta, outcomes, None);
    let dsc = (!cfg.dsc_mdc.is_empty()).then(|| evaluate_decomposer(detector, samples, &cfg.dsc_mdc));
    let report = EvalReport { dsc, ..report };
    report.check()?;
    Ok(report)
}

/// Builds a report from per-sample outcomes.
pub fn aggregate(cfg: &EvalConfig, meta: RunMeta, samples: Vec<SampleOutcome>, dsc: Option<DscTable>) -> EvalReport {
    let k = cfg.primary_index();
    let mut objects: BTreeMap<(SeenSplit, String), Vec<&SampleOutcome>> = BTreeMap::new();
    for o in &samples {
        objects.entry((o.seen_split, o.object_name.clone())).or_default().push(o);
    }
    let per_object = objects
        .into_iter()
        .map(|((split, name), os)| ObjectRow {
            object_name: name,
            seen_split: split,
            tallies: (0..cfg.thresholds.len())
                .map(|t| Tally {
                    successes: os.iter().filter(|o| o.success[t]).count(),
                    attempts: os.len(),
                })
                .collect(),
            mean_jaccard: 100.0 * os.iter().map(|o| o.jaccard).sum::<f64>() / os.len() as f64,
        })
        .collect();
    let of = |split: SeenSplit| samples.iter().filter(move |o| o.seen_split == split);
    let sweep = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(t, &threshold)| SweepRow {
            threshold,
            seen: summarize(of(SeenSplit::TrainObject), t).map(|s| s.success_rate),
            unseen: summarize(of(SeenSplit::NovelObject), t).map(|s| s.success_rate),
            overall: summarize(samples.iter(), t).map_or(0.0, |s| s.success_rate),
        })
        .collect();
    let mut failures = BTreeMap::new();
    for f in samples.iter().filter_map(|o| o.failure) {
        *failures.entry(f).or_insert(0) += 1;
    }
    EvalReport {
        version: REPORT_VERSION,
        config: cfg.clone(),
        meta,
        per_object,
        seen: summarize(of(SeenSplit::TrainObject), k),
        unseen: summarize(of(SeenSplit::NovelObject), k),
        overall: summarize(samples.iter(), k).unwrap_or(SplitSummary {
            attempts: 0,
            successes: 0,
            success_rate: 0.0,
            mean_jaccard: 0.0,
        }),
        sweep,
        failures,
        dsc,
        samples,
    }
}

impl EvalReport {
    /// Verifies the internal consistency of the report.
    pub fn check(&self) -> Result<(), EvalError> {
        let fail = |m: String| Err(EvalError::Invariant(m));
        let k = self.config.primary_index();
        let in_range = |r: f64| (0.0..=100.0).contains(&r);
        for row in &self.sweep {
            let rates = [row.seen, row.unseen, Some(row.overall)];
            if !rates.into_iter().flatten().all(in_range) {
                return fail(format!("rate outside [0, 100] at threshold {}", row.threshold));
            }
        }
        for w in self.sweep.windows(2) {
            let pairs = [(w[0].seen, w[1].seen), (w[0].unseen, w[1].unseen), (Some(w[0].overall), Some(w[1].overall))];
            if pairs.iter().any(|(a, b)| matches!((a, b), (Some(a), Some(b)) if b > a)) {
                return fail(format!("sweep rises between {} and {}", w[0].threshold, w[1].threshold));
            }
        }
        let attempts: usize = self.per_object.iter().map(|r| r.tallies[k].attempts).sum();
        if attempts != self.samples.len() || self.overall.attempts != self.samples.len() {
            return fail("per-object attempts do not add up to the split size".into());
        }
        let successes: usize = self.per_object.iter().map(|r| r.tallies[k].successes).sum();
        if successes != self.overall.successes {
            return fail("per-object successes do not add up".into());
        }
        let weighted: f64 = [&self.seen, &self.unseen]
            .into_iter()
            .flatten()
            .map(|s| s.success_rate * s.attempts as f64)
            .sum::<f64>()
            / self.overall.attempts.max(1) as f64;
        if (weighted - self.overall.success_rate).abs() > 1e-9 {
            return fail("overall rate is not the attempts-weighted split mean".into());
        }
        for s in [&self.seen, &self.unseen, &Some(self.overall.clone())].into_iter().flatten() {
            if !in_range(s.success_rate) || !in_range(s.mean_jaccard) || s.successes > s.attempts {
                return fail("split summary out of range".into());
            }
        }
        let failed = self.samples.iter().filter(|o| !o.success[k]).count();
        if failed != self.failures.values().sum::<usize>() {
            return fail("failure taxonomy does not cover every failure".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

/// Writes the requested formats into `dir` and returns the created files.
pub fn write_report(report: &EvalReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, EvalError> {
    report.check()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<(), EvalError> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            ReportFormat::Json => put(
                REPORT_FILE,
                serde_json::to_string_pretty(report).expect("report serialises") + "\n",
            )?,
            ReportFormat::Csv => {
                put("summary.csv", summary_csv(report))?;
                put("sweep.csv", sweep_csv(report))?;
                put("per_object.csv", per_object_csv(report))?;
                put("failures.csv", failures_csv(report))?;
                if let Some(d) = &report.dsc {
                    put("dsc.csv", dsc_csv(d))?;
                }
            }
            ReportFormat::Svg => {
                put("sweep.svg", sweep_svg(report))?;
                put("per_object.svg", per_object_svg(report))?;
            }
        }
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<EvalReport, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let report: EvalReport = serde_json::from_str(&text).map_err(|e| EvalError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if report.version != REPORT_VERSION {
        return Err(EvalError::Schema {
            path: path.to_path_buf(),
            message: format!("report version {} is not supported", report.version),
        });
    }
    Ok(report)
}

fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

fn pct(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.1}"))
}

fn split_name(s: SeenSplit) -> &'static str {
    match s {
        SeenSplit::TrainObject => "seen",
        SeenSplit::NovelObject => "unseen",
    }
}

fn summary_csv(r: &EvalReport) -> String {
    let mut rows = vec![vec!["split".into(), "attempts".into(), "success_rate".into(), "mean_jaccard".into()]];
    for (name, s) in [("seen", &r.seen), ("unseen", &r.unseen), ("overall", &Some(r.overall.clone()))] {
        if let Some(s) = s {
            rows.push(vec![
                name.into(),
                s.attempts.to_string(),
                pct(Some(s.success_rate)),
                pct(Some(s.mean_jaccard)),
            ]);
        }
    }
    csv_text(rows)
}

/// Thresholds as columns, splits as rows.
fn sweep_csv(r: &EvalReport) -> String {
    let mut header = vec!["split".to_string()];
    header.extend(r.sweep.iter().map(|s| format!("{:.2}", s.threshold)));
    let mut rows = vec![header];
    let lines: [(&str, Box<dyn Fn(&SweepRow) -> Option<f64>>); 3] = [
        ("seen", Box::new(|s: &SweepRow| s.seen)),
        ("unseen", Box::new(|s: &SweepRow| s.unseen)),
        ("overall", Box::new(|s: &SweepRow| Some(s.overall))),
    ];
    for (name, get) in lines {
        if r.sweep.iter().any(|s| get(s).is_some()) {
            let mut row = vec![name.to_string()];
            row.extend(r.sweep.iter().map(|s| pct(get(s))));
            rows.push(row);
        }
    }
    csv_text(rows)
}

fn per_object_csv(r: &EvalReport) -> String {
    let k = r.config.primary_index();
    let mut rows = vec![["object", "split", "successes", "attempts", "success_rate", "mean_jaccard"]
        .map(String::from)
        .to_vec()];
    for o in &r.per_object {
        let t = o.tallies[k];
        rows.push(vec![
            o.object_name.clone(),
            split_name(o.seen_split).into(),
            t.successes.to_string(),
            t.attempts.to_string(),
            pct(t.rate()),
            pct(Some(o.mean_jaccard)),
        ]);
    }
    csv_text(rows)
}

fn failures_csv(r: &EvalReport) -> String {
    let mut rows = vec![vec!["failure".to_string(), "count".to_string()]];
    for (k, n) in &r.failures {
        rows.push(vec![k.name().into(), n.to_string()]);
    }
    csv_text(rows)
}

/// Classes as rows, MDC values as columns.
fn dsc_csv(d: &DscTable) -> String {
    let mut header = vec!["class".to_string(), "instances".to_string()];
    header.extend(d.mdc.iter().map(|m| format!("mdc_{m:.2}")));
    let mut rows = vec![header];
    for row in &d.rows {
        let mut line = vec![row.label.clone(), row.instances.to_string()];
        line.extend(row.values.iter().map(|v| pct(*v)));
        rows.push(line);
    }
    csv_text(rows)
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 300.0;
const PAD: f64 = 44.0;

fn svg_frame(title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n",
        SVG_W / 2.0
    );
    let (x0, y0, y1) = (PAD, SVG_H - PAD, PAD);
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>", SVG_W - PAD / 2.0);
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>");
    for pctv in [0, 25, 50, 75, 100] {
        let y = y0 - (y0 - y1) * pctv as f64 / 100.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{pctv}</text>", x0 - 4.0, y + 4.0);
        let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>", SVG_W - PAD / 2.0);
    }
    s
}

fn sweep_svg(r: &EvalReport) -> String {
    let mut s = svg_frame("Success rate by Jaccard threshold");
    let n = r.sweep.len().max(2) as f64 - 1.0;
    let x = |i: usize| PAD + (SVG_W - 1.5 * PAD) * i as f64 / n;
    let y = |v: f64| (SVG_H - PAD) - (SVG_H - 2.0 * PAD) * v / 100.0;
    for (i, row) in r.sweep.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{:.2}</text>",
            x(i),
            SVG_H - PAD + 16.0,
            row.threshold
        );
    }
    let series: [(&str, &str, Vec<Option<f64>>); 3] = [
        ("seen", "#1f77b4", r.sweep.iter().map(|s| s.seen).collect()),
        ("unseen", "#d62728", r.sweep.iter().map(|s| s.unseen).collect()),
        ("overall", "#333333", r.sweep.iter().map(|s| Some(s.overall)).collect()),
    ];
    for (k, (name, color, vals)) in series.iter().enumerate() {
        let pts: Vec<String> = vals
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| format!("{:.1},{:.1}", x(i), y(v))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", pts.join(" "));
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{name}</text>",
            SVG_W - PAD * 2.0,
            PAD + 14.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

fn per_object_svg(r: &EvalReport) -> String {
    let mut s = svg_frame("Success rate per object");
    let k = r.config.primary_index();
    let n = r.per_object.len().max(1) as f64;
    let slot = (SVG_W - 1.5 * PAD) / n;
    for (i, o) in r.per_object.iter().enumerate() {
        let v = o.tallies[k].rate().unwrap_or(0.0);
        let h = (SVG_H - 2.0 * PAD) * v / 100.0;
        let x = PAD + slot * i as f64 + slot * 0.15;
        let color = if o.seen_split == SeenSplit::TrainObject { "#1f77b4" } else { "#d62728" };
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{color}\"/>",
            SVG_H - PAD - h,
            slot * 0.7
        );
        let (tx, ty) = (x + slot * 0.35, SVG_H - PAD + 12.0);
        let _ = writeln!(
            s,
            "<text x=\"{tx:.1}\" y=\"{ty}\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-35 {tx:.1} {ty})\">{}</text>",
            o.object_name
        );
    }
    s.push_str("</svg>\n");
    s
}
