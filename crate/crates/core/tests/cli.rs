use graspkit::dataset::TABLE_RGB;
use graspkit::decomposer::{Decomposer, DecomposerConfig};
use graspkit::eval::{read_report, REPORT_FILE};
use graspkit::graspnet::{GraspModel, GraspNetConfig};
use std::path::Path;
use std::process::{Command, Output};

fn graspkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graspkit")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(root: &Path) {
    let out = graspkit(&["generate", "--out", path(root), "--count", "10", "--novel-count", "3", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generated_dataset_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data);
    let out = graspkit(&["validate", "--dataset", path(&data)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn oracle_pipeline_scores_every_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let report = tmp.path().join("report");
    generate(&data);
    let out = graspkit(&[
        "evaluate", "--dataset", path(&data), "--decomposer", "oracle", "--graspnet", "oracle", "--out", path(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&report.join(REPORT_FILE)).unwrap();
    assert_eq!(r.overall.successes, r.overall.attempts);
    assert!((r.overall.success_rate - 100.0).abs() < 1e-9);
    assert!(report.join("sweep.svg").exists());
}

#[test]
fn empty_scene_exits_with_no_elements_code() {
    let tmp = tempfile::tempdir().unwrap();
    let (det, net) = (tmp.path().join("det"), tmp.path().join("net"));
    Decomposer::new(DecomposerConfig::default()).unwrap().save(&det).unwrap();
    GraspModel::new(GraspNetConfig::default()).unwrap().save(&net).unwrap();
    let blank = image::RgbImage::from_pixel(224, 224, image::Rgb(TABLE_RGB));
    let object = tmp.path().join("object.png");
    blank.save(&object).unwrap();
    let out = graspkit(&[
        "infer", "--decomposer", path(&det), "--graspnet", path(&net), "--object", path(&object), "--approach",
        path(&object),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[graspnet]\nepochs = \"many\"\n").unwrap();
    let out = graspkit(&["--config", path(&cfg), "validate", "--dataset", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_records_do_not_disturb_augmentation() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, aug) = (tmp.path().join("data"), tmp.path().join("aug"));
    generate(&data);
    let out = graspkit(&["augment", "--dataset", path(&data), "--out", path(&aug), "--multiplier", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!aug.join("runs").join("generate").exists());
    assert_eq!(graspkit(&["validate", "--dataset", path(&aug)]).status.code(), Some(0));
}
