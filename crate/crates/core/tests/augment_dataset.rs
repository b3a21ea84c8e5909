use graspkit::augment::{augment_dataset, AugmentConfig};
use graspkit::dataset::{generate_dataset, load_split, validate_dataset, GenerateConfig};
use std::path::Path;

fn small_dataset(root: &Path) {
    let cfg = GenerateConfig { count: 10, novel_count: 2, seed: 9, ..Default::default() };
    generate_dataset(&cfg, root).unwrap();
}

#[test]
fn multiplier_scales_train_and_leaves_other_splits_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    small_dataset(&src);
    let train = load_split(&src, "train").unwrap().len();
    let val = load_split(&src, "validation").unwrap().len();

    let one = augment_dataset(&src, &tmp.path().join("x1"), &AugmentConfig::default(), 1).unwrap();
    assert_eq!(one.split_counts["train"], train);

    let dst = tmp.path().join("x3");
    let three = augment_dataset(&src, &dst, &AugmentConfig::default(), 3).unwrap();
    assert_eq!(three.split_counts["train"] + three.skipped, 3 * train);
    assert_eq!(three.split_counts["validation"], val);
    assert_eq!(load_split(&dst, "validation").unwrap(), load_split(&src, "validation").unwrap());
    assert!(validate_dataset(&dst).is_empty());
    let variants = load_split(&dst, "train").unwrap();
    assert!(variants.iter().filter(|s| s.id.contains("_a")).all(|s| !s.transforms.is_empty()));
}

#[test]
fn augmentation_is_deterministic_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    small_dataset(&src);
    let cfg = AugmentConfig::default();
    let a = augment_dataset(&src, &tmp.path().join("a"), &cfg, 2).unwrap();
    let b = augment_dataset(&src, &tmp.path().join("b"), &cfg, 2).unwrap();
    assert_eq!(a.checksum, b.checksum);
}

#[test]
fn refuses_a_non_empty_destination() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    small_dataset(&src);
    assert!(augment_dataset(&src, &src, &AugmentConfig::default(), 2).is_err());
    assert!(augment_dataset(&src, &tmp.path().join("z"), &AugmentConfig::default(), 0).is_err());
}
