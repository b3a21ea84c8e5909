use graspkit::dataset::{generate_samples, GenerateConfig, Sample};
use graspkit::decomposer::{Decomposer, DecomposerConfig};
use graspkit::graspnet::{GraspModel, GraspNetConfig};
use graspkit_ffi::*;
use std::ffi::CString;
use std::path::Path;

fn sample() -> Sample {
    let cfg = GenerateConfig {
        count: 1,
        novel_count: 0,
        seed: 8,
        ..GenerateConfig::default()
    };
    generate_samples(&cfg).unwrap().remove(0).sample
}

fn small_graspnet() -> GraspModel {
    GraspModel::new(GraspNetConfig {
        part_channels: vec![4, 6, 8],
        approach_channels: vec![3, 4, 6, 8],
        approach_depth: 8,
        fused_depth: 16,
        fusion_channels: vec![8, 4],
        input_size: 16,
        ..GraspNetConfig::default()
    })
    .unwrap()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn handles_round_trip_and_infer_matches_the_library() {
    let s = sample();
    let dir = tempfile::tempdir().unwrap();
    let dec_dir = dir.path().join("dec");
    let net_dir = dir.path().join("net");
    let dec = Decomposer::new(DecomposerConfig {
        input_size: 16,
        base_channels: 4,
        ..DecomposerConfig::default()
    })
    .unwrap();
    dec.save(&dec_dir).unwrap();
    let net = small_graspnet();
    net.save(&net_dir).unwrap();

    let (mut d, mut n) = (std::ptr::null_mut(), std::ptr::null_mut());
    unsafe {
        assert_eq!(gk_decomposer_load(cpath(&dec_dir).as_ptr(), &mut d), GkStatus::Ok);
        assert_eq!(gk_graspnet_load(cpath(&net_dir).as_ptr(), &mut n), GkStatus::Ok);
        // swapped kinds are rejected
        let mut wrong = std::ptr::null_mut();
        assert_eq!(gk_graspnet_load(cpath(&dec_dir).as_ptr(), &mut wrong), GkStatus::Model);
    }
    let (w, h) = s.object_image.dimensions();
    let mut count = 99;
    let status = unsafe { gk_decompose_count(d, s.object_image.as_raw().as_ptr(), w, h, 0.01, &mut count) };
    assert_eq!(status, GkStatus::Ok);
    let expected = dec.decompose(&s.object_image, 0.01);
    assert_eq!(count as usize, expected.len());

    let mut g = GkGrasp {
        cx: 0.0,
        cy: 0.0,
        theta_deg: 0.0,
        width_px: 0.0,
        height_px: 0.0,
    };
    let status = unsafe {
        gk_infer(d, n, s.object_image.as_raw().as_ptr(), s.approach_image.as_raw().as_ptr(), w, h, 0.01, &mut g)
    };
    if expected.is_empty() {
        assert_eq!(status, GkStatus::NoElementsDetected);
    } else {
        assert_eq!(status, GkStatus::Ok);
        let direct = net.predict_grasp(&s.object_image, &s.approach_image, &expected).unwrap();
        assert_eq!(g, GkGrasp::from(direct));
    }
    // a blank table never yields elements
    let blank = vec![0u8; (w * h * 3) as usize];
    let status = unsafe { gk_infer(d, n, blank.as_ptr(), blank.as_ptr(), w, h, 0.99, &mut g) };
    assert_eq!(status, GkStatus::NoElementsDetected);
    unsafe {
        gk_decomposer_free(d);
        gk_graspnet_free(n);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/graspkit.h")).unwrap();
    for name in [
        "gk_decomposer_load",
        "gk_decomposer_free",
        "gk_graspnet_load",
        "gk_graspnet_free",
        "gk_infer",
        "gk_decompose_count",
        "gk_jaccard",
        "gk_grasp_success",
        "gk_last_error_message",
        "GK_STATUS_NO_ELEMENTS_DETECTED",
        "typedef struct GkDecomposer GkDecomposer",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
