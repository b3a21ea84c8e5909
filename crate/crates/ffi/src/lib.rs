//! C ABI over graspkit inference and grasp metrics.
//!
//! Models are opaque handles created by the `*_load` functions and released
//! by the matching `*_free`. Every fallible call returns a [`GkStatus`];
//! on failure a message is kept per thread and read with
//! [`gk_last_error_message`]. Images are tightly packed 8-bit RGB, row-major.

use graspkit::decomposer::{Decomposer, DecomposerError};
use graspkit::geometry::{grasp_success, jaccard, GraspRectangle};
use graspkit::graspnet::{GraspModel, GraspNetError};
use graspkit::train::ArtifactError;
use image::RgbImage;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Model = 4,
    NoElementsDetected = 5,
    Panic = 6,
}

/// Oriented grasp rectangle in pixels and degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkGrasp {
    pub cx: f64,
    pub cy: f64,
    pub theta_deg: f64,
    pub width_px: f64,
    pub height_px: f64,
}

impl From<GraspRectangle> for GkGrasp {
    fn from(g: GraspRectangle) -> Self {
        Self {
            cx: g.cx,
            cy: g.cy,
            theta_deg: g.theta_deg,
            width_px: g.width_px,
            height_px: g.height_px,
        }
    }
}

impl GkGrasp {
    fn to_rect(self) -> Result<GraspRectangle, (GkStatus, String)> {
        GraspRectangle::new(self.cx, self.cy, self.theta_deg, self.width_px, self.height_px)
            .map_err(|e| (GkStatus::InvalidArgument, e.to_string()))
    }
}

/// Opaque decomposer handle.
pub struct GkDecomposer(Decomposer);

/// Opaque grasp network handle.
pub struct GkGraspNet(GraspModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (GkStatus, String)>) -> GkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GkStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GkStatus::Panic
        }
    }
}

fn artifact_status(e: &ArtifactError) -> GkStatus {
    match e {
        ArtifactError::Io { .. } => GkStatus::Io,
        _ => GkStatus::Model,
    }
}

fn null(what: &str) -> (GkStatus, String) {
    (GkStatus::NullArgument, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (GkStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GkStatus::InvalidArgument, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

unsafe fn image_arg(rgb: *const u8, width: u32, height: u32) -> Result<RgbImage, (GkStatus, String)> {
    if rgb.is_null() {
        return Err(null("image"));
    }
    if width == 0 || height == 0 {
        return Err((GkStatus::InvalidArgument, "image has zero size".into()));
    }
    let len = width as usize * height as usize * 3;
    let data = std::slice::from_raw_parts(rgb, len).to_vec();
    RgbImage::from_raw(width, height, data).ok_or((GkStatus::InvalidArgument, "image buffer too small".into()))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a decomposer artifact directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gk_decomposer_load(path: *const c_char, out: *mut *mut GkDecomposer) -> GkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = path_arg(path)?;
        let model = Decomposer::load(&dir).map_err(|e| {
            let status = match &e {
                DecomposerError::Artifact(a) => artifact_status(a),
                _ => GkStatus::Model,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(GkDecomposer(model)));
        Ok(())
    })
}

/// Releases a decomposer; null is ignored.
///
/// # Safety
/// `handle` must come from [`gk_decomposer_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gk_decomposer_free(handle: *mut GkDecomposer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Loads a grasp network artifact directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gk_graspnet_load(path: *const c_char, out: *mut *mut GkGraspNet) -> GkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = path_arg(path)?;
        let model = GraspModel::load(&dir).map_err(|e| {
            let status = match &e {
                GraspNetError::Artifact(a) => artifact_status(a),
                _ => GkStatus::Model,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(GkGraspNet(model)));
        Ok(())
    })
}

/// Releases a grasp network; null is ignored.
///
/// # Safety
/// `handle` must come from [`gk_graspnet_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gk_graspnet_free(handle: *mut GkGraspNet) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of elements found at confidence `mdc` (0 to 3).
///
/// # Safety
/// `rgb` must point to `width * height * 3` bytes; the other pointers must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_decompose_count(
    decomposer: *const GkDecomposer,
    rgb: *const u8,
    width: u32,
    height: u32,
    mdc: f64,
    out_count: *mut u32,
) -> GkStatus {
    guard(|| {
        let det = decomposer.as_ref().ok_or_else(|| null("decomposer"))?;
        if out_count.is_null() {
            return Err(null("out_count"));
        }
        if !(mdc > 0.0 && mdc <= 1.0) {
            return Err((GkStatus::InvalidArgument, format!("mdc {mdc} not in (0, 1]")));
        }
        let img = image_arg(rgb, width, height)?;
        *out_count = det.0.decompose(&img, mdc).len() as u32;
        Ok(())
    })
}

/// Decomposes the object image and predicts one grasp for the approach.
/// Returns [`GkStatus::NoElementsDetected`] when nothing passes `mdc`.
///
/// # Safety
/// Both images must point to `width * height * 3` bytes; the other pointers
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_infer(
    decomposer: *const GkDecomposer,
    graspnet: *const GkGraspNet,
    object_rgb: *const u8,
    approach_rgb: *const u8,
    width: u32,
    height: u32,
    mdc: f64,
    out: *mut GkGrasp,
) -> GkStatus {
    guard(|| {
        let det = decomposer.as_ref().ok_or_else(|| null("decomposer"))?;
        let net = graspnet.as_ref().ok_or_else(|| null("graspnet"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(mdc > 0.0 && mdc <= 1.0) {
            return Err((GkStatus::InvalidArgument, format!("mdc {mdc} not in (0, 1]")));
        }
        let object = image_arg(object_rgb, width, height)?;
        let approach = image_arg(approach_rgb, width, height)?;
        let detections = det.0.decompose(&object, mdc);
        let g = net.0.predict_grasp(&object, &approach, &detections).map_err(|e| match e {
            GraspNetError::NoElementsDetected => (GkStatus::NoElementsDetected, e.to_string()),
            other => (GkStatus::Model, other.to_string()),
        })?;
        *out = g.into();
        Ok(())
    })
}

/// Intersection over union of two grasp rectangles.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_jaccard(a: *const GkGrasp, b: *const GkGrasp, out: *mut f64) -> GkStatus {
    guard(|| {
        let (a, b) = (a.as_ref().ok_or_else(|| null("a"))?, b.as_ref().ok_or_else(|| null("b"))?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = jaccard(&a.to_rect()?, &b.to_rect()?);
        Ok(())
    })
}

/// Rectangle-metric success of `predicted` against `truth`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_grasp_success(
    predicted: *const GkGrasp,
    truth: *const GkGrasp,
    jaccard_threshold: f64,
    angle_threshold_deg: f64,
    out: *mut bool,
) -> GkStatus {
    guard(|| {
        let p = predicted.as_ref().ok_or_else(|| null("predicted"))?;
        let t = truth.as_ref().ok_or_else(|| null("truth"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = grasp_success(&p.to_rect()?, &t.to_rect()?, jaccard_threshold, angle_threshold_deg);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(cx: f64, theta: f64) -> GkGrasp {
        GkGrasp {
            cx,
            cy: 50.0,
            theta_deg: theta,
            width_px: 20.0,
            height_px: 10.0,
        }
    }

    #[test]
    fn metrics_through_the_abi() {
        let (a, b) = (rect(50.0, 0.0), rect(50.0, 0.0));
        let mut j = 0.0;
        assert_eq!(unsafe { gk_jaccard(&a, &b, &mut j) }, GkStatus::Ok);
        assert!((j - 1.0).abs() < 1e-12);
        let mut ok = false;
        let c = rect(50.0, 45.0);
        assert_eq!(unsafe { gk_grasp_success(&c, &a, 0.25, 30.0, &mut ok) }, GkStatus::Ok);
        assert!(!ok);
        assert!(gk_last_error_message().is_null());
    }

    #[test]
    fn errors_set_a_message() {
        let a = rect(50.0, 0.0);
        assert_eq!(unsafe { gk_jaccard(&a, std::ptr::null(), &mut 0.0) }, GkStatus::NullArgument);
        let msg = unsafe { CStr::from_ptr(gk_last_error_message()) }.to_str().unwrap();
        assert!(msg.contains("null"));
        let bad = GkGrasp { width_px: -1.0, ..a };
        assert_eq!(unsafe { gk_jaccard(&a, &bad, &mut 0.0) }, GkStatus::InvalidArgument);
        let mut h = std::ptr::null_mut();
        let missing = CString::new("/nonexistent/model").unwrap();
        assert_eq!(unsafe { gk_decomposer_load(missing.as_ptr(), &mut h) }, GkStatus::Io);
        assert!(h.is_null());
        unsafe { gk_decomposer_free(h) };
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(gk_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
