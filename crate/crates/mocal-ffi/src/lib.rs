//! C ABI over the mocal toolkit: opaque handles, status codes, and a
//! thread-local last-error message.
//!
//! Ownership rules: every `*_read` / `*_load` / out-pointer constructor hands
//! the caller an owned handle that must be released with the matching
//! `*_free`. Passing null where a handle is required returns
//! `MC_STATUS_INVALID_ARGUMENT`; freeing null is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mocal::distortion::{apply_spec, DistortionSpec};
use mocal::error::Error;
use mocal::metrics::{clip_metric, float_and_penetrate, skate_ratio, ContactParams};
use mocal::model::{load_checkpoint, CalibratorMode, CalibratorModel};
use mocal::motion::{MotionRecord, Provenance};
use mocal::training::{refine_iterative, refine_single};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    McStatusOk = 0,
    McStatusInvalidArgument = 1,
    McStatusIo = 2,
    McStatusParse = 3,
    McStatusShape = 4,
    McStatusInternal = 5,
}

/// Contact-physics metrics of one motion.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McContactMetrics {
    /// Fraction of contact frames with horizontal foot travel above 2.5 cm.
    pub skate_ratio: f64,
    /// Mean positive clearance of the lowest joint on contact frames, meters.
    pub float_mean: f64,
    /// Mean ground penetration depth on contact frames, meters.
    pub penetrate_mean: f64,
    /// Mean inter-foot interpenetration depth, meters.
    pub clip_mean: f64,
}

/// Opaque motion record handle.
pub struct McMotion {
    record: MotionRecord,
}

/// Opaque calibrator handle.
pub struct McModel {
    model: CalibratorModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> McStatus {
    match err {
        Error::Io { .. } => McStatus::McStatusIo,
        Error::Parse { .. } => McStatus::McStatusParse,
        Error::Shape { .. } => McStatus::McStatusShape,
        Error::Invalid(_) | Error::Params(_) | Error::Config(_) => {
            McStatus::McStatusInvalidArgument
        }
        _ => McStatus::McStatusInternal,
    }
}

fn fail(err: &Error) -> McStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard(body: impl FnOnce() -> McStatus + std::panic::UnwindSafe) -> McStatus {
    match catch_unwind(body) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            McStatus::McStatusInternal
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, McStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(McStatus::McStatusInvalidArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(McStatus::McStatusInvalidArgument)
        }
    }
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Read one motion record from a JSON interchange file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_read(path: *const c_char, out: *mut *mut McMotion) -> McStatus {
    if out.is_null() {
        set_error("null out pointer");
        return McStatus::McStatusInvalidArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| match mocal::io::read_motion_file(path) {
        Ok(record) => {
            *out = Box::into_raw(Box::new(McMotion { record }));
            McStatus::McStatusOk
        }
        Err(e) => fail(&e),
    }))
}

/// Write one motion record as a JSON interchange file.
///
/// # Safety
/// `motion` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_write(motion: *const McMotion, path: *const c_char) -> McStatus {
    if motion.is_null() {
        set_error("null motion");
        return McStatus::McStatusInvalidArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let motion = &*motion;
    guard(AssertUnwindSafe(
        || match mocal::io::write_motion_file(&motion.record, path) {
            Ok(()) => McStatus::McStatusOk,
            Err(e) => fail(&e),
        },
    ))
}

/// Release a motion handle. Null is a no-op.
///
/// # Safety
/// `motion` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_free(motion: *mut McMotion) {
    if !motion.is_null() {
        drop(Box::from_raw(motion));
    }
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `motion` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_frame_count(motion: *const McMotion) -> usize {
    if motion.is_null() {
        return 0;
    }
    (*motion).record.motion.frame_count()
}

/// Number of joints, or 0 for a null handle.
///
/// # Safety
/// `motion` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_joint_count(motion: *const McMotion) -> usize {
    if motion.is_null() {
        return 0;
    }
    (*motion).record.motion.joint_count()
}

/// Frames per second, or 0 for a null handle.
///
/// # Safety
/// `motion` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_fps(motion: *const McMotion) -> f64 {
    if motion.is_null() {
        return 0.0;
    }
    (*motion).record.motion.fps
}

/// Apply a vertical bias (meters) and temporal Gaussian smoothing (frames) to
/// a motion, producing a new handle with provenance "distorted".
///
/// # Safety
/// `motion` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_distort(
    motion: *const McMotion,
    bias: f64,
    sigma: f64,
    out: *mut *mut McMotion,
) -> McStatus {
    if motion.is_null() || out.is_null() {
        set_error("null argument");
        return McStatus::McStatusInvalidArgument;
    }
    if !bias.is_finite() || !sigma.is_finite() || sigma < 0.0 {
        set_error("bias must be finite and sigma finite and >= 0");
        return McStatus::McStatusInvalidArgument;
    }
    let source = &*motion;
    guard(AssertUnwindSafe(|| {
        let spec = DistortionSpec { bias, sigma };
        let distorted = apply_spec(&source.record.motion, &spec);
        let record = MotionRecord {
            motion: distorted,
            condition: source.record.condition.clone(),
            label: source.record.label.clone(),
            provenance: Provenance::Distorted,
        };
        *out = Box::into_raw(Box::new(McMotion { record }));
        McStatus::McStatusOk
    }))
}

/// Contact metrics of a motion at the default thresholds.
///
/// # Safety
/// `motion` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_motion_contact_metrics(
    motion: *const McMotion,
    out: *mut McContactMetrics,
) -> McStatus {
    if motion.is_null() || out.is_null() {
        set_error("null argument");
        return McStatus::McStatusInvalidArgument;
    }
    let motion = &*motion;
    guard(AssertUnwindSafe(|| {
        let params = ContactParams::default();
        let m = &motion.record.motion;
        let (float_mean, penetrate_mean) = float_and_penetrate(m, &params);
        *out = McContactMetrics {
            skate_ratio: skate_ratio(m, &params),
            float_mean,
            penetrate_mean,
            clip_mean: clip_metric(m, &params),
        };
        McStatus::McStatusOk
    }))
}

/// Load a calibrator checkpoint.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_model_load(path: *const c_char, out: *mut *mut McModel) -> McStatus {
    if out.is_null() {
        set_error("null out pointer");
        return McStatus::McStatusInvalidArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| match load_checkpoint(path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(McModel { model }));
            McStatus::McStatusOk
        }
        Err(e) => fail(&e),
    }))
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_model_free(model: *mut McModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Refine a motion through a loaded calibrator: iteratively over `t_hat`
/// steps for residual checkpoints, one step for direct ones. The motion must
/// carry a condition vector.
///
/// # Safety
/// `model` and `motion` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_refine(
    model: *const McModel,
    motion: *const McMotion,
    t_hat: u32,
    out: *mut *mut McMotion,
) -> McStatus {
    if model.is_null() || motion.is_null() || out.is_null() {
        set_error("null argument");
        return McStatus::McStatusInvalidArgument;
    }
    let model = &(*model).model;
    let source = &*motion;
    guard(AssertUnwindSafe(|| {
        let Some(condition) = source.record.condition.as_ref() else {
            set_error("motion has no condition vector");
            return McStatus::McStatusInvalidArgument;
        };
        let refined = match model.config.mode {
            CalibratorMode::Residual => {
                if t_hat == 0 {
                    set_error("t_hat must be >= 1 for residual checkpoints");
                    return McStatus::McStatusInvalidArgument;
                }
                refine_iterative(model, condition, &source.record.motion, t_hat as usize)
            }
            CalibratorMode::Direct => refine_single(model, condition, &source.record.motion),
        };
        match refined {
            Ok(motion) => {
                let record = MotionRecord {
                    motion,
                    condition: source.record.condition.clone(),
                    label: source.record.label.clone(),
                    provenance: Provenance::Refined,
                };
                *out = Box::into_raw(Box::new(McMotion { record }));
                McStatus::McStatusOk
            }
            Err(e) => fail(&e),
        }
    }))
}
