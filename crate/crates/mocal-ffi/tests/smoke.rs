//! Drive the C ABI end to end from Rust: read, distort, measure, refine, free.

use std::ffi::CString;
use std::ptr;

use mocal::datagen::{generate_motion, GaitParams};
use mocal::model::{save_checkpoint, CalibratorConfig, CalibratorMode, CalibratorModel};
use mocal_ffi::*;

fn c_path(path: &std::path::Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn ffi_round_trip_distort_metrics_refine() {
    let dir = tempfile::tempdir().unwrap();
    let params = GaitParams {
        speed: 1.2,
        heading: 0.4,
        turn_rate: 0.0,
        step_frequency: 1.6,
        step_height: 0.12,
        stance_ratio: 0.6,
        duration: 2.0,
        seed: 11,
    };
    let record = generate_motion(&params, 20.0).unwrap();
    let motion_path = dir.path().join("clean.json");
    mocal::io::write_motion_file(&record, &motion_path).unwrap();

    // Residual-mode model with a zero output head: refinement is the identity.
    let config = CalibratorConfig::micro(
        record.motion.pose_dim(),
        record.condition.as_ref().unwrap().dim(),
        CalibratorMode::Residual,
    );
    let model = CalibratorModel::init(config, 5).unwrap();
    let ckpt_path = dir.path().join("checkpoint.json");
    save_checkpoint(&model, &ckpt_path).unwrap();

    unsafe {
        let mut motion: *mut McMotion = ptr::null_mut();
        let status = mc_motion_read(c_path(&motion_path).as_ptr(), &mut motion);
        assert_eq!(status, McStatus::McStatusOk);
        assert_eq!(mc_motion_frame_count(motion), record.motion.frame_count());
        assert_eq!(mc_motion_joint_count(motion), 7);
        assert_eq!(mc_motion_fps(motion), 20.0);

        let mut clean_metrics = McContactMetrics {
            skate_ratio: -1.0,
            float_mean: -1.0,
            penetrate_mean: -1.0,
            clip_mean: -1.0,
        };
        assert_eq!(
            mc_motion_contact_metrics(motion, &mut clean_metrics),
            McStatus::McStatusOk
        );
        assert_eq!(clean_metrics.skate_ratio, 0.0);
        assert_eq!(clean_metrics.penetrate_mean, 0.0);

        let mut distorted: *mut McMotion = ptr::null_mut();
        assert_eq!(
            mc_motion_distort(motion, -0.04, 0.0, &mut distorted),
            McStatus::McStatusOk
        );
        let mut distorted_metrics = clean_metrics;
        assert_eq!(
            mc_motion_contact_metrics(distorted, &mut distorted_metrics),
            McStatus::McStatusOk
        );
        assert!((distorted_metrics.penetrate_mean - 0.04).abs() < 1e-9);

        let mut model_handle: *mut McModel = ptr::null_mut();
        assert_eq!(
            mc_model_load(c_path(&ckpt_path).as_ptr(), &mut model_handle),
            McStatus::McStatusOk
        );

        let mut refined: *mut McMotion = ptr::null_mut();
        assert_eq!(
            mc_refine(model_handle, distorted, 3, &mut refined),
            McStatus::McStatusOk
        );
        // Zero residual head: the refined motion equals its input.
        let mut refined_metrics = clean_metrics;
        assert_eq!(
            mc_motion_contact_metrics(refined, &mut refined_metrics),
            McStatus::McStatusOk
        );
        assert_eq!(refined_metrics, distorted_metrics);

        let out_path = dir.path().join("refined.json");
        assert_eq!(
            mc_motion_write(refined, c_path(&out_path).as_ptr()),
            McStatus::McStatusOk
        );
        assert!(out_path.exists());

        mc_motion_free(motion);
        mc_motion_free(distorted);
        mc_motion_free(refined);
        mc_model_free(model_handle);
    }
}

#[test]
fn ffi_errors_are_reported() {
    unsafe {
        let mut motion: *mut McMotion = ptr::null_mut();
        let missing = CString::new("/nonexistent/motion.json").unwrap();
        let status = mc_motion_read(missing.as_ptr(), &mut motion);
        assert_eq!(status, McStatus::McStatusIo);
        let msg = std::ffi::CStr::from_ptr(mc_last_error_message());
        assert!(!msg.to_str().unwrap().is_empty());

        assert_eq!(
            mc_motion_read(ptr::null(), &mut motion),
            McStatus::McStatusInvalidArgument
        );
        assert_eq!(mc_motion_frame_count(ptr::null()), 0);

        // Freeing null handles is a no-op.
        mc_motion_free(ptr::null_mut());
        mc_model_free(ptr::null_mut());
    }
}
