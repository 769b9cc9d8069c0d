//! Shared builders for the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use ndarray::Array3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mocal::datagen::{generate_motion, GaitParams};
use mocal::motion::{ConditionVector, MotionRecord, MotionSequence, Provenance, Skeleton};

/// A deterministic walking record.
pub fn walking_record(seed: u64) -> MotionRecord {
    let params = GaitParams {
        speed: 1.2,
        heading: 0.5,
        turn_rate: 0.1,
        step_frequency: 1.6,
        step_height: 0.12,
        stance_ratio: 0.6,
        duration: 3.0,
        seed,
    };
    generate_motion(&params, 20.0).expect("walking params are valid")
}

/// A running record with flight phases.
pub fn running_record(seed: u64) -> MotionRecord {
    let params = GaitParams {
        speed: 2.2,
        heading: -0.3,
        turn_rate: 0.0,
        step_frequency: 1.7,
        step_height: 0.14,
        stance_ratio: 0.35,
        duration: 3.0,
        seed,
    };
    generate_motion(&params, 20.0).expect("running params are valid")
}

/// Unstructured random motion on the default biped; frames are arbitrary
/// smooth-ish noise around the origin, not physically meaningful.
pub fn random_motion(rng: &mut ChaCha8Rng, frames: usize) -> MotionSequence {
    let skel = Arc::new(Skeleton::default_biped());
    let j = skel.joint_count();
    let base: Vec<f64> = (0..j * 3).map(|_| rng.random_range(-0.5..0.5)).collect();
    let frames = Array3::from_shape_fn((frames, j, 3), |(t, jj, c)| {
        base[jj * 3 + c]
            + 0.3 * ((t as f64) * 0.21 + (jj * 3 + c) as f64).sin()
            + rng.random_range(-0.02..0.02)
    });
    MotionSequence::new(20.0, frames, skel)
}

pub fn random_record(rng: &mut ChaCha8Rng, frames: usize) -> MotionRecord {
    let motion = random_motion(rng, frames);
    let condition = ConditionVector::new((0..16).map(|_| rng.random_range(-1.0..1.0)).collect());
    MotionRecord {
        motion,
        condition: Some(condition),
        label: None,
        provenance: Provenance::Generated,
    }
}

/// Max absolute coordinate difference between two equally shaped motions.
pub fn max_abs_diff(a: &MotionSequence, b: &MotionSequence) -> f64 {
    a.frames
        .iter()
        .zip(b.frames.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
