//! Self-supervised motion calibration toolkit.
//!
//! Learns to repair physically implausible skeletal motion (floating, ground
//! penetration, foot skating) given a semantic condition vector. The pipeline
//! is desk scale end to end: procedural clean locomotion corpora, synthetic
//! distortion (vertical bias + temporal Gaussian smoothing), three training
//! strategies for a transformer calibrator (supervised, adversarial with
//! gradient penalty, iterative residual denoising), and a physical
//! plausibility evaluation suite (skate / float / penetrate / clip, MPJPE,
//! Gaussian-Fréchet distance, retrieval R-Precision).

pub mod commands;
pub mod datagen;
pub mod distortion;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod nn;
pub mod plot;
pub mod training;

pub use error::{Error, Result};
