//! Loss closed forms, telescoping refinement, determinism, divergence guard.

mod common;

use std::sync::Arc;

use mocal::distortion::{apply_vertical_bias, DistortionPolicy, DistortionSpec};
use mocal::error::Error;
use mocal::model::{
    CalibratorConfig, CalibratorMode, CalibratorModel, ConstantCritic, LinearCritic,
};
use mocal::motion::{ConditionVector, MotionRecord, MotionSequence, Provenance, Skeleton};
use mocal::nn::Mat;
use mocal::training::{
    interpolate_mt, loss_denoise, loss_discriminator, loss_generator, loss_supervised,
    refine_iterative, refine_single, train, CriticExample, Strategy, TrainConfig, TrainExample,
};
use mocal_oracle::OracleResidualModel;
use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const D_E: usize = 16;

fn zero_cond() -> ConditionVector {
    ConditionVector::new(vec![0.0; D_E])
}

/// Zero every output path of a direct model: refined frames and aux head both
/// become identically zero.
fn zero_output_model(d_p: usize, seed: u64) -> CalibratorModel {
    let mut model =
        CalibratorModel::init(CalibratorConfig::micro(d_p, D_E, CalibratorMode::Direct), seed)
            .unwrap();
    for name in ["out_proj.w", "out_proj.b", "aux_head.w", "aux_head.b"] {
        let id = model.params.find(name).unwrap();
        model.params.value_mut(id).fill(0.0);
    }
    model
}

fn zeros_motion(frames: usize) -> MotionSequence {
    MotionSequence::new(
        20.0,
        Array3::zeros((frames, 7, 3)),
        Arc::new(Skeleton::default_biped()),
    )
}

fn example(m_d: MotionSequence, m_gt: MotionSequence, spec: DistortionSpec) -> TrainExample {
    TrainExample {
        m_d,
        condition: zero_cond(),
        m_gt,
        spec,
    }
}

#[test]
fn paper_constants_are_the_defaults() {
    let config = TrainConfig::default();
    assert_eq!(config.lambda_init, 5.0);
    assert_eq!(config.gamma, 10.0);
}

/// Zero-output model on unit-norm targets: the loss reduces to the mean of
/// squared targets (the auxiliary terms vanish for a (0, 0) spec).
#[test]
fn supervised_loss_of_zero_model_is_mean_squared_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m_gt = common::random_motion(&mut rng, 6);
    // Normalize targets to unit RMS so the expected loss is exactly 1.
    let flat = m_gt.to_flat();
    let rms = (flat.iter().map(|x| x * x).sum::<f64>() / flat.len() as f64).sqrt();
    let m_gt = m_gt.with_flat(&(flat / rms));
    let model = zero_output_model(m_gt.pose_dim(), 3);

    let batch = vec![example(m_gt.clone(), m_gt.clone(), DistortionSpec::identity())];
    let loss = loss_supervised(&model, &batch).unwrap();
    assert!((loss - 1.0).abs() < 1e-12, "loss {loss}");

    // Perfect prediction: zero targets, zero spec, zero outputs.
    let zero = zeros_motion(6);
    let batch = vec![example(zero.clone(), zero.clone(), DistortionSpec::identity())];
    let loss = loss_supervised(&model, &batch).unwrap();
    assert_eq!(loss, 0.0);

    // A nonzero spec contributes its squared regression error exactly.
    let spec = DistortionSpec { bias: 0.06, sigma: 1.5 };
    let batch = vec![example(zero.clone(), zero, spec)];
    let loss = loss_supervised(&model, &batch).unwrap();
    let expected = 0.06f64.powi(2) + 1.5f64.powi(2);
    assert!((loss - expected).abs() < 1e-12);
}

/// With lambda = 0 the generator loss is exactly -mean D(m_r).
#[test]
fn generator_loss_isolates_adversarial_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m_gt = common::random_motion(&mut rng, 5);
    let m_d = apply_vertical_bias(&m_gt, 0.05);
    let model = CalibratorModel::init(
        CalibratorConfig::micro(m_gt.pose_dim(), D_E, CalibratorMode::Direct),
        7,
    )
    .unwrap();

    let w = Mat::from_shape_fn((5, m_gt.pose_dim()), |(i, j)| {
        ((i * 3 + j) as f64 * 0.17).sin() * 0.1
    });
    let critic = LinearCritic::new(w.clone());

    let batch = vec![example(m_d.clone(), m_gt.clone(), DistortionSpec::identity())];
    let loss = loss_generator(&model, &critic, &batch, 0.0).unwrap();

    let m_r = refine_single(&model, &zero_cond(), &m_d).unwrap();
    let score: f64 = w
        .iter()
        .zip(m_r.to_flat().iter())
        .map(|(a, b)| a * b)
        .sum();
    assert!((loss + score).abs() < 1e-9, "loss {loss} vs -score {}", -score);
}

/// Full hand computation against a linear critic on a 2-frame motion.
#[test]
fn generator_loss_matches_hand_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m_gt = common::random_motion(&mut rng, 2);
    let m_d = apply_vertical_bias(&m_gt, -0.04);
    let model = CalibratorModel::init(
        CalibratorConfig::micro(m_gt.pose_dim(), D_E, CalibratorMode::Direct),
        5,
    )
    .unwrap();
    let w = Mat::from_shape_fn((2, m_gt.pose_dim()), |(i, j)| {
        0.05 * ((i + 2 * j) as f64).cos()
    });
    let critic = LinearCritic::new(w.clone());
    let lambda = 3.5;

    let batch = vec![example(m_d.clone(), m_gt.clone(), DistortionSpec::identity())];
    let loss = loss_generator(&model, &critic, &batch, lambda).unwrap();

    let m_r = refine_single(&model, &zero_cond(), &m_d).unwrap().to_flat();
    let gt = m_gt.to_flat();
    let score: f64 = w.iter().zip(m_r.iter()).map(|(a, b)| a * b).sum();
    let mse = m_r
        .iter()
        .zip(gt.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / m_r.len() as f64;
    let expected = -score + lambda * mse;
    assert!((loss - expected).abs() < 1e-9, "loss {loss} vs {expected}");
}

/// A unit-norm linear critic has gradient penalty exactly zero; a constant
/// critic pins it at gamma.
#[test]
fn gradient_penalty_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m_real = common::random_motion(&mut rng, 3);
    let m_fake = apply_vertical_bias(&m_real, 0.08);
    let batch = vec![CriticExample {
        condition: zero_cond(),
        m_real: m_real.clone(),
        m_fake: m_fake.clone(),
    }];
    let gamma = 10.0;

    // Unit Frobenius norm weight matrix.
    let mut w = Mat::from_shape_fn((3, m_real.pose_dim()), |(i, j)| {
        ((i * 7 + j) as f64 * 0.13).sin() + 0.2
    });
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.mapv_inplace(|x| x / norm);
    let critic = LinearCritic::new(w.clone());

    let loss = loss_discriminator(
        &critic,
        &batch,
        gamma,
        &mut ChaCha8Rng::seed_from_u64(11),
    )
    .unwrap();
    let expected: f64 = w
        .iter()
        .zip(m_fake.to_flat().iter())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        - w.iter()
            .zip(m_real.to_flat().iter())
            .map(|(a, b)| a * b)
            .sum::<f64>();
    assert!(
        (loss - expected).abs() < 1e-12,
        "penalty must vanish: loss {loss} vs base {expected}"
    );

    // Constant critic: base terms cancel, the penalty is gamma * (0 - 1)^2.
    let constant = ConstantCritic::new(0.75);
    let loss = loss_discriminator(
        &constant,
        &batch,
        gamma,
        &mut ChaCha8Rng::seed_from_u64(12),
    )
    .unwrap();
    assert!((loss - gamma).abs() < 1e-12, "loss {loss} vs gamma {gamma}");
}

/// Zero-initialized residual head: denoise loss equals the mean squared exact
/// residual, and is zero when nothing was distorted.
#[test]
fn denoise_loss_closed_form_for_zero_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m_gt = common::random_motion(&mut rng, 6);
    let model = CalibratorModel::init(
        CalibratorConfig::micro(m_gt.pose_dim(), D_E, CalibratorMode::Residual),
        9,
    )
    .unwrap();
    let t_train = 50;

    // Undistorted: target residual is zero, prediction is zero.
    let batch = vec![example(m_gt.clone(), m_gt.clone(), DistortionSpec::identity())];
    let loss = loss_denoise(
        &model,
        &batch,
        t_train,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    assert_eq!(loss, 0.0);

    // Pure bias: the exact residual is [0, b, 0] / T on every joint.
    let b = 0.09;
    let m_d = apply_vertical_bias(&m_gt, b);
    let batch = vec![example(m_d, m_gt.clone(), DistortionSpec { bias: b, sigma: 0.0 })];
    let loss = loss_denoise(
        &model,
        &batch,
        t_train,
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    let expected = (b / t_train as f64).powi(2) / 3.0;
    assert!((loss - expected).abs() < 1e-15, "loss {loss} vs {expected}");
}

#[test]
fn telescoping_recovers_clean_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let m_gt = common::walking_record(10).motion;
    let m_d = mocal::distortion::distort(&m_gt, &mut rng).0;
    let t_total = 40;
    let oracle = OracleResidualModel::new(&m_gt, &m_d, t_total).unwrap();

    let recovered = refine_iterative(&oracle, &zero_cond(), &m_d, t_total).unwrap();
    assert!(common::max_abs_diff(&recovered, &m_gt) < 1e-9);

    // Half the steps lands exactly on the interpolation midpoint.
    let halfway = refine_iterative(&oracle, &zero_cond(), &m_d, t_total / 2).unwrap();
    let expected = interpolate_mt(&m_gt, &m_d, t_total / 2, t_total).unwrap();
    assert!(common::max_abs_diff(&halfway, &expected) < 1e-9);
}

#[test]
fn zero_residual_model_is_identity_for_any_t_hat() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let motion = common::random_motion(&mut rng, 8);
    let model = CalibratorModel::init(
        CalibratorConfig::micro(motion.pose_dim(), D_E, CalibratorMode::Residual),
        2,
    )
    .unwrap();
    for t_hat in [1usize, 10, 50, 100] {
        let out = refine_iterative(&model, &zero_cond(), &motion, t_hat).unwrap();
        assert_eq!(common::max_abs_diff(&out, &motion), 0.0, "t_hat {t_hat}");
    }
    assert!(refine_iterative(&model, &zero_cond(), &motion, 0).is_err());
}

#[test]
fn refine_single_is_deterministic_and_valid() {
    let rec = common::walking_record(31);
    let model = CalibratorModel::init(
        CalibratorConfig::micro(rec.motion.pose_dim(), D_E, CalibratorMode::Direct),
        3,
    )
    .unwrap();
    let cond = zero_cond();
    let a = refine_single(&model, &cond, &rec.motion).unwrap();
    let b = refine_single(&model, &cond, &rec.motion).unwrap();
    assert_eq!(a, b);
    let refined = MotionRecord {
        motion: a,
        condition: Some(cond),
        label: None,
        provenance: Provenance::Refined,
    };
    assert!(mocal::motion::validate(&refined).is_empty());
}

fn tiny_corpus(n: usize) -> Vec<MotionRecord> {
    (0..n)
        .map(|i| {
            let mut rec = common::walking_record(100 + i as u64);
            // Keep sequences short so the test trains in milliseconds.
            let frames = rec
                .motion
                .frames
                .slice(ndarray::s![..20, .., ..])
                .to_owned();
            rec.motion = MotionSequence::new(rec.motion.fps, frames, rec.motion.skeleton.clone());
            rec
        })
        .collect()
}

#[test]
fn training_is_seed_deterministic() {
    let corpus = tiny_corpus(8);
    let model_config = CalibratorConfig::micro(21, D_E, CalibratorMode::Direct);
    let config = TrainConfig {
        strategy: Strategy::Supervised,
        epochs: 2,
        batch_size: 4,
        learning_rate: 1e-3,
        seed: 77,
        ..Default::default()
    };
    let a = train(&corpus, model_config, &config, DistortionPolicy::default()).unwrap();
    let b = train(&corpus, model_config, &config, DistortionPolicy::default()).unwrap();
    assert_eq!(a.report.epochs.len(), 2);
    for (ea, eb) in a.report.epochs.iter().zip(&b.report.epochs) {
        assert_eq!(ea.terms, eb.terms);
    }
    for ((_, pa), (_, pb)) in a.model.params.iter().zip(b.model.params.iter()) {
        assert_eq!(pa, pb);
    }
}

#[test]
fn divergence_guard_aborts_with_diagnostic() {
    // Coordinates around 1e200 square to infinity in the reconstruction MSE.
    let mut corpus = tiny_corpus(4);
    for rec in &mut corpus {
        rec.motion.frames.mapv_inplace(|x| x + 1e200);
    }
    let model_config = CalibratorConfig::micro(21, D_E, CalibratorMode::Direct);
    let config = TrainConfig {
        strategy: Strategy::Supervised,
        epochs: 1,
        batch_size: 4,
        seed: 5,
        ..Default::default()
    };
    match train(&corpus, model_config, &config, DistortionPolicy::default()) {
        Err(Error::Diverged { .. }) => {}
        other => panic!("expected divergence abort, got {other:?}"),
    }
}

#[test]
fn strategy_and_mode_must_agree() {
    let corpus = tiny_corpus(2);
    let wrong = CalibratorConfig::micro(21, D_E, CalibratorMode::Residual);
    let config = TrainConfig {
        strategy: Strategy::Supervised,
        epochs: 1,
        ..Default::default()
    };
    assert!(train(&corpus, wrong, &config, DistortionPolicy::default()).is_err());

    let both_off = DistortionPolicy {
        bias_enabled: false,
        smoothing_enabled: false,
    };
    let right = CalibratorConfig::micro(21, D_E, CalibratorMode::Direct);
    assert!(train(&corpus, right, &config, both_off).is_err());
}
