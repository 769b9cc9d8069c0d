//! Training strategies and inference-time refinement.
//!
//! Three ways to fit the calibrator on (distorted, condition, clean) triplets
//! built online from clean corpora:
//!
//! * supervised regression: MSE on the refined motion plus regression of the
//!   distortion's (bias, sigma) through a pooled auxiliary head;
//! * adversarial: Wasserstein critic with gradient penalty, generator loss
//!   `-D(m_r) + lambda |m_r - m_gt|^2` with `lambda` decaying linearly;
//! * residual denoising: the model predicts the per-step residual of the
//!   linear interpolation between clean and distorted motion and is applied
//!   iteratively at inference.
//!
//! Gradient-penalty parameter gradients use the critic's exact input gradient
//! for the norm and a central difference along that (frozen) direction for
//! the second-order factor; the gradient-check suite pins the accuracy of
//! this construction.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{apply_spec, sample_spec_with_policy, DistortionPolicy, DistortionSpec};
use crate::error::{Error, Result};
use crate::model::{
    condition_row, CalibratorConfig, CalibratorMode, CalibratorModel, Critic, DiscriminatorConfig,
    DiscriminatorModel, ResidualPredictor,
};
use crate::motion::{ConditionVector, MotionRecord, MotionSequence};
use crate::nn::{collect_grads, mount, Adam, Mat, Tape};

/// Step size of the directional difference inside the gradient-penalty
/// backward pass.
const PENALTY_PROBE_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Supervised,
    Wgan,
    Denoise,
}

impl Strategy {
    pub fn required_mode(&self) -> CalibratorMode {
        match self {
            Strategy::Denoise => CalibratorMode::Residual,
            _ => CalibratorMode::Direct,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Strategy::Supervised),
            "wgan" => Ok(Strategy::Wgan),
            "denoise" => Ok(Strategy::Denoise),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Reconstruction weight at epoch 0.
    pub lambda_init: f64,
    /// Reconstruction weight at the final epoch (linear decay).
    pub lambda_final: f64,
    /// Gradient penalty weight.
    pub gamma: f64,
    /// Interpolation step count of the denoising objective.
    pub t_train: usize,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            strategy: Strategy::Denoise,
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-4,
            lambda_init: 5.0,
            lambda_final: 1.0,
            gamma: 10.0,
            t_train: 100,
            critic_steps: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_init >= self.lambda_final && self.lambda_final >= 0.0) {
            return Err(Error::Config(
                "need lambda_init >= lambda_final >= 0".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::Config("gamma must be >= 0".into()));
        }
        if self.t_train < 1 || self.critic_steps < 1 || self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config(
                "epochs, batch_size, t_train, critic_steps must be >= 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        Ok(())
    }

    /// Linear decay from `lambda_init` to `lambda_final` across epochs.
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            self.lambda_init
        } else {
            let f = epoch as f64 / (self.epochs - 1) as f64;
            self.lambda_init + (self.lambda_final - self.lambda_init) * f
        }
    }
}

/// One training triplet plus the spec that produced it.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub m_d: MotionSequence,
    pub condition: ConditionVector,
    pub m_gt: MotionSequence,
    pub spec: DistortionSpec,
}

/// One critic example: matched real and refined motions for a condition.
#[derive(Debug, Clone)]
pub struct CriticExample {
    pub condition: ConditionVector,
    pub m_real: MotionSequence,
    pub m_fake: MotionSequence,
}

/// Value plus per-term breakdown plus parameter gradients in store order.
pub struct LossEval {
    pub value: f64,
    pub terms: BTreeMap<String, f64>,
    pub grads: Vec<Mat>,
}

fn mean_grads(mut acc: Vec<Mat>, parts: Vec<Vec<Mat>>, scale: f64) -> Vec<Mat> {
    for part in parts {
        for (a, g) in acc.iter_mut().zip(part) {
            *a += &g;
        }
    }
    for a in acc.iter_mut() {
        a.mapv_inplace(|x| x * scale);
    }
    acc
}

fn zeros_like(model_params: &crate::nn::ParamStore) -> Vec<Mat> {
    model_params.iter().map(|(_, m)| Mat::zeros(m.raw_dim())).collect()
}

// --- supervised -------------------------------------------------------------

/// Supervised objective: `MSE(m_r, m_gt) + (b_hat - b)^2 + (sigma_hat - sigma)^2`,
/// batch mean. Requires a direct-mode model (it carries the pooled 2-scalar head).
pub fn loss_supervised_eval(model: &CalibratorModel, batch: &[TrainExample]) -> Result<LossEval> {
    if model.config.mode != CalibratorMode::Direct {
        return Err(Error::Params("supervised loss requires mode=direct".into()));
    }
    if batch.is_empty() {
        return Err(Error::Params("empty batch".into()));
    }

    let parts: Vec<(f64, f64, f64, f64, Vec<Mat>)> = batch
        .par_iter()
        .map(|ex| {
            let mut tape = Tape::new();
            let mounted = mount(&mut tape, &model.params);
            let cond = tape.leaf(condition_row(&ex.condition));
            let m_d = tape.leaf(ex.m_d.to_flat());
            let out = model.forward_tape(&mut tape, &mounted, cond, m_d, None);
            let gt = tape.leaf(ex.m_gt.to_flat());
            let recon = tape.mse(out.output, gt);
            let aux = out.aux.expect("direct mode has aux head");
            let target = tape.leaf(Mat::from_shape_vec((1, 2), vec![ex.spec.bias, ex.spec.sigma]).unwrap());
            let diff = tape.sub(aux, target);
            let aux_loss = tape.sum_sq(diff);
            let total = tape.add(recon, aux_loss);

            let aux_v = tape.value(aux).clone();
            let bias_mse = (aux_v[[0, 0]] - ex.spec.bias).powi(2);
            let sigma_mse = (aux_v[[0, 1]] - ex.spec.sigma).powi(2);
            let recon_v = tape.scalar(recon);
            let total_v = tape.scalar(total);
            let grads = tape.backward(total);
            (
                total_v,
                recon_v,
                bias_mse,
                sigma_mse,
                collect_grads(&grads, &mounted, &model.params),
            )
        })
        .collect();

    let n = batch.len() as f64;
    let value = parts.iter().map(|p| p.0).sum::<f64>() / n;
    let recon = parts.iter().map(|p| p.1).sum::<f64>() / n;
    let bias = parts.iter().map(|p| p.2).sum::<f64>() / n;
    let sigma = parts.iter().map(|p| p.3).sum::<f64>() / n;
    let grads = mean_grads(
        zeros_like(&model.params),
        parts.into_iter().map(|p| p.4).collect(),
        1.0 / n,
    );

    let mut terms = BTreeMap::new();
    terms.insert("loss".into(), value);
    terms.insert("recon".into(), recon);
    terms.insert("bias_mse".into(), bias);
    terms.insert("sigma_mse".into(), sigma);
    Ok(LossEval { value, terms, grads })
}

/// Scalar form of the supervised objective.
pub fn loss_supervised(model: &CalibratorModel, batch: &[TrainExample]) -> Result<f64> {
    Ok(loss_supervised_eval(model, batch)?.value)
}

// --- adversarial -------------------------------------------------------------

/// Generator objective: `-D([Proj(e); m_r]) + lambda MSE(m_r, m_gt)`, batch
/// mean, with `m_r` produced by the direct-mode calibrator. Gradients are for
/// the calibrator's parameters.
pub fn loss_generator_eval(
    model: &CalibratorModel,
    critic: &dyn Critic,
    batch: &[TrainExample],
    lambda: f64,
) -> Result<LossEval> {
    if model.config.mode != CalibratorMode::Direct {
        return Err(Error::Params("generator loss requires mode=direct".into()));
    }
    if batch.is_empty() {
        return Err(Error::Params("empty batch".into()));
    }

    let parts: Vec<(f64, f64, f64, Vec<Mat>)> = batch
        .par_iter()
        .map(|ex| {
            let mut tape = Tape::new();
            let mounted_g = mount(&mut tape, &model.params);
            let mounted_d = mount(&mut tape, critic.params());
            let cond = tape.leaf(condition_row(&ex.condition));
            let m_d = tape.leaf(ex.m_d.to_flat());
            let out = model.forward_tape(&mut tape, &mounted_g, cond, m_d, None);
            let score = critic.score_tape(&mut tape, &mounted_d, cond, out.output);
            let neg = tape.scale(score, -1.0);
            let gt = tape.leaf(ex.m_gt.to_flat());
            let recon = tape.mse(out.output, gt);
            let weighted = tape.scale(recon, lambda);
            let total = tape.add(neg, weighted);

            let grads = tape.backward(total);
            (
                tape.scalar(total),
                -tape.scalar(score),
                tape.scalar(recon),
                collect_grads(&grads, &mounted_g, &model.params),
            )
        })
        .collect();

    let n = batch.len() as f64;
    let value = parts.iter().map(|p| p.0).sum::<f64>() / n;
    let adv = parts.iter().map(|p| p.1).sum::<f64>() / n;
    let recon = parts.iter().map(|p| p.2).sum::<f64>() / n;
    let grads = mean_grads(
        zeros_like(&model.params),
        parts.into_iter().map(|p| p.3).collect(),
        1.0 / n,
    );

    let mut terms = BTreeMap::new();
    terms.insert("loss_g".into(), value);
    terms.insert("adv".into(), adv);
    terms.insert("recon".into(), recon);
    Ok(LossEval { value, terms, grads })
}

pub fn loss_generator(
    model: &CalibratorModel,
    critic: &dyn Critic,
    batch: &[TrainExample],
    lambda: f64,
) -> Result<f64> {
    Ok(loss_generator_eval(model, critic, batch, lambda)?.value)
}

/// Critic objective with gradient penalty:
/// `D(m_r) - D(m_gt) + gamma (|grad D(m_hat)| - 1)^2`, batch mean, where
/// `m_hat` interpolates real and refined motion at a per-sample `alpha ~ U(0,1)`.
/// The penalty differentiates the critic's gradient with respect to the full
/// interpolated motion input; the condition token is excluded.
pub fn loss_discriminator_eval(
    critic: &dyn Critic,
    batch: &[CriticExample],
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LossEval> {
    if batch.is_empty() {
        return Err(Error::Params("empty batch".into()));
    }
    let alphas: Vec<f64> = (0..batch.len()).map(|_| rng.random_range(0.0..1.0)).collect();

    let parts: Vec<(f64, f64, f64, f64, Vec<Mat>)> = batch
        .par_iter()
        .zip(alphas.par_iter())
        .map(|(ex, &alpha)| {
            let real = ex.m_real.to_flat();
            let fake = ex.m_fake.to_flat();
            let hat = &real * alpha + &fake * (1.0 - alpha);
            let shape = (hat.shape()[0], hat.shape()[1]);

            let mut tape = Tape::new();
            let mounted = mount(&mut tape, critic.params());
            let cond = tape.leaf(condition_row(&ex.condition));
            let fake_leaf = tape.leaf(fake);
            let real_leaf = tape.leaf(real);
            let hat_leaf = tape.leaf(hat.clone());

            let s_fake = critic.score_tape(&mut tape, &mounted, cond, fake_leaf);
            let s_real = critic.score_tape(&mut tape, &mounted, cond, real_leaf);
            let base = tape.sub(s_fake, s_real);

            let s_hat = critic.score_tape(&mut tape, &mounted, cond, hat_leaf);
            let hat_grads = tape.backward(s_hat);
            let g = hat_grads.get_or_zeros(hat_leaf, shape);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let penalty = gamma * (norm - 1.0) * (norm - 1.0);

            let base_grads = tape.backward(base);
            let mut grads = collect_grads(&base_grads, &mounted, critic.params());

            if norm > 1e-12 && gamma != 0.0 {
                // d penalty / d theta = 2 gamma (|g| - 1) * d(u . g)/d theta with
                // u = g / |g| frozen; the directional derivative u . grad_x D is
                // evaluated by a central difference along u and backpropagated.
                let u = &g / norm;
                let plus = tape.leaf(&hat + &(&u * PENALTY_PROBE_EPS));
                let minus = tape.leaf(&hat - &(&u * PENALTY_PROBE_EPS));
                let s_plus = critic.score_tape(&mut tape, &mounted, cond, plus);
                let s_minus = critic.score_tape(&mut tape, &mounted, cond, minus);
                let diff = tape.sub(s_plus, s_minus);
                let dir = tape.scale(diff, 1.0 / (2.0 * PENALTY_PROBE_EPS));
                let dir_grads = tape.backward(dir);
                let dir_collected = collect_grads(&dir_grads, &mounted, critic.params());
                let factor = 2.0 * gamma * (norm - 1.0);
                for (a, d) in grads.iter_mut().zip(dir_collected) {
                    *a += &(d * factor);
                }
            }

            (
                tape.scalar(base) + penalty,
                tape.scalar(s_fake),
                tape.scalar(s_real),
                penalty,
                grads,
            )
        })
        .collect();

    let n = batch.len() as f64;
    let value = parts.iter().map(|p| p.0).sum::<f64>() / n;
    let d_fake = parts.iter().map(|p| p.1).sum::<f64>() / n;
    let d_real = parts.iter().map(|p| p.2).sum::<f64>() / n;
    let penalty = parts.iter().map(|p| p.3).sum::<f64>() / n;
    let grads = mean_grads(
        zeros_like(critic.params()),
        parts.into_iter().map(|p| p.4).collect(),
        1.0 / n,
    );

    let mut terms = BTreeMap::new();
    terms.insert("loss_d".into(), value);
    terms.insert("d_fake".into(), d_fake);
    terms.insert("d_real".into(), d_real);
    terms.insert("penalty".into(), penalty);
    Ok(LossEval { value, terms, grads })
}

pub fn loss_discriminator(
    critic: &dyn Critic,
    batch: &[CriticExample],
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    Ok(loss_discriminator_eval(critic, batch, gamma, rng)?.value)
}

// --- denoising ----------------------------------------------------------------

/// Intermediate noisy input `m_t = ((T - t)/T) m_gt + (t/T) m_d`.
pub fn interpolate_mt(
    m_gt: &MotionSequence,
    m_d: &MotionSequence,
    t: usize,
    t_total: usize,
) -> Result<MotionSequence> {
    if t > t_total {
        return Err(Error::Params(format!("t = {t} out of range 0..={t_total}")));
    }
    if m_gt.frame_count() != m_d.frame_count() || m_gt.joint_count() != m_d.joint_count() {
        return Err(Error::shape(
            "interpolate_mt",
            format!("{}x{}", m_gt.frame_count(), m_gt.joint_count()),
            format!("{}x{}", m_d.frame_count(), m_d.joint_count()),
        ));
    }
    let w_d = t as f64 / t_total as f64;
    let frames = &m_gt.frames * (1.0 - w_d) + &m_d.frames * w_d;
    Ok(MotionSequence::new(m_gt.fps, frames, m_gt.skeleton.clone()))
}

/// Residual denoising objective: MSE between the predicted residual at a
/// uniformly sampled step `t` and the exact interpolation residual
/// `(m_d - m_gt) / T`, batch mean. Requires a residual-mode model.
pub fn loss_denoise_eval(
    model: &CalibratorModel,
    batch: &[TrainExample],
    t_train: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LossEval> {
    if model.config.mode != CalibratorMode::Residual {
        return Err(Error::Params("denoise loss requires mode=residual".into()));
    }
    if batch.is_empty() {
        return Err(Error::Params("empty batch".into()));
    }
    let steps: Vec<usize> = (0..batch.len())
        .map(|_| rng.random_range(1..=t_train))
        .collect();

    let parts: Vec<(f64, Vec<Mat>)> = batch
        .par_iter()
        .zip(steps.par_iter())
        .map(|(ex, &t)| {
            let gt = ex.m_gt.to_flat();
            let d = ex.m_d.to_flat();
            let w_d = t as f64 / t_train as f64;
            let m_t = &gt * (1.0 - w_d) + &d * w_d;
            let target = (&d - &gt) / t_train as f64;

            let mut tape = Tape::new();
            let mounted = mount(&mut tape, &model.params);
            let cond = tape.leaf(condition_row(&ex.condition));
            let m_t_leaf = tape.leaf(m_t);
            let out = model.forward_tape(&mut tape, &mounted, cond, m_t_leaf, Some(t));
            let target_leaf = tape.leaf(target);
            let loss = tape.mse(out.output, target_leaf);
            let grads = tape.backward(loss);
            (
                tape.scalar(loss),
                collect_grads(&grads, &mounted, &model.params),
            )
        })
        .collect();

    let n = batch.len() as f64;
    let value = parts.iter().map(|p| p.0).sum::<f64>() / n;
    let grads = mean_grads(
        zeros_like(&model.params),
        parts.into_iter().map(|p| p.1).collect(),
        1.0 / n,
    );

    let mut terms = BTreeMap::new();
    terms.insert("denoise".into(), value);
    Ok(LossEval { value, terms, grads })
}

pub fn loss_denoise(
    model: &CalibratorModel,
    batch: &[TrainExample],
    t_train: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    Ok(loss_denoise_eval(model, batch, t_train, rng)?.value)
}

// --- inference ----------------------------------------------------------------

/// Iterative refinement: starting from `m_input` at step `t_hat`, subtract the
/// predicted residual down to step 1.
pub fn refine_iterative(
    predictor: &dyn ResidualPredictor,
    condition: &ConditionVector,
    m_input: &MotionSequence,
    t_hat: usize,
) -> Result<MotionSequence> {
    if t_hat < 1 {
        return Err(Error::Params("t_hat must be >= 1".into()));
    }
    let mut m = m_input.clone();
    for t in (1..=t_hat).rev() {
        let residual = predictor.predict_residual(condition, &m, t)?;
        let frames = &m.frames - &residual.frames;
        m = MotionSequence::new(m.fps, frames, m.skeleton.clone());
    }
    Ok(m)
}

/// Single-step refinement with a direct-mode calibrator.
pub fn refine_single(
    model: &CalibratorModel,
    condition: &ConditionVector,
    m_input: &MotionSequence,
) -> Result<MotionSequence> {
    if model.config.mode != CalibratorMode::Direct {
        return Err(Error::Params("refine_single requires mode=direct".into()));
    }
    model.forward(condition, m_input, None)
}

// --- training loop --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub terms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub wall_time_s: f64,
    pub epochs: Vec<EpochLog>,
    pub config: TrainConfig,
    /// Generator reconstruction term per generator update: `(global step, value)`.
    pub generator_recon_steps: Vec<(usize, f64)>,
    pub checkpoint_path: Option<String>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: CalibratorModel,
    pub discriminator: Option<DiscriminatorModel>,
    pub report: TrainReport,
}

struct PreparedItem {
    m_gt: MotionSequence,
    condition: ConditionVector,
}

fn prepare(corpus: &[MotionRecord], d_e: usize, d_p: usize) -> Result<Vec<PreparedItem>> {
    if corpus.is_empty() {
        return Err(Error::Params("empty training corpus".into()));
    }
    corpus
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let condition = rec
                .condition
                .clone()
                .ok_or_else(|| Error::Params(format!("record {i} lacks a condition vector")))?;
            if condition.dim() != d_e {
                return Err(Error::shape(format!("record {i} condition"), d_e, condition.dim()));
            }
            if rec.motion.pose_dim() != d_p {
                return Err(Error::shape(format!("record {i} pose dim"), d_p, rec.motion.pose_dim()));
            }
            Ok(PreparedItem {
                m_gt: rec.motion.clone(),
                condition,
            })
        })
        .collect()
}

fn check_finite(terms: &BTreeMap<String, f64>, step: usize) -> Result<()> {
    for (name, v) in terms {
        if !v.is_finite() {
            return Err(Error::Diverged {
                step,
                term: name.clone(),
                value: *v,
            });
        }
    }
    Ok(())
}

fn make_batch(
    items: &[PreparedItem],
    indices: &[usize],
    policy: DistortionPolicy,
    rng: &mut ChaCha8Rng,
) -> Vec<TrainExample> {
    indices
        .iter()
        .map(|&i| {
            let spec = sample_spec_with_policy(rng, policy);
            let m_d = apply_spec(&items[i].m_gt, &spec);
            TrainExample {
                m_d,
                condition: items[i].condition.clone(),
                m_gt: items[i].m_gt.clone(),
                spec,
            }
        })
        .collect()
}

/// Train a calibrator on a clean corpus with online distortions.
///
/// Deterministic for a fixed `(config.seed, corpus)`. The strategy picks the
/// loss path; `model_config.mode` must match it. Aborts with a diagnostic if
/// any logged term becomes non-finite.
pub fn train(
    corpus: &[MotionRecord],
    model_config: CalibratorConfig,
    config: &TrainConfig,
    policy: DistortionPolicy,
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    if model_config.mode != config.strategy.required_mode() {
        return Err(Error::Config(format!(
            "strategy {:?} requires mode {:?}",
            config.strategy,
            config.strategy.required_mode()
        )));
    }
    if !policy.bias_enabled && !policy.smoothing_enabled {
        return Err(Error::Config(
            "at least one distortion family must be enabled for training".into(),
        ));
    }

    let items = prepare(corpus, model_config.d_e, model_config.d_p)?;
    for (i, item) in items.iter().enumerate() {
        if item.m_gt.frame_count() > model_config.max_frames {
            return Err(Error::shape(
                format!("record {i} frame count"),
                format!("<= {}", model_config.max_frames),
                item.m_gt.frame_count(),
            ));
        }
    }

    let start = Instant::now();
    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let model_seed = seeder.random::<u64>();
    let disc_seed = seeder.random::<u64>();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeder.random::<u64>());
    let mut distort_rng = ChaCha8Rng::seed_from_u64(seeder.random::<u64>());
    let mut loss_rng = ChaCha8Rng::seed_from_u64(seeder.random::<u64>());

    let mut model = CalibratorModel::init(model_config, model_seed)?;
    let mut adam_g = Adam::new(&model.params, config.learning_rate);

    let mut discriminator = match config.strategy {
        Strategy::Wgan => Some(DiscriminatorModel::init(
            DiscriminatorConfig::desk_scale(model_config.d_p, model_config.d_e),
            disc_seed,
        )?),
        _ => None,
    };
    let mut adam_d = discriminator
        .as_ref()
        .map(|d| Adam::new(&d.params, config.learning_rate));

    let mut epochs = Vec::new();
    let mut generator_recon_steps = Vec::new();
    let mut global_step = 0usize;

    for epoch in 0..config.epochs {
        let lambda = config.lambda_at(epoch);
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        let record = |terms: &BTreeMap<String, f64>, sums: &mut BTreeMap<String, (f64, usize)>| {
            for (k, v) in terms {
                let e = sums.entry(k.clone()).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        };

        for chunk in order.chunks(config.batch_size) {
            global_step += 1;
            let batch = make_batch(&items, chunk, policy, &mut distort_rng);

            match config.strategy {
                Strategy::Supervised => {
                    let eval = loss_supervised_eval(&model, &batch)?;
                    check_finite(&eval.terms, global_step)?;
                    record(&eval.terms, &mut sums);
                    adam_g.step(&mut model.params, &eval.grads);
                }
                Strategy::Denoise => {
                    let eval = loss_denoise_eval(&model, &batch, config.t_train, &mut loss_rng)?;
                    check_finite(&eval.terms, global_step)?;
                    record(&eval.terms, &mut sums);
                    adam_g.step(&mut model.params, &eval.grads);
                }
                Strategy::Wgan => {
                    let disc = discriminator.as_mut().expect("wgan has a critic");
                    let adam_d = adam_d.as_mut().expect("wgan has a critic optimizer");

                    // Refined motions from the current generator, detached.
                    let critic_batch: Vec<CriticExample> = batch
                        .par_iter()
                        .map(|ex| {
                            let m_fake = refine_single(&model, &ex.condition, &ex.m_d)
                                .expect("shapes validated");
                            CriticExample {
                                condition: ex.condition.clone(),
                                m_real: ex.m_gt.clone(),
                                m_fake,
                            }
                        })
                        .collect();
                    let eval =
                        loss_discriminator_eval(disc, &critic_batch, config.gamma, &mut loss_rng)?;
                    check_finite(&eval.terms, global_step)?;
                    record(&eval.terms, &mut sums);
                    adam_d.step(&mut disc.params, &eval.grads);

                    if global_step % config.critic_steps == 0 {
                        let eval = loss_generator_eval(&model, disc, &batch, lambda)?;
                        check_finite(&eval.terms, global_step)?;
                        if let Some(recon) = eval.terms.get("recon") {
                            generator_recon_steps.push((global_step, *recon));
                        }
                        record(&eval.terms, &mut sums);
                        adam_g.step(&mut model.params, &eval.grads);
                    }
                }
            }
        }

        let mut terms: BTreeMap<String, f64> = sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect();
        if config.strategy == Strategy::Wgan {
            terms.insert("lambda".into(), lambda);
        }
        check_finite(&terms, global_step)?;
        epochs.push(EpochLog { epoch, terms });
    }

    if !model.params.all_finite() {
        return Err(Error::Diverged {
            step: global_step,
            term: "parameters".into(),
            value: f64::NAN,
        });
    }

    let report = TrainReport {
        strategy: config.strategy,
        seed: config.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        epochs,
        config: *config,
        generator_recon_steps,
        checkpoint_path: None,
    };

    Ok(TrainOutcome {
        model,
        discriminator,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_corpus, ParamRanges};

    #[test]
    fn lambda_schedule_endpoints_and_midpoint() {
        let config = TrainConfig {
            epochs: 11,
            lambda_init: 5.0,
            lambda_final: 1.0,
            ..Default::default()
        };
        assert_eq!(config.lambda_at(0), 5.0);
        assert_eq!(config.lambda_at(10), 1.0);
        assert!((config.lambda_at(5) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_endpoints_are_exact() {
        let corpus = generate_corpus(2, &ParamRanges::default(), 20.0, 5).unwrap();
        let gt = corpus[0].motion.clone();
        let d = crate::distortion::apply_vertical_bias(&gt, 0.05);
        let t0 = interpolate_mt(&gt, &d, 0, 10).unwrap();
        assert_eq!(t0, gt);
        let tt = interpolate_mt(&gt, &d, 10, 10).unwrap();
        assert_eq!(tt, d);
        assert!(interpolate_mt(&gt, &d, 11, 10).is_err());
    }

    #[test]
    fn interpolation_steps_are_constant() {
        let corpus = generate_corpus(1, &ParamRanges::default(), 20.0, 9).unwrap();
        let gt = corpus[0].motion.clone();
        let d = crate::distortion::apply_spec(
            &gt,
            &crate::distortion::DistortionSpec { bias: -0.08, sigma: 1.5 },
        );
        let t_total = 7;
        let expected = (&d.frames - &gt.frames) / t_total as f64;
        for t in 1..=t_total {
            let a = interpolate_mt(&gt, &d, t, t_total).unwrap();
            let b = interpolate_mt(&gt, &d, t - 1, t_total).unwrap();
            let step = &a.frames - &b.frames;
            for (x, y) in step.iter().zip(expected.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
