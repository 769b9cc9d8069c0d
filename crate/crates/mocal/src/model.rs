//! The calibrator network and its adversarial critic.
//!
//! The calibrator is a transformer encoder over `[condition token; frame
//! tokens]`: the condition vector is projected into pose space, prepended as
//! the first token, and every token is then mapped to model width, given
//! sinusoidal positions, and run through the encoder stack. The condition
//! token's output position is discarded; the remaining tokens are projected
//! back to pose space as either the refined frames (direct mode) or per-frame
//! residuals (residual mode, additionally conditioned on a refinement step
//! via a sinusoidal timestep embedding).

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::metrics::{motion_features, ContactParams, MotionEncoder};
use crate::motion::{ConditionVector, MotionRecord, MotionSequence};
use crate::nn::layers::{positional_encoding, sinusoid, EncoderLayer, LayerNorm, Linear};
use crate::nn::{collect_grads, mount, Adam, Grads, Mat, Mounted, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibratorMode {
    /// One forward pass maps distorted motion to refined motion.
    Direct,
    /// The model predicts per-frame residuals for iterative refinement.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratorConfig {
    /// Per-frame pose dimension (3J for raw joint positions).
    pub d_p: usize,
    /// Condition vector dimension.
    pub d_e: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_frames: usize,
    pub mode: CalibratorMode,
}

impl CalibratorConfig {
    /// Desk-scale defaults: train in minutes on CPU hardware.
    pub fn desk_scale(d_p: usize, d_e: usize, mode: CalibratorMode) -> Self {
        CalibratorConfig {
            d_p,
            d_e,
            d_model: 128,
            n_layers: 4,
            n_heads: 4,
            max_frames: 200,
            mode,
        }
    }

    /// Tiny configuration for gradient checks and fast tests.
    pub fn micro(d_p: usize, d_e: usize, mode: CalibratorMode) -> Self {
        CalibratorConfig {
            d_p,
            d_e,
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            max_frames: 64,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_p == 0
            || self.d_e == 0
            || self.d_model == 0
            || self.n_layers == 0
            || self.n_heads == 0
            || self.max_frames == 0
        {
            return Err(Error::Config("all model dimensions must be >= 1".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    fn d_ff(&self) -> usize {
        4 * self.d_model
    }
}

#[derive(Debug, Clone)]
struct CalibratorArch {
    proj_e: Linear,
    in_proj: Linear,
    timestep_proj: Option<Linear>,
    layers: Vec<EncoderLayer>,
    final_ln: LayerNorm,
    out_proj: Linear,
    aux_head: Option<Linear>,
}

/// The refinement network: config plus named parameters.
#[derive(Debug, Clone)]
pub struct CalibratorModel {
    pub config: CalibratorConfig,
    pub params: ParamStore,
    arch: CalibratorArch,
}

fn build_calibrator_arch(
    config: &CalibratorConfig,
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
) -> CalibratorArch {
    let d = config.d_model;
    let proj_e = Linear::init(store, rng, "proj_e", config.d_e, config.d_p);
    let in_proj = Linear::init(store, rng, "in_proj", config.d_p, d);
    let timestep_proj = match config.mode {
        CalibratorMode::Residual => Some(Linear::init(store, rng, "timestep_proj", d, d)),
        CalibratorMode::Direct => None,
    };
    let layers = (0..config.n_layers)
        .map(|l| EncoderLayer::init(store, rng, &format!("enc{l}"), d, config.n_heads, config.d_ff()))
        .collect();
    let final_ln = LayerNorm::init(store, "final_ln", d);
    let out_proj = match config.mode {
        CalibratorMode::Residual => Linear::init_zero(store, "out_proj", d, config.d_p),
        CalibratorMode::Direct => Linear::init(store, rng, "out_proj", d, config.d_p),
    };
    let aux_head = match config.mode {
        CalibratorMode::Direct => Some(Linear::init(store, rng, "aux_head", d, 2)),
        CalibratorMode::Residual => None,
    };
    CalibratorArch {
        proj_e,
        in_proj,
        timestep_proj,
        layers,
        final_ln,
        out_proj,
        aux_head,
    }
}

/// Output handles of one calibrator forward pass on a tape.
pub struct CalibratorOutput {
    /// `T x d_p`: refined frames (direct) or predicted residuals (residual).
    pub output: Var,
    /// `1 x 2` pooled auxiliary head (direct mode only): predicted (bias, sigma).
    pub aux: Option<Var>,
}

impl CalibratorModel {
    pub fn init(config: CalibratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = build_calibrator_arch(&config, &mut store, &mut rng);
        Ok(CalibratorModel {
            config,
            params: store,
            arch,
        })
    }

    fn check_inputs(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
        timestep: Option<usize>,
    ) -> Result<()> {
        if condition.dim() != self.config.d_e {
            return Err(Error::shape("condition", self.config.d_e, condition.dim()));
        }
        if motion.pose_dim() != self.config.d_p {
            return Err(Error::shape("motion pose dim", self.config.d_p, motion.pose_dim()));
        }
        if motion.frame_count() > self.config.max_frames {
            return Err(Error::shape(
                "frame count",
                format!("<= {}", self.config.max_frames),
                motion.frame_count(),
            ));
        }
        match (self.config.mode, timestep) {
            (CalibratorMode::Residual, None) => {
                Err(Error::Params("residual mode requires a timestep".into()))
            }
            (CalibratorMode::Direct, Some(_)) => {
                Err(Error::Params("direct mode takes no timestep".into()))
            }
            _ => Ok(()),
        }
    }

    /// Record the forward pass on a tape. `frames` is a `T x d_p` leaf.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        mounted: &Mounted,
        cond: Var,
        frames: Var,
        timestep: Option<usize>,
    ) -> CalibratorOutput {
        let t = tape.value(frames).shape()[0];
        let d = self.config.d_model;

        let cond_tok = self.arch.proj_e.apply(tape, mounted, cond);
        let tokens_p = tape.concat_rows(cond_tok, frames);
        let mut x = self.arch.in_proj.apply(tape, mounted, tokens_p);

        let pe = tape.leaf(positional_encoding(t + 1, d));
        x = tape.add(x, pe);

        if let (Some(tp), Some(step)) = (&self.arch.timestep_proj, timestep) {
            let emb = Mat::from_shape_vec((1, d), sinusoid(step as f64, d))
                .expect("sinusoid shape");
            let emb = tape.leaf(emb);
            let emb = tp.apply(tape, mounted, emb);
            x = tape.add_row(x, emb);
        }

        for layer in &self.arch.layers {
            x = layer.apply(tape, mounted, x);
        }
        x = self.arch.final_ln.apply(tape, mounted, x);

        let frames_out = tape.slice_rows(x, 1, t);
        let output = self.arch.out_proj.apply(tape, mounted, frames_out);

        let aux = self.arch.aux_head.as_ref().map(|head| {
            let pooled = tape.mean_rows(x);
            head.apply(tape, mounted, pooled)
        });

        CalibratorOutput { output, aux }
    }

    /// One forward pass. Returns a motion with the same frame count, fps, and
    /// skeleton; in residual mode the frames hold the predicted residuals.
    pub fn forward(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
        timestep: Option<usize>,
    ) -> Result<MotionSequence> {
        Ok(self.forward_with_aux(condition, motion, timestep)?.0)
    }

    /// Forward pass that also returns the pooled (bias, sigma) regression in
    /// direct mode.
    pub fn forward_with_aux(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
        timestep: Option<usize>,
    ) -> Result<(MotionSequence, Option<(f64, f64)>)> {
        self.check_inputs(condition, motion, timestep)?;
        let mut tape = Tape::new();
        let mounted = mount(&mut tape, &self.params);
        let cond = tape.leaf(condition_row(condition));
        let frames = tape.leaf(motion.to_flat());
        let out = self.forward_tape(&mut tape, &mounted, cond, frames, timestep);
        let result = motion.with_flat(tape.value(out.output));
        let aux = out.aux.map(|v| {
            let m = tape.value(v);
            (m[[0, 0]], m[[0, 1]])
        });
        Ok((result, aux))
    }
}

pub fn condition_row(condition: &ConditionVector) -> Mat {
    Mat::from_shape_vec((1, condition.dim()), condition.values.clone())
        .expect("condition row shape")
}

/// Anything that can play the critic role in the adversarial losses.
pub trait Critic: Sync {
    fn params(&self) -> &ParamStore;
    /// Record the critic's scalar score of `(condition, motion)` on the tape.
    fn score_tape(&self, tape: &mut Tape, mounted: &Mounted, cond: Var, motion: Var) -> Var;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub d_p: usize,
    pub d_e: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
}

impl DiscriminatorConfig {
    /// Two encoder layers, mean pooling, linear score: the Wasserstein critic.
    pub fn desk_scale(d_p: usize, d_e: usize) -> Self {
        DiscriminatorConfig {
            d_p,
            d_e,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
        }
    }

    pub fn micro(d_p: usize, d_e: usize) -> Self {
        DiscriminatorConfig {
            d_p,
            d_e,
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct DiscriminatorArch {
    proj_e: Linear,
    in_proj: Linear,
    layers: Vec<EncoderLayer>,
    final_ln: LayerNorm,
    score: Linear,
}

/// Token-transformer critic over `[condition token; motion tokens]`, mean
/// pooled into one unbounded scalar score.
#[derive(Debug, Clone)]
pub struct DiscriminatorModel {
    pub config: DiscriminatorConfig,
    pub params: ParamStore,
    arch: DiscriminatorArch,
}

impl DiscriminatorModel {
    pub fn init(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let arch = DiscriminatorArch {
            proj_e: Linear::init(&mut store, &mut rng, "d.proj_e", config.d_e, config.d_p),
            in_proj: Linear::init(&mut store, &mut rng, "d.in_proj", config.d_p, d),
            layers: (0..config.n_layers)
                .map(|l| {
                    EncoderLayer::init(&mut store, &mut rng, &format!("d.enc{l}"), d, config.n_heads, 4 * d)
                })
                .collect(),
            final_ln: LayerNorm::init(&mut store, "d.final_ln", d),
            score: Linear::init(&mut store, &mut rng, "d.score", d, 1),
        };
        Ok(DiscriminatorModel {
            config,
            params: store,
            arch,
        })
    }

    /// Scalar critic score of one (condition, motion) pair.
    pub fn discriminate(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
    ) -> Result<f64> {
        self.check_inputs(condition, motion)?;
        let mut tape = Tape::new();
        let mounted = mount(&mut tape, &self.params);
        let cond = tape.leaf(condition_row(condition));
        let frames = tape.leaf(motion.to_flat());
        let s = self.score_tape(&mut tape, &mounted, cond, frames);
        Ok(tape.scalar(s))
    }

    /// Gradient of the score with respect to the motion input, `T x J x 3`.
    pub fn input_gradient(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
    ) -> Result<ndarray::Array3<f64>> {
        self.check_inputs(condition, motion)?;
        let mut tape = Tape::new();
        let mounted = mount(&mut tape, &self.params);
        let cond = tape.leaf(condition_row(condition));
        let frames = tape.leaf(motion.to_flat());
        let s = self.score_tape(&mut tape, &mounted, cond, frames);
        let grads = tape.backward(s);
        let flat = grads.get_or_zeros(frames, (motion.frame_count(), motion.pose_dim()));
        Ok(motion.with_flat(&flat).frames)
    }

    fn check_inputs(&self, condition: &ConditionVector, motion: &MotionSequence) -> Result<()> {
        if condition.dim() != self.config.d_e {
            return Err(Error::shape("condition", self.config.d_e, condition.dim()));
        }
        if motion.pose_dim() != self.config.d_p {
            return Err(Error::shape("motion pose dim", self.config.d_p, motion.pose_dim()));
        }
        Ok(())
    }
}

impl Critic for DiscriminatorModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn score_tape(&self, tape: &mut Tape, mounted: &Mounted, cond: Var, motion: Var) -> Var {
        let t = tape.value(motion).shape()[0];
        let cond_tok = self.arch.proj_e.apply(tape, mounted, cond);
        let tokens_p = tape.concat_rows(cond_tok, motion);
        let mut x = self.arch.in_proj.apply(tape, mounted, tokens_p);
        let pe = tape.leaf(positional_encoding(t + 1, self.config.d_model));
        x = tape.add(x, pe);
        for layer in &self.arch.layers {
            x = layer.apply(tape, mounted, x);
        }
        x = self.arch.final_ln.apply(tape, mounted, x);
        let pooled = tape.mean_rows(x);
        self.arch.score.apply(tape, mounted, pooled)
    }
}

/// Diagnostic critic `D(x) = <w, x>`; ignores the condition. Used to pin the
/// adversarial losses against hand computations.
#[derive(Debug, Clone)]
pub struct LinearCritic {
    params: ParamStore,
    w: ParamId,
}

impl LinearCritic {
    /// `w` must have the same shape as the flattened motions it will score.
    pub fn new(w: Mat) -> Self {
        let mut params = ParamStore::new();
        let w = params.add("w", w);
        LinearCritic { params, w }
    }
}

impl Critic for LinearCritic {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn score_tape(&self, tape: &mut Tape, mounted: &Mounted, _cond: Var, motion: Var) -> Var {
        tape.dot(mounted.var(self.w), motion)
    }
}

/// Diagnostic critic with a constant score; its input gradient is identically
/// zero, which pins the gradient penalty at its (0 - 1)^2 floor.
#[derive(Debug, Clone)]
pub struct ConstantCritic {
    params: ParamStore,
    c: ParamId,
}

impl ConstantCritic {
    pub fn new(value: f64) -> Self {
        let mut params = ParamStore::new();
        let c = params.add("c", Mat::from_elem((1, 1), value));
        ConstantCritic { params, c }
    }
}

impl Critic for ConstantCritic {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn score_tape(&self, tape: &mut Tape, mounted: &Mounted, _cond: Var, _motion: Var) -> Var {
        // Identity on the parameter: score = c regardless of input.
        tape.scale(mounted.var(self.c), 1.0)
    }
}

/// Predicts the per-frame residual for one refinement step.
pub trait ResidualPredictor {
    fn predict_residual(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
        t: usize,
    ) -> Result<MotionSequence>;
}

impl ResidualPredictor for CalibratorModel {
    fn predict_residual(
        &self,
        condition: &ConditionVector,
        motion: &MotionSequence,
        t: usize,
    ) -> Result<MotionSequence> {
        if self.config.mode != CalibratorMode::Residual {
            return Err(Error::Params(
                "predict_residual requires a residual-mode calibrator".into(),
            ));
        }
        self.forward(condition, motion, Some(t))
    }
}

// --- checkpoints -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ParamDoc {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    kind: String,
    config: CalibratorConfig,
    params: Vec<ParamDoc>,
}

/// Write a calibrator checkpoint: config plus every named parameter, floats in
/// shortest round-trip decimal so reloading is bit-exact.
pub fn save_checkpoint(model: &CalibratorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = CheckpointDoc {
        kind: "calibrator".into(),
        config: model.config,
        params: model
            .params
            .iter()
            .map(|(name, m)| ParamDoc {
                name: name.to_string(),
                rows: m.shape()[0],
                cols: m.shape()[1],
                data: m.iter().cloned().collect(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&doc).expect("checkpoint serializes");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CalibratorModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CheckpointDoc =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if doc.kind != "calibrator" {
        return Err(Error::Checkpoint(format!(
            "expected kind \"calibrator\", found {:?}",
            doc.kind
        )));
    }
    let mut model = CalibratorModel::init(doc.config, 0)?;
    if doc.params.len() != model.params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, config implies {}",
            doc.params.len(),
            model.params.len()
        )));
    }
    for p in doc.params {
        let id = model
            .params
            .find(&p.name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {:?}", p.name)))?;
        let expected = model.params.value(id).raw_dim();
        if (p.rows, p.cols) != (expected[0], expected[1]) {
            return Err(Error::Checkpoint(format!(
                "parameter {:?} has shape {}x{}, config implies {}x{}",
                p.name, p.rows, p.cols, expected[0], expected[1]
            )));
        }
        if p.data.len() != p.rows * p.cols {
            return Err(Error::Checkpoint(format!(
                "parameter {:?} data length {} does not match {}x{}",
                p.name,
                p.data.len(),
                p.rows,
                p.cols
            )));
        }
        if p.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint(format!(
                "parameter {:?} contains non-finite values",
                p.name
            )));
        }
        *model.params.value_mut(id) =
            Mat::from_shape_vec((p.rows, p.cols), p.data).expect("length checked");
    }
    Ok(model)
}

// --- retrieval encoder ------------------------------------------------------

/// Tiny auxiliary model for the retrieval metric: ridge regression from the
/// deterministic motion features onto the condition vector.
#[derive(Debug, Clone)]
pub struct ConditionRegressor {
    w: Mat,
    b: Vec<f64>,
    contact: ContactParams,
}

impl ConditionRegressor {
    /// Fit on records that carry conditions. `ridge` stabilizes the normal
    /// equations; 1e-3 is a reasonable default at desk scale.
    pub fn fit(records: &[MotionRecord], contact: &ContactParams, ridge: f64) -> Result<Self> {
        let data: Vec<(&MotionRecord, &ConditionVector)> = records
            .iter()
            .filter_map(|r| r.condition.as_ref().map(|c| (r, c)))
            .collect();
        if data.len() < 2 {
            return Err(Error::Params(
                "condition regressor needs at least 2 conditioned records".into(),
            ));
        }
        let d_e = data[0].1.dim();
        let feats: Vec<Vec<f64>> = data
            .iter()
            .map(|(r, _)| motion_features(&r.motion, contact))
            .collect();
        let f = feats[0].len();
        let n = data.len();

        // Means for centering.
        let mut fx = vec![0.0; f];
        let mut fy = vec![0.0; d_e];
        for (feat, (_, cond)) in feats.iter().zip(&data) {
            for (m, x) in fx.iter_mut().zip(feat) {
                *m += x;
            }
            for (m, y) in fy.iter_mut().zip(&cond.values) {
                *m += y;
            }
        }
        for m in fx.iter_mut().chain(fy.iter_mut()) {
            *m /= n as f64;
        }

        // Normal equations on centered data: (X^T X + ridge I) W = X^T Y.
        let mut xtx = Mat::zeros((f, f));
        let mut xty = Mat::zeros((f, d_e));
        for (feat, (_, cond)) in feats.iter().zip(&data) {
            for i in 0..f {
                let xi = feat[i] - fx[i];
                for k in 0..f {
                    xtx[[i, k]] += xi * (feat[k] - fx[k]);
                }
                for k in 0..d_e {
                    xty[[i, k]] += xi * (cond.values[k] - fy[k]);
                }
            }
        }
        for i in 0..f {
            xtx[[i, i]] += ridge;
        }

        // Invert through the eigendecomposition; ridge keeps eigenvalues positive.
        let (vals, v) = symmetric_eigen(&xtx);
        let mut inv = Mat::zeros((f, f));
        for (k, lam) in vals.iter().enumerate() {
            let r = 1.0 / lam.max(ridge * 1e-3);
            for i in 0..f {
                for j in 0..f {
                    inv[[i, j]] += r * v[[i, k]] * v[[j, k]];
                }
            }
        }
        let w = inv.dot(&xty);

        // Intercept restores the uncentered map.
        let mut b = fy.clone();
        for k in 0..d_e {
            for i in 0..f {
                b[k] -= fx[i] * w[[i, k]];
            }
        }

        Ok(ConditionRegressor {
            w,
            b,
            contact: *contact,
        })
    }
}

impl MotionEncoder for ConditionRegressor {
    fn embed(&self, motion: &MotionSequence) -> Vec<f64> {
        let feat = motion_features(motion, &self.contact);
        let d_e = self.b.len();
        let mut out = self.b.clone();
        for k in 0..d_e {
            for (i, x) in feat.iter().enumerate() {
                out[k] += x * self.w[[i, k]];
            }
        }
        out
    }
}

/// Collect parameter gradients of a scalar loss already on a tape.
pub fn param_grads(grads: &Grads, mounted: &Mounted, store: &ParamStore) -> Vec<Mat> {
    collect_grads(grads, mounted, store)
}

/// Convenience: fresh Adam for a model's parameters.
pub fn adam_for(store: &ParamStore, lr: f64) -> Adam {
    Adam::new(store, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_motion, GaitParams};

    fn sample() -> (ConditionVector, MotionSequence) {
        let params = GaitParams {
            speed: 1.0,
            heading: 0.0,
            turn_rate: 0.0,
            step_frequency: 1.5,
            step_height: 0.12,
            stance_ratio: 0.6,
            duration: 1.5,
            seed: 1,
        };
        let rec = generate_motion(&params, 20.0).unwrap();
        (rec.condition.unwrap(), rec.motion)
    }

    #[test]
    fn forward_preserves_frame_count_and_meta() {
        let (cond, motion) = sample();
        let config = CalibratorConfig::micro(motion.pose_dim(), cond.dim(), CalibratorMode::Direct);
        let model = CalibratorModel::init(config, 9).unwrap();
        let out = model.forward(&cond, &motion, None).unwrap();
        assert_eq!(out.frame_count(), motion.frame_count());
        assert_eq!(out.fps, motion.fps);
        assert_eq!(out.skeleton, motion.skeleton);
    }

    #[test]
    fn timestep_contract_is_enforced() {
        let (cond, motion) = sample();
        let direct = CalibratorModel::init(
            CalibratorConfig::micro(motion.pose_dim(), cond.dim(), CalibratorMode::Direct),
            0,
        )
        .unwrap();
        assert!(direct.forward(&cond, &motion, Some(3)).is_err());
        let residual = CalibratorModel::init(
            CalibratorConfig::micro(motion.pose_dim(), cond.dim(), CalibratorMode::Residual),
            0,
        )
        .unwrap();
        assert!(residual.forward(&cond, &motion, None).is_err());
        assert!(residual.forward(&cond, &motion, Some(1)).is_ok());
    }

    #[test]
    fn residual_head_starts_at_zero() {
        let (cond, motion) = sample();
        let model = CalibratorModel::init(
            CalibratorConfig::micro(motion.pose_dim(), cond.dim(), CalibratorMode::Residual),
            4,
        )
        .unwrap();
        let out = model.forward(&cond, &motion, Some(5)).unwrap();
        assert!(out.frames.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let (cond, motion) = sample();
        let config = CalibratorConfig::micro(motion.pose_dim(), cond.dim(), CalibratorMode::Direct);
        let a = CalibratorModel::init(config, 7).unwrap();
        let b = CalibratorModel::init(config, 7).unwrap();
        for ((_, x), (_, y)) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(x, y);
        }
        let c = CalibratorModel::init(config, 8).unwrap();
        assert!(a.params.iter().zip(c.params.iter()).any(|((_, x), (_, y))| x != y));
    }

    #[test]
    fn discriminator_score_is_finite_and_conditional() {
        let (cond, motion) = sample();
        let disc = DiscriminatorModel::init(
            DiscriminatorConfig::micro(motion.pose_dim(), cond.dim()),
            3,
        )
        .unwrap();
        let s = disc.discriminate(&cond, &motion).unwrap();
        assert!(s.is_finite());
        let mut other = cond.clone();
        other.values[0] += 0.5;
        let s2 = disc.discriminate(&other, &motion).unwrap();
        assert_ne!(s, s2);
    }

    #[test]
    fn regressor_recovers_linear_structure() {
        let records: Vec<MotionRecord> = (0..40)
            .map(|i| {
                let params = GaitParams {
                    speed: 0.6 + 0.03 * i as f64,
                    heading: 0.0,
                    turn_rate: 0.0,
                    step_frequency: 1.5,
                    step_height: 0.12,
                    stance_ratio: 0.6,
                    duration: 1.5,
                    seed: i as u64,
                };
                generate_motion(&params, 20.0).unwrap()
            })
            .collect();
        let reg = ConditionRegressor::fit(&records, &ContactParams::default(), 1e-3).unwrap();
        // Speed is the first condition component and is visible in the
        // features, so the fitted encoder should rank most motions correctly.
        let emb = reg.embed(&records[0].motion);
        assert_eq!(emb.len(), records[0].condition.as_ref().unwrap().dim());
    }
}
