//! Transformer building blocks expressed as tape programs over a [`ParamStore`].

use rand_chacha::ChaCha8Rng;

use super::params::{Mounted, ParamId, ParamStore, xavier};
use super::tensor::{Mat, Tape, Var};

const LN_EPS: f64 = 1e-5;

/// Linear map `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        d_in: usize,
        d_out: usize,
    ) -> Self {
        Linear {
            w: store.add(format!("{name}.w"), xavier(rng, d_in, d_out)),
            b: store.add(format!("{name}.b"), Mat::zeros((1, d_out))),
        }
    }

    /// Zero-initialized variant; the output head of residual-mode calibrators
    /// starts as the identity refinement.
    pub fn init_zero(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        Linear {
            w: store.add(format!("{name}.w"), Mat::zeros((d_in, d_out))),
            b: store.add(format!("{name}.b"), Mat::zeros((1, d_out))),
        }
    }

    pub fn apply(&self, tape: &mut Tape, mounted: &Mounted, x: Var) -> Var {
        let xw = tape.matmul(x, mounted.var(self.w));
        tape.add_row(xw, mounted.var(self.b))
    }
}

/// LayerNorm with learned gain and bias.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn init(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        LayerNorm {
            gain: store.add(format!("{name}.gain"), Mat::from_elem((1, dim), 1.0)),
            bias: store.add(format!("{name}.bias"), Mat::zeros((1, dim))),
        }
    }

    pub fn apply(&self, tape: &mut Tape, mounted: &Mounted, x: Var) -> Var {
        let n = tape.norm_rows(x, LN_EPS);
        let g = tape.mul_row(n, mounted.var(self.gain));
        tape.add_row(g, mounted.var(self.bias))
    }
}

/// Multi-head self-attention with per-head projection matrices. Head outputs
/// are mapped back to model width and summed, which is equivalent to the usual
/// concat-then-project formulation.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Vec<ParamId>,
    pub wk: Vec<ParamId>,
    pub wv: Vec<ParamId>,
    pub wo: Vec<ParamId>,
    pub bo: ParamId,
    pub d_head: usize,
}

impl MultiHeadAttention {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        d_model: usize,
        n_heads: usize,
    ) -> Self {
        assert_eq!(d_model % n_heads, 0, "d_model must divide into heads");
        let d_head = d_model / n_heads;
        let mut wq = Vec::new();
        let mut wk = Vec::new();
        let mut wv = Vec::new();
        let mut wo = Vec::new();
        for h in 0..n_heads {
            wq.push(store.add(format!("{name}.h{h}.wq"), xavier(rng, d_model, d_head)));
            wk.push(store.add(format!("{name}.h{h}.wk"), xavier(rng, d_model, d_head)));
            wv.push(store.add(format!("{name}.h{h}.wv"), xavier(rng, d_model, d_head)));
            wo.push(store.add(format!("{name}.h{h}.wo"), xavier(rng, d_head, d_model)));
        }
        let bo = store.add(format!("{name}.bo"), Mat::zeros((1, d_model)));
        MultiHeadAttention {
            wq,
            wk,
            wv,
            wo,
            bo,
            d_head,
        }
    }

    pub fn apply(&self, tape: &mut Tape, mounted: &Mounted, x: Var) -> Var {
        let scale = 1.0 / (self.d_head as f64).sqrt();
        let mut out: Option<Var> = None;
        for h in 0..self.wq.len() {
            let q = tape.matmul(x, mounted.var(self.wq[h]));
            let k = tape.matmul(x, mounted.var(self.wk[h]));
            let v = tape.matmul(x, mounted.var(self.wv[h]));
            let scores = tape.matmul_t(q, k, false, true);
            let scaled = tape.scale(scores, scale);
            let attn = tape.softmax_rows(scaled);
            let ctx = tape.matmul(attn, v);
            let head_out = tape.matmul(ctx, mounted.var(self.wo[h]));
            out = Some(match out {
                None => head_out,
                Some(acc) => tape.add(acc, head_out),
            });
        }
        let summed = out.expect("at least one head");
        tape.add_row(summed, mounted.var(self.bo))
    }
}

/// Pre-norm encoder layer: attention and feed-forward sublayers with residual
/// connections.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

impl EncoderLayer {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        d_model: usize,
        n_heads: usize,
        d_ff: usize,
    ) -> Self {
        EncoderLayer {
            ln1: LayerNorm::init(store, &format!("{name}.ln1"), d_model),
            attn: MultiHeadAttention::init(store, rng, &format!("{name}.attn"), d_model, n_heads),
            ln2: LayerNorm::init(store, &format!("{name}.ln2"), d_model),
            ff1: Linear::init(store, rng, &format!("{name}.ff1"), d_model, d_ff),
            ff2: Linear::init(store, rng, &format!("{name}.ff2"), d_ff, d_model),
        }
    }

    pub fn apply(&self, tape: &mut Tape, mounted: &Mounted, x: Var) -> Var {
        let a = self.ln1.apply(tape, mounted, x);
        let attn = self.attn.apply(tape, mounted, a);
        let x = tape.add(x, attn);
        let b = self.ln2.apply(tape, mounted, x);
        let h = self.ff1.apply(tape, mounted, b);
        let h = tape.gelu(h);
        let ff = self.ff2.apply(tape, mounted, h);
        tape.add(x, ff)
    }
}

/// Sinusoidal encoding of a scalar position into `dim` channels.
pub fn sinusoid(position: f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let half = dim / 2;
    for k in 0..half {
        let freq = 1.0 / 10000f64.powf(k as f64 / half as f64);
        out[2 * k] = (position * freq).sin();
        out[2 * k + 1] = (position * freq).cos();
    }
    if dim % 2 == 1 {
        out[dim - 1] = position;
    }
    out
}

/// Absolute sinusoidal positional encoding for `tokens` rows.
pub fn positional_encoding(tokens: usize, dim: usize) -> Mat {
    let mut pe = Mat::zeros((tokens, dim));
    for i in 0..tokens {
        let row = sinusoid(i as f64, dim);
        for (j, v) in row.into_iter().enumerate() {
            pe[[i, j]] = v;
        }
    }
    pe
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn encoder_layer_preserves_shape() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = EncoderLayer::init(&mut store, &mut rng, "l0", 8, 2, 16);
        let mut tape = Tape::new();
        let mounted = super::super::params::mount(&mut tape, &store);
        let x = tape.leaf(Mat::from_shape_fn((5, 8), |(i, j)| {
            ((i * 8 + j) as f64 * 0.1).sin()
        }));
        let y = layer.apply(&mut tape, &mounted, x);
        assert_eq!(tape.value(y).shape(), &[5, 8]);
    }

    #[test]
    fn positional_rows_are_distinct() {
        let pe = positional_encoding(6, 8);
        for i in 0..6 {
            for j in i + 1..6 {
                let d: f64 = (0..8).map(|c| (pe[[i, c]] - pe[[j, c]]).abs()).sum();
                assert!(d > 1e-6, "rows {i} and {j} coincide");
            }
        }
    }
}
