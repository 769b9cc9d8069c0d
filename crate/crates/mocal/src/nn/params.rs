//! Named parameter storage shared by the models and the optimizer.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Mat, Tape, Var};

/// Index of one parameter matrix inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Ordered, named collection of parameter matrices. Values are `Arc`-shared so
/// mounting them on a tape costs a refcount, not a copy.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Arc<Mat>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        self.names.push(name.into());
        self.values.push(Arc::new(value));
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Mat {
        Arc::make_mut(&mut self.values[id.0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.values.iter().map(|v| v.as_ref()))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total scalar count across all matrices.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.len()).sum()
    }

    /// Flatten all parameters into one vector (store order, row-major).
    pub fn to_flat_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for v in &self.values {
            out.extend(v.iter());
        }
        out
    }

    /// Overwrite all parameters from a flat vector produced by [`Self::to_flat_vec`].
    pub fn set_from_flat_vec(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.scalar_count());
        let mut offset = 0;
        for i in 0..self.values.len() {
            let m = Arc::make_mut(&mut self.values[i]);
            for x in m.iter_mut() {
                *x = flat[offset];
                offset += 1;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|m| m.iter().all(|x| x.is_finite()))
    }

    /// Look up a parameter id by name.
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }
}

/// Tape handles for every parameter of a store, in store order.
pub struct Mounted {
    vars: Vec<Var>,
}

impl Mounted {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Put every parameter on the tape as a shared leaf.
pub fn mount(tape: &mut Tape, store: &ParamStore) -> Mounted {
    Mounted {
        vars: store
            .values
            .iter()
            .map(|v| tape.leaf_shared(v.clone()))
            .collect(),
    }
}

/// Collect per-parameter gradients (store order) after a backward pass,
/// materializing zeros for parameters without a path to the loss.
pub fn collect_grads(
    grads: &super::tensor::Grads,
    mounted: &Mounted,
    store: &ParamStore,
) -> Vec<Mat> {
    store
        .ids()
        .map(|id| {
            let shape = store.value(id).raw_dim();
            grads.get_or_zeros(mounted.var(id), (shape[0], shape[1]))
        })
        .collect()
}

/// Xavier-uniform initialization.
pub fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}
