//! Minimal reverse-mode autodiff over 64-bit matrices.
//!
//! A [`Tape`] records a DAG of matrix operations; [`Tape::backward`] walks it
//! in reverse and accumulates gradients for every node, including leaves, so
//! both parameter gradients and input gradients (needed by the critic's
//! gradient penalty) come from the same machinery. Values are `f64`
//! throughout: the gradient checks in the test suite compare against central
//! finite differences at 1e-4 relative tolerance, which single precision
//! cannot support.

use std::sync::Arc;

use ndarray::Array2;

pub type Mat = Array2<f64>;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    /// `op(a) . op(b)` with optional transposes; `tt` is unused and rejected.
    MatMul { ta: bool, tb: bool },
    Add,
    Sub,
    /// Matrix plus a `(1, n)` row broadcast over rows.
    AddRow,
    /// Matrix times a `(1, n)` row broadcast over rows.
    MulRow,
    Scale(f64),
    Gelu,
    SoftmaxRows,
    /// Per-row standardization `(x - mean) / sqrt(var + eps)`.
    NormRows { eps: f64 },
    ConcatRows,
    SliceRows { start: usize },
    MeanRows,
    MeanAll,
    /// Sum of squared entries, `(1, 1)`.
    SumSq,
    /// Sum of the elementwise product, `(1, 1)`.
    Dot,
}

struct Node {
    op: Op,
    parents: [usize; 2],
    value: Arc<Mat>,
}

/// Gradients aligned with tape nodes; absent entries mean "no path to the root".
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of a leaf, materialized as zeros when absent.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Mat {
        match self.grads[v.0].as_ref() {
            Some(g) => g.clone(),
            None => Mat::zeros(shape),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), [1, 1]);
        m[[0, 0]]
    }

    fn push(&mut self, op: Op, parents: [usize; 2], value: Mat) -> Var {
        self.nodes.push(Node {
            op,
            parents,
            value: Arc::new(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(Op::Leaf, [NONE, NONE], value)
    }

    /// Leaf sharing an existing allocation (parameters mounted on the tape).
    pub fn leaf_shared(&mut self, value: Arc<Mat>) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            parents: [NONE, NONE],
            value,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, b, false, false)
    }

    /// Matmul with optional transposes on either operand.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        assert!(!(ta && tb), "double-transposed matmul is unsupported");
        let av = self.value(a);
        let bv = self.value(b);
        let value = match (ta, tb) {
            (false, false) => av.dot(bv),
            (true, false) => av.t().dot(bv),
            (false, true) => av.dot(&bv.t()),
            (true, true) => unreachable!(),
        };
        self.push(Op::MatMul { ta, tb }, [a.0, b.0], value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(Op::Add, [a.0, b.0], value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(Op::Sub, [a.0, b.0], value)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let rv = self.value(row);
        debug_assert_eq!(rv.shape()[0], 1);
        let value = self.value(a) + rv;
        self.push(Op::AddRow, [a.0, row.0], value)
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let rv = self.value(row);
        debug_assert_eq!(rv.shape()[0], 1);
        let value = self.value(a) * rv;
        self.push(Op::MulRow, [a.0, row.0], value)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(Op::Scale(c), [a.0, NONE], value)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(gelu);
        self.push(Op::Gelu, [a.0, NONE], value)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut value = av.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(Op::SoftmaxRows, [a.0, NONE], value)
    }

    pub fn norm_rows(&mut self, a: Var, eps: f64) -> Var {
        let av = self.value(a);
        let n = av.shape()[1] as f64;
        let mut value = av.clone();
        for mut row in value.rows_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let s = (var + eps).sqrt();
            row.mapv_inplace(|x| (x - mean) / s);
        }
        self.push(Op::NormRows { eps }, [a.0, NONE], value)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        debug_assert_eq!(av.shape()[1], bv.shape()[1]);
        let mut value = Mat::zeros((av.shape()[0] + bv.shape()[0], av.shape()[1]));
        value
            .slice_mut(ndarray::s![..av.shape()[0], ..])
            .assign(av);
        value
            .slice_mut(ndarray::s![av.shape()[0].., ..])
            .assign(bv);
        self.push(Op::ConcatRows, [a.0, b.0], value)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self
            .value(a)
            .slice(ndarray::s![start..start + len, ..])
            .to_owned();
        self.push(Op::SliceRows { start }, [a.0, NONE], value)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let m = av.shape()[0] as f64;
        let value = av
            .sum_axis(ndarray::Axis(0))
            .insert_axis(ndarray::Axis(0))
            / m;
        self.push(Op::MeanRows, [a.0, NONE], value)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = (av.shape()[0] * av.shape()[1]) as f64;
        let value = Mat::from_elem((1, 1), av.sum() / n);
        self.push(Op::MeanAll, [a.0, NONE], value)
    }

    pub fn sum_sq(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).iter().map(|x| x * x).sum();
        self.push(Op::SumSq, [a.0, NONE], Mat::from_elem((1, 1), s))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        debug_assert_eq!(av.shape(), bv.shape());
        let s: f64 = av.iter().zip(bv.iter()).map(|(x, y)| x * y).sum();
        self.push(Op::Dot, [a.0, b.0], Mat::from_elem((1, 1), s))
    }

    /// Mean squared error between two same-shape matrices: `mean((a - b)^2)`.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let n = {
            let s = self.value(a).shape();
            (s[0] * s[1]) as f64
        };
        let diff = self.sub(a, b);
        let ss = self.sum_sq(diff);
        self.scale(ss, 1.0 / n)
    }

    /// Reverse pass from a scalar `(1, 1)` root. Multiple backward calls on
    /// the same tape (from different roots) are independent.
    pub fn backward(&self, root: Var) -> Grads {
        assert_eq!(
            self.value(root).shape(),
            [1, 1],
            "backward root must be a scalar"
        );
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Mat::from_elem((1, 1), 1.0));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                // Leaf gradients stay readable after the pass.
                continue;
            }
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            let [pa, pb] = node.parents;
            let add_grad = |grads: &mut Vec<Option<Mat>>, parent: usize, g: Mat| {
                match &mut grads[parent] {
                    Some(existing) => *existing += &g,
                    slot @ None => *slot = Some(g),
                }
            };

            match node.op {
                Op::Leaf => {}
                Op::MatMul { ta, tb } => {
                    let a = &*self.nodes[pa].value;
                    let b = &*self.nodes[pb].value;
                    let (ga, gb) = match (ta, tb) {
                        (false, false) => (grad.dot(&b.t()), a.t().dot(&grad)),
                        (true, false) => (b.dot(&grad.t()), a.dot(&grad)),
                        (false, true) => (grad.dot(b), grad.t().dot(a)),
                        (true, true) => unreachable!(),
                    };
                    add_grad(&mut grads, pa, ga);
                    add_grad(&mut grads, pb, gb);
                }
                Op::Add => {
                    add_grad(&mut grads, pa, grad.clone());
                    add_grad(&mut grads, pb, grad);
                }
                Op::Sub => {
                    add_grad(&mut grads, pa, grad.clone());
                    add_grad(&mut grads, pb, -grad);
                }
                Op::AddRow => {
                    let row_grad = grad
                        .sum_axis(ndarray::Axis(0))
                        .insert_axis(ndarray::Axis(0));
                    add_grad(&mut grads, pa, grad);
                    add_grad(&mut grads, pb, row_grad);
                }
                Op::MulRow => {
                    let a = &*self.nodes[pa].value;
                    let row = &*self.nodes[pb].value;
                    let ga = &grad * row;
                    let grow = (&grad * a)
                        .sum_axis(ndarray::Axis(0))
                        .insert_axis(ndarray::Axis(0));
                    add_grad(&mut grads, pa, ga);
                    add_grad(&mut grads, pb, grow);
                }
                Op::Scale(c) => {
                    add_grad(&mut grads, pa, grad * c);
                }
                Op::Gelu => {
                    let a = &*self.nodes[pa].value;
                    let ga = ndarray::Zip::from(&grad)
                        .and(a)
                        .map_collect(|g, &x| g * gelu_derivative(x));
                    add_grad(&mut grads, pa, ga);
                }
                Op::SoftmaxRows => {
                    let y = &*node.value;
                    let mut ga = &grad * y;
                    for (mut grow, yrow) in ga.rows_mut().into_iter().zip(y.rows()) {
                        let s: f64 = grow.sum();
                        ndarray::Zip::from(&mut grow)
                            .and(&yrow)
                            .for_each(|g, &yv| *g -= s * yv);
                    }
                    add_grad(&mut grads, pa, ga);
                }
                Op::NormRows { eps } => {
                    let x = &*self.nodes[pa].value;
                    let y = &*node.value;
                    let n = x.shape()[1] as f64;
                    let mut ga = Mat::zeros(x.raw_dim());
                    for i in 0..x.shape()[0] {
                        let xr = x.row(i);
                        let yr = y.row(i);
                        let gr = grad.row(i);
                        let mean = xr.sum() / n;
                        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let s = (var + eps).sqrt();
                        let g_mean = gr.sum() / n;
                        let gy_mean = gr
                            .iter()
                            .zip(yr.iter())
                            .map(|(g, yv)| g * yv)
                            .sum::<f64>()
                            / n;
                        for j in 0..x.shape()[1] {
                            ga[[i, j]] = (gr[j] - g_mean - yr[j] * gy_mean) / s;
                        }
                    }
                    add_grad(&mut grads, pa, ga);
                }
                Op::ConcatRows => {
                    let rows_a = self.nodes[pa].value.shape()[0];
                    let ga = grad.slice(ndarray::s![..rows_a, ..]).to_owned();
                    let gb = grad.slice(ndarray::s![rows_a.., ..]).to_owned();
                    add_grad(&mut grads, pa, ga);
                    add_grad(&mut grads, pb, gb);
                }
                Op::SliceRows { start } => {
                    let parent_shape = self.nodes[pa].value.raw_dim();
                    let mut ga = Mat::zeros(parent_shape);
                    ga.slice_mut(ndarray::s![start..start + grad.shape()[0], ..])
                        .assign(&grad);
                    add_grad(&mut grads, pa, ga);
                }
                Op::MeanRows => {
                    let a_shape = self.nodes[pa].value.raw_dim();
                    let m = a_shape[0] as f64;
                    let mut ga = Mat::zeros(a_shape);
                    for mut row in ga.rows_mut() {
                        row.assign(&(grad.row(0).to_owned() / m));
                    }
                    add_grad(&mut grads, pa, ga);
                }
                Op::MeanAll => {
                    let a_shape = self.nodes[pa].value.raw_dim();
                    let n = (a_shape[0] * a_shape[1]) as f64;
                    let ga = Mat::from_elem(a_shape, grad[[0, 0]] / n);
                    add_grad(&mut grads, pa, ga);
                }
                Op::SumSq => {
                    let a = &*self.nodes[pa].value;
                    let ga = a * (2.0 * grad[[0, 0]]);
                    add_grad(&mut grads, pa, ga);
                }
                Op::Dot => {
                    let a = &*self.nodes[pa].value;
                    let b = &*self.nodes[pb].value;
                    let c = grad[[0, 0]];
                    add_grad(&mut grads, pa, b * c);
                    add_grad(&mut grads, pb, a * c);
                }
            }
        }

        Grads { grads }
    }
}

/// tanh-approximated GELU; smooth everywhere, which the finite-difference
/// gradient checks rely on.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central finite difference over every entry of every listed leaf.
    fn fd_check(build: impl Fn(&mut Tape, &[Mat]) -> Var, leaves: &[Mat], tol: f64) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = leaves.iter().map(|m| tape.leaf(m.clone())).collect();
        let root = build(&mut tape, leaves);
        let grads = tape.backward(root);

        let eps = 1e-6;
        for (li, leaf) in leaves.iter().enumerate() {
            let analytic = grads.get_or_zeros(vars[li], (leaf.shape()[0], leaf.shape()[1]));
            for i in 0..leaf.shape()[0] {
                for j in 0..leaf.shape()[1] {
                    let eval = |delta: f64| {
                        let mut tape = Tape::new();
                        let mut perturbed: Vec<Mat> = leaves.to_vec();
                        perturbed[li][[i, j]] += delta;
                        for m in &perturbed {
                            tape.leaf(m.clone());
                        }
                        let root = build(&mut tape, &perturbed);
                        tape.scalar(root)
                    };
                    let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
                    let a = analytic[[i, j]];
                    let denom = a.abs().max(fd.abs()).max(1e-8);
                    assert!(
                        (a - fd).abs() / denom < tol,
                        "leaf {li} [{i},{j}]: analytic {a} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn matmul_chain_gradients() {
        let a = array![[0.3, -0.7], [1.1, 0.4], [0.2, 0.9]];
        let b = array![[0.5, 0.2, -0.3], [-0.1, 0.8, 0.6]];
        fd_check(
            |tape, _| {
                let x = tape.matmul(Var(0), Var(1));
                tape.sum_sq(x)
            },
            &[a, b],
            1e-6,
        );
    }

    #[test]
    fn transposed_matmul_gradients() {
        let a = array![[0.3, -0.7], [1.1, 0.4]];
        let b = array![[0.5, 0.2], [-0.1, 0.8]];
        fd_check(
            |tape, _| {
                let nt = tape.matmul_t(Var(0), Var(1), false, true);
                let tn = tape.matmul_t(Var(0), Var(1), true, false);
                let s = tape.add(nt, tn);
                tape.sum_sq(s)
            },
            &[a, b],
            1e-6,
        );
    }

    #[test]
    fn softmax_norm_gelu_gradients() {
        let a = array![[0.3, -0.7, 0.2], [1.1, 0.4, -0.5]];
        fd_check(
            |tape, _| {
                let s = tape.softmax_rows(Var(0));
                let n = tape.norm_rows(s, 1e-5);
                let g = tape.gelu(n);
                tape.sum_sq(g)
            },
            &[a],
            1e-5,
        );
    }

    #[test]
    fn broadcast_and_shape_op_gradients() {
        let a = array![[0.3, -0.7], [1.1, 0.4], [-0.2, 0.6]];
        let row = array![[0.25, -0.5]];
        fd_check(
            |tape, _| {
                let ar = tape.add_row(Var(0), Var(1));
                let mr = tape.mul_row(ar, Var(1));
                let cat = tape.concat_rows(mr, Var(0));
                let sl = tape.slice_rows(cat, 1, 4);
                let mean = tape.mean_rows(sl);
                let d = tape.dot(mean, Var(1));
                let m = tape.mean_all(sl);
                tape.add(d, m)
            },
            &[a, row],
            1e-6,
        );
    }

    #[test]
    fn mse_matches_hand_value() {
        let mut tape = Tape::new();
        let a = tape.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let b = tape.leaf(array![[0.0, 2.0], [3.0, 2.0]]);
        let l = tape.mse(a, b);
        assert!((tape.scalar(l) - (1.0 + 0.0 + 0.0 + 4.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn backward_twice_from_different_roots() {
        let mut tape = Tape::new();
        let a = tape.leaf(array![[1.0, 2.0]]);
        let s1 = tape.sum_sq(a);
        let s2 = tape.mean_all(a);
        let g1 = tape.backward(s1);
        let g2 = tape.backward(s2);
        assert_eq!(g1.get(a).unwrap()[[0, 0]], 2.0);
        assert_eq!(g2.get(a).unwrap()[[0, 0]], 0.5);
    }

    #[test]
    fn disconnected_leaf_has_no_grad() {
        let mut tape = Tape::new();
        let a = tape.leaf(array![[1.0]]);
        let b = tape.leaf(array![[2.0]]);
        let s = tape.sum_sq(a);
        let g = tape.backward(s);
        assert!(g.get(b).is_none());
    }
}
