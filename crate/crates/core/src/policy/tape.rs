//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A tape of primitive operations, each with a hand-derived backward rule.
//! The op set is exactly what the policy network and its training losses
//! need; scalars are 1×1 tensors.

use alloc::vec::Vec;

use super::tensor::{self, Tensor};
use crate::fmath;

/// Handle to a tape node.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct Var(pub usize);

enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    MatMulNT { a: usize, b: usize },
    Add { a: usize, b: usize },
    AddRow { a: usize, bias: usize },
    AddConst { a: usize },
    Scale { a: usize, c: f64 },
    Relu { a: usize },
    GatherRows { a: usize, indices: Vec<u16> },
    SliceCols { a: usize, start: usize },
    ConcatCols { a: usize, b: usize },
    CausalSoftmax { a: usize },
    LayerNorm { a: usize, gain: usize, bias: usize, eps: f64 },
    MaskedLogProb { a: usize, row: usize, target: usize, mask: Vec<bool> },
    SumScalars { parts: Vec<usize> },
    SubConstScalar { a: usize },
    ExpScalar { a: usize },
    MulConstScalar { a: usize, c: f64 },
    ClampScalar { a: usize, lo: f64, hi: f64 },
    MinScalar { a: usize, b: usize },
    /// `sum_r fisher_r * (theta_r - anchor_r)^2`
    QuadPenalty { a: usize, fisher: Tensor, anchor: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value.data[0]
    }

    /// Register an input tensor (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul { a: a.0, b: b.0 })
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::matmul_nt(self.value(a), self.value(b));
        self.push(v, Op::MatMulNT { a: a.0, b: b.0 })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::add(self.value(a), self.value(b));
        self.push(v, Op::Add { a: a.0, b: b.0 })
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let v = tensor::add_row(self.value(a), self.value(bias));
        self.push(v, Op::AddRow { a: a.0, bias: bias.0 })
    }

    /// Add a constant tensor (no gradient through the constant).
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Var {
        let v = tensor::add(self.value(a), c);
        self.push(v, Op::AddConst { a: a.0 })
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = tensor::scale(self.value(a), c);
        self.push(v, Op::Scale { a: a.0, c })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = tensor::relu(self.value(a));
        self.push(v, Op::Relu { a: a.0 })
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[u16]) -> Var {
        let src = self.value(a);
        let mut v = Tensor::zeros(indices.len(), src.cols);
        for (r, &i) in indices.iter().enumerate() {
            v.row_mut(r).copy_from_slice(src.row(i as usize));
        }
        self.push(
            v,
            Op::GatherRows {
                a: a.0,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let v = tensor::slice_cols(self.value(a), start, width);
        self.push(v, Op::SliceCols { a: a.0, start })
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::concat_cols(self.value(a), self.value(b));
        self.push(v, Op::ConcatCols { a: a.0, b: b.0 })
    }

    pub fn causal_softmax(&mut self, a: Var) -> Var {
        let v = tensor::causal_softmax(self.value(a));
        self.push(v, Op::CausalSoftmax { a: a.0 })
    }

    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let v = tensor::layer_norm(self.value(a), self.value(gain), self.value(bias), eps);
        self.push(
            v,
            Op::LayerNorm {
                a: a.0,
                gain: gain.0,
                bias: bias.0,
                eps,
            },
        )
    }

    /// Log-probability of `target` under a masked softmax of row `row`.
    pub fn masked_log_prob(&mut self, a: Var, row: usize, target: usize, mask: &[bool]) -> Var {
        let logits = self.value(a).row(row);
        let value = masked_log_prob_value(logits, mask, target);
        self.push(
            Tensor::from_rows(&[&[value]]),
            Op::MaskedLogProb {
                a: a.0,
                row,
                target,
                mask: mask.to_vec(),
            },
        )
    }

    pub fn sum_scalars(&mut self, parts: &[Var]) -> Var {
        let s: f64 = parts.iter().map(|&p| self.scalar(p)).sum();
        self.push(
            Tensor::from_rows(&[&[s]]),
            Op::SumScalars {
                parts: parts.iter().map(|p| p.0).collect(),
            },
        )
    }

    pub fn sub_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.scalar(a) - c;
        self.push(Tensor::from_rows(&[&[v]]), Op::SubConstScalar { a: a.0 })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = fmath::exp(self.scalar(a));
        self.push(Tensor::from_rows(&[&[v]]), Op::ExpScalar { a: a.0 })
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.scalar(a) * c;
        self.push(Tensor::from_rows(&[&[v]]), Op::MulConstScalar { a: a.0, c })
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.scalar(a).clamp(lo, hi);
        self.push(Tensor::from_rows(&[&[v]]), Op::ClampScalar { a: a.0, lo, hi })
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let v = self.scalar(a).min(self.scalar(b));
        self.push(Tensor::from_rows(&[&[v]]), Op::MinScalar { a: a.0, b: b.0 })
    }

    /// `sum_r fisher_r (a_r - anchor_r)^2`, a scalar.
    pub fn quad_penalty(&mut self, a: Var, fisher: &Tensor, anchor: &Tensor) -> Var {
        let theta = self.value(a);
        debug_assert!(theta.same_shape(fisher) && theta.same_shape(anchor));
        let mut s = 0.0;
        for i in 0..theta.len() {
            let diff = theta.data[i] - anchor.data[i];
            s += fisher.data[i] * diff * diff;
        }
        self.push(
            Tensor::from_rows(&[&[s]]),
            Op::QuadPenalty {
                a: a.0,
                fisher: fisher.clone(),
                anchor: anchor.clone(),
            },
        )
    }

    /// Reverse pass from a scalar loss; returns one gradient per node
    /// (readable for leaves via [`Var`] indices).
    pub fn backward(&self, loss: Var) -> Grads {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_rows(&[&[1.0]]));
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Grads { grads }
    }

    fn accumulate(grads: &mut [Option<Tensor>], idx: usize, delta: Tensor) {
        match &mut grads[idx] {
            Some(g) => {
                for (o, &v) in g.data.iter_mut().zip(&delta.data) {
                    *o += v;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let da = tensor::matmul_nt(g, &self.nodes[*b].value);
                let db = tensor::matmul_tn(&self.nodes[*a].value, g);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::MatMulNT { a, b } => {
                // y = a bᵀ ; da = g b ; db = gᵀ a
                let da = tensor::matmul(g, &self.nodes[*b].value);
                let db = tensor::matmul_tn(g, &self.nodes[*a].value);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Add { a, b } => {
                Self::accumulate(grads, *a, g.clone());
                Self::accumulate(grads, *b, g.clone());
            }
            Op::AddRow { a, bias } => {
                Self::accumulate(grads, *a, g.clone());
                let mut db = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (o, &v) in db.data.iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                Self::accumulate(grads, *bias, db);
            }
            Op::AddConst { a } => {
                Self::accumulate(grads, *a, g.clone());
            }
            Op::Scale { a, c } => {
                Self::accumulate(grads, *a, tensor::scale(g, *c));
            }
            Op::Relu { a } => {
                let input = &self.nodes[*a].value;
                let mut da = g.clone();
                for (o, &x) in da.data.iter_mut().zip(&input.data) {
                    if x <= 0.0 {
                        *o = 0.0;
                    }
                }
                Self::accumulate(grads, *a, da);
            }
            Op::GatherRows { a, indices } => {
                let src = &self.nodes[*a].value;
                let mut da = Tensor::zeros(src.rows, src.cols);
                for (r, &idx) in indices.iter().enumerate() {
                    for (o, &v) in da.row_mut(idx as usize).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                Self::accumulate(grads, *a, da);
            }
            Op::SliceCols { a, start } => {
                let src = &self.nodes[*a].value;
                let mut da = Tensor::zeros(src.rows, src.cols);
                for r in 0..g.rows {
                    for c in 0..g.cols {
                        da.set(r, start + c, g.get(r, c));
                    }
                }
                Self::accumulate(grads, *a, da);
            }
            Op::ConcatCols { a, b } => {
                let wa = self.nodes[*a].value.cols;
                let wb = self.nodes[*b].value.cols;
                let da = tensor::slice_cols(g, 0, wa);
                let db = tensor::slice_cols(g, wa, wb);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::CausalSoftmax { a } => {
                let p = &self.nodes[i].value;
                let mut da = Tensor::zeros(p.rows, p.cols);
                for r in 0..p.rows {
                    let valid = (r + 1).min(p.cols);
                    let dot: f64 = (0..valid).map(|c| g.get(r, c) * p.get(r, c)).sum();
                    for c in 0..valid {
                        da.set(r, c, p.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                Self::accumulate(grads, *a, da);
            }
            Op::LayerNorm { a, gain, bias, eps } => {
                let x = &self.nodes[*a].value;
                let gn = &self.nodes[*gain].value;
                let n = x.cols as f64;
                let mut da = Tensor::zeros(x.rows, x.cols);
                let mut dgain = Tensor::zeros(1, x.cols);
                let mut dbias = Tensor::zeros(1, x.cols);
                for r in 0..x.rows {
                    let row = x.row(r);
                    let mean = row.iter().sum::<f64>() / n;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv = 1.0 / fmath::sqrt(var + eps);
                    let xhat: Vec<f64> = row.iter().map(|&v| (v - mean) * inv).collect();
                    let grow = g.row(r);
                    let dxhat: Vec<f64> =
                        (0..x.cols).map(|c| grow[c] * gn.data[c]).collect();
                    let mean_dxhat = dxhat.iter().sum::<f64>() / n;
                    let mean_dxhat_xhat =
                        dxhat.iter().zip(&xhat).map(|(d, h)| d * h).sum::<f64>() / n;
                    for c in 0..x.cols {
                        dgain.data[c] += grow[c] * xhat[c];
                        dbias.data[c] += grow[c];
                        da.set(
                            r,
                            c,
                            inv * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat),
                        );
                    }
                }
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *gain, dgain);
                Self::accumulate(grads, *bias, dbias);
            }
            Op::MaskedLogProb {
                a,
                row,
                target,
                mask,
            } => {
                let logits = &self.nodes[*a].value;
                let probs = masked_probs_slice(logits.row(*row), mask);
                let mut da = Tensor::zeros(logits.rows, logits.cols);
                let scale = g.data[0];
                for c in 0..logits.cols {
                    if mask[c] {
                        let indicator = if c == *target { 1.0 } else { 0.0 };
                        da.set(*row, c, scale * (indicator - probs[c]));
                    }
                }
                Self::accumulate(grads, *a, da);
            }
            Op::SumScalars { parts } => {
                for &p in parts {
                    Self::accumulate(grads, p, g.clone());
                }
            }
            Op::SubConstScalar { a } => {
                Self::accumulate(grads, *a, g.clone());
            }
            Op::ExpScalar { a } => {
                let y = self.nodes[i].value.data[0];
                Self::accumulate(grads, *a, tensor::scale(g, y));
            }
            Op::MulConstScalar { a, c } => {
                Self::accumulate(grads, *a, tensor::scale(g, *c));
            }
            Op::ClampScalar { a, lo, hi } => {
                let x = self.nodes[*a].value.data[0];
                let pass = if x > *lo && x < *hi { 1.0 } else { 0.0 };
                Self::accumulate(grads, *a, tensor::scale(g, pass));
            }
            Op::MinScalar { a, b } => {
                let xa = self.nodes[*a].value.data[0];
                let xb = self.nodes[*b].value.data[0];
                if xa <= xb {
                    Self::accumulate(grads, *a, g.clone());
                } else {
                    Self::accumulate(grads, *b, g.clone());
                }
            }
            Op::QuadPenalty { a, fisher, anchor } => {
                let theta = &self.nodes[*a].value;
                let mut da = Tensor::zeros(theta.rows, theta.cols);
                let scale = g.data[0];
                for j in 0..theta.len() {
                    da.data[j] = scale * 2.0 * fisher.data[j] * (theta.data[j] - anchor.data[j]);
                }
                Self::accumulate(grads, *a, da);
            }
        }
    }
}

/// Gradients per tape node after a backward pass.
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    /// Gradient of the loss w.r.t. the node, zeros if unused.
    pub fn get(&self, v: Var, shape_like: &Tensor) -> Tensor {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(shape_like.rows, shape_like.cols))
    }
}

/// Probabilities under an additively masked softmax; forbidden entries are
/// exactly zero.
pub fn masked_probs_slice(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for (i, &l) in logits.iter().enumerate() {
        if mask[i] && l > max {
            max = l;
        }
    }
    let mut sum = 0.0;
    let mut probs = alloc::vec![0.0; logits.len()];
    for (i, &l) in logits.iter().enumerate() {
        if mask[i] {
            let e = fmath::exp(l - max);
            probs[i] = e;
            sum += e;
        }
    }
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// `log p(target)` under the masked softmax, computed in log space.
pub fn masked_log_prob_value(logits: &[f64], mask: &[bool], target: usize) -> f64 {
    debug_assert!(mask[target]);
    let mut max = f64::NEG_INFINITY;
    for (i, &l) in logits.iter().enumerate() {
        if mask[i] && l > max {
            max = l;
        }
    }
    let mut sum = 0.0;
    for (i, &l) in logits.iter().enumerate() {
        if mask[i] {
            sum += fmath::exp(l - max);
        }
    }
    logits[target] - (max + fmath::ln(sum))
}
