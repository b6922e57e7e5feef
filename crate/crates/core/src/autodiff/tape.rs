use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        normalized: Tensor,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    MaxRows(Var, Vec<usize>),
    SumRows(Var),
    Sum(Var),
    GatherRows(Var, Vec<usize>),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Abs(_) => "abs",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::LayerNorm { .. } => "layer_norm",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::MaxRows(..) => "max_rows",
            Op::SumRows(_) => "sum_rows",
            Op::Sum(_) => "sum",
            Op::GatherRows(..) => "gather_rows",
            Op::CrossEntropy { .. } => "cross_entropy",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of one forward pass.
///
/// Nodes are pushed in evaluation order, so parents always precede children.
/// Parameters are copied in from a [`ParamStore`]; the tape never mutates them.
/// `backward` only reads the tape, so calling it twice yields identical gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
}

/// Gradients for every node of a tape with respect to one scalar loss.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros if `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        let shape = &self.shapes[v.0];
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape"),
            None => Tensor::new(shape, vec![0.0; shape.iter().product()]).expect("gradient shape"),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives no parameter gradient (inputs, masks).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf for a named parameter. Repeated requests return the same node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?
            .clone();
        let v = self.push(value, Op::Param(name.to_string()));
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).mul(self.value(b))?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `a + bias` with `bias` of shape `[1, cols]` added to every row.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let out = self.value(a).add_row(self.value(bias))?;
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).relu();
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).sigmoid();
        self.push(out, Op::Sigmoid(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).abs();
        self.push(out, Op::Abs(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).softmax_rows()?;
        Ok(self.push(out, Op::SoftmaxRows(a)))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (gv, bv) = (self.value(gain), self.value(bias));
        let c = xv.cols();
        for p in [gv, bv] {
            if p.rows() != 1 || p.cols() != c {
                return Err(Error::dim("layer_norm", xv.shape(), p.shape()));
            }
        }
        let (normalized, inv_std) = xv.normalize_rows(eps);
        let mut scaled = normalized.clone();
        for row in scaled.data_mut().chunks_mut(c) {
            for (v, w) in row.iter_mut().zip(gv.data()) {
                *v *= w;
            }
        }
        let scaled = self.push(
            scaled,
            Op::LayerNorm {
                x,
                gain,
                normalized,
                inv_std,
            },
        );
        self.add_row(scaled, bias)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_cols(&values)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_rows(&values)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let out = self.value(a).slice_rows(start, len)?;
        Ok(self.push(out, Op::SliceRows(a, start)))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let out = self.value(a).slice_cols(start, len)?;
        Ok(self.push(out, Op::SliceCols(a, start)))
    }

    /// Column-wise max over rows, `[1, cols]`.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let (out, arg) = self.value(a).max_rows();
        self.push(out, Op::MaxRows(a, arg))
    }

    /// Column sums, `[1, cols]`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).sum_rows();
        self.push(out, Op::SumRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let out = self.value(table).gather_rows(ids)?;
        Ok(self.push(out, Op::GatherRows(table, ids.to_vec())))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != targets.len() {
            return Err(Error::dim("cross_entropy", lv.shape(), &[targets.len()]));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= lv.cols()) {
            return Err(Error::Config(format!(
                "target class {t} out of range for {} logits",
                lv.cols()
            )));
        }
        let probs = lv.softmax_rows()?;
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
        }
        let out = Tensor::scalar(loss / targets.len() as f64);
        Ok(self.push(
            out,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// First recorded node whose value contains a NaN or infinity, as a readable label.
    pub fn first_non_finite(&self) -> Option<String> {
        self.nodes.iter().enumerate().find_map(|(i, n)| {
            if n.value.all_finite() {
                return None;
            }
            Some(match &n.op {
                Op::Param(name) => format!("parameter `{name}`"),
                op => format!("node {i} ({}, shape {:?})", op.name(), n.value.shape()),
            })
        })
    }

    /// Active branch of every non-smooth op on the tape: the sign of each `relu` and
    /// `abs` input and each `max_rows` argmax. Two passes with equal patterns lie on
    /// the same smooth piece of the loss.
    pub fn branch_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for n in &self.nodes {
            match &n.op {
                Op::Relu(a) => out.extend(self.value(*a).data().iter().map(|&x| usize::from(x > 0.0))),
                Op::Abs(a) => out.extend(self.value(*a).data().iter().map(|&x| usize::from(x >= 0.0))),
                Op::MaxRows(_, arg) => out.extend_from_slice(arg),
                _ => {}
            }
        }
        out
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::dim("backward", lv.shape(), &[1, 1]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    /// Parameter gradients by name. Parameters of `store` that never reached the loss get zeros.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<BTreeMap<String, Tensor>> {
        let grads = self.gradients(loss)?;
        let mut out = BTreeMap::new();
        for (name, value) in store.iter() {
            let g = match self.params.get(name) {
                Some(&v) => grads.wrt(v),
                None => Tensor::new(value.shape(), vec![0.0; value.numel()])?,
            };
            out.insert(name.to_string(), g);
        }
        Ok(out)
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                {
                    let ga = slot(grads, *a, m * k);
                    // dA = dC · Bᵀ
                    gemm(m, n, k, g, [n as isize, 1], bv.data(), [1, n as isize], ga, 1.0);
                }
                let gb = slot(grads, *b, k * n);
                // dB = Aᵀ · dC
                gemm(k, m, n, av.data(), [1, k as isize], g, [n as isize, 1], gb, 1.0);
            }
            Op::Transpose(a) => {
                let (r, c) = (out.rows(), out.cols());
                let ga = slot(grads, *a, r * c);
                for i in 0..r {
                    for j in 0..c {
                        ga[j * r + i] += g[i * c + j];
                    }
                }
            }
            Op::Add(a, b) => {
                axpy(slot(grads, *a, g.len()), g, 1.0);
                axpy(slot(grads, *b, g.len()), g, 1.0);
            }
            Op::Sub(a, b) => {
                axpy(slot(grads, *a, g.len()), g, 1.0);
                axpy(slot(grads, *b, g.len()), g, -1.0);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let ga = slot(grads, *a, g.len());
                for ((d, gi), bi) in ga.iter_mut().zip(g).zip(bv) {
                    *d += gi * bi;
                }
                let gb = slot(grads, *b, g.len());
                for ((d, gi), ai) in gb.iter_mut().zip(g).zip(av) {
                    *d += gi * ai;
                }
            }
            Op::AddRow(a, bias) => {
                axpy(slot(grads, *a, g.len()), g, 1.0);
                let c = out.cols();
                let gb = slot(grads, *bias, c);
                for row in g.chunks(c) {
                    axpy(gb, row, 1.0);
                }
            }
            Op::Scale(a, s) => axpy(slot(grads, *a, g.len()), g, *s),
            Op::Relu(a) => {
                let av = self.value(*a).data();
                let ga = slot(grads, *a, g.len());
                for ((d, gi), x) in ga.iter_mut().zip(g).zip(av) {
                    if *x > 0.0 {
                        *d += gi;
                    }
                }
            }
            Op::Sigmoid(a) => {
                let ga = slot(grads, *a, g.len());
                for ((d, gi), y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *d += gi * y * (1.0 - y);
                }
            }
            Op::Abs(a) => {
                let av = self.value(*a).data();
                let ga = slot(grads, *a, g.len());
                for ((d, gi), x) in ga.iter_mut().zip(g).zip(av) {
                    *d += gi * x.signum() * f64::from(*x != 0.0);
                }
            }
            Op::SoftmaxRows(a) => {
                let c = out.cols();
                let ga = slot(grads, *a, g.len());
                for ((grow, yrow), drow) in g.chunks(c).zip(out.data().chunks(c)).zip(ga.chunks_mut(c)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(gi, yi)| gi * yi).sum();
                    for ((d, gi), yi) in drow.iter_mut().zip(grow).zip(yrow) {
                        *d += yi * (gi - dot);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                normalized,
                inv_std,
            } => {
                let c = out.cols();
                let n = c as f64;
                let gain_v = self.value(*gain).data().to_vec();
                {
                    let gg = slot(grads, *gain, c);
                    for (grow, xrow) in g.chunks(c).zip(normalized.data().chunks(c)) {
                        for ((d, gi), xh) in gg.iter_mut().zip(grow).zip(xrow) {
                            *d += gi * xh;
                        }
                    }
                }
                let gx = slot(grads, *x, g.len());
                for (r, ((grow, xrow), drow)) in g
                    .chunks(c)
                    .zip(normalized.data().chunks(c))
                    .zip(gx.chunks_mut(c))
                    .enumerate()
                {
                    let dxh: Vec<f64> = grow.iter().zip(&gain_v).map(|(gi, w)| gi * w).collect();
                    let sum_dxh: f64 = dxh.iter().sum();
                    let sum_dxh_xh: f64 = dxh.iter().zip(xrow).map(|(a, b)| a * b).sum();
                    for ((d, dh), xh) in drow.iter_mut().zip(&dxh).zip(xrow) {
                        *d += inv_std[r] / n * (n * dh - sum_dxh - xh * sum_dxh_xh);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = (self.value(p).rows(), self.value(p).cols());
                    let gp = slot(grads, p, r * c);
                    for i in 0..r {
                        axpy(
                            &mut gp[i * c..(i + 1) * c],
                            &g[i * total + offset..i * total + offset + c],
                            1.0,
                        );
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).numel();
                    axpy(slot(grads, p, len), &g[offset..offset + len], 1.0);
                    offset += len;
                }
            }
            Op::SliceRows(a, start) => {
                let av = self.value(*a);
                let c = av.cols();
                let ga = slot(grads, *a, av.numel());
                axpy(&mut ga[start * c..start * c + g.len()], g, 1.0);
            }
            Op::SliceCols(a, start) => {
                let av = self.value(*a);
                let (r, c) = (av.rows(), av.cols());
                let len = out.cols();
                let ga = slot(grads, *a, r * c);
                for i in 0..r {
                    axpy(
                        &mut ga[i * c + start..i * c + start + len],
                        &g[i * len..(i + 1) * len],
                        1.0,
                    );
                }
            }
            Op::MaxRows(a, arg) => {
                let av = self.value(*a);
                let c = av.cols();
                let ga = slot(grads, *a, av.numel());
                for (j, &r) in arg.iter().enumerate() {
                    ga[r * c + j] += g[j];
                }
            }
            Op::SumRows(a) => {
                let av = self.value(*a);
                let c = av.cols();
                let ga = slot(grads, *a, av.numel());
                for row in ga.chunks_mut(c) {
                    axpy(row, g, 1.0);
                }
            }
            Op::Sum(a) => {
                let ga = slot(grads, *a, self.value(*a).numel());
                for d in ga.iter_mut() {
                    *d += g[0];
                }
            }
            Op::GatherRows(table, ids) => {
                let tv = self.value(*table);
                let c = tv.cols();
                let gt = slot(grads, *table, tv.numel());
                for (i, &id) in ids.iter().enumerate() {
                    axpy(&mut gt[id * c..(id + 1) * c], &g[i * c..(i + 1) * c], 1.0);
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let c = probs.cols();
                let scale = g[0] / targets.len() as f64;
                let gl = slot(grads, *logits, probs.numel());
                for (i, &t) in targets.iter().enumerate() {
                    for j in 0..c {
                        let p = probs.get(i, j);
                        let onehot = if j == t { 1.0 } else { 0.0 };
                        gl[i * c + j] += scale * (p - onehot);
                    }
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn axpy(dst: &mut [f64], src: &[f64], a: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}
