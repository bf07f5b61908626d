//! Tape-based reverse-mode differentiation over 2D tensors.
//!
//! Every operation appends a node holding its value and whatever it needs for
//! the backward pass. `backward` walks the tape once in reverse, so the cost
//! of a gradient is a small constant multiple of the forward pass.

use super::tensor::{gemm, Tensor};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul { a: Var, b: Var, b_trans: bool },
    Add(Var, Var),
    AddRow { x: Var, row: Var },
    Scale(Var, f64),
    Relu(Var),
    Mask { x: Var, mask: Vec<f64> },
    Softmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    ConcatCols(Vec<Var>),
    Gather { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<f64>, scale: f64 },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

/// Four-way split accumulation; lets the compiler vectorise the reduction.
fn sum(v: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = v.chunks_exact(4);
    let rest: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for (a, x) in acc.iter_mut().zip(c) {
            *a += x;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let rest: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

/// `exp(x)` for `x <= 0`, branch-free so softmax rows vectorise. Round-to-
/// nearest range reduction `x = n ln2 + r`, `|r| <= ln2 / 2`, then a degree-12
/// Taylor polynomial (truncation below 2e-16 relative).
#[inline(always)]
pub(crate) fn exp_nonpositive(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.max(-700.0);
    let t = x * std::f64::consts::LOG2_E + SHIFT;
    let n = t - SHIFT;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    for c in [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let k = t.to_bits().wrapping_sub(SHIFT.to_bits()) as i64;
    p * f64::from_bits(((k + 1023) as u64) << 52)
}

#[inline(always)]
fn softmax_row_body(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (o, &v) in out.iter_mut().zip(row) {
        *o = exp_nonpositive(v - max);
    }
    let inv = 1.0 / sum(out);
    out.iter_mut().for_each(|o| *o *= inv);
}

// Same arithmetic, wider registers. No FMA, so results are bit-identical to
// the baseline path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn softmax_row_avx2(row: &[f64], out: &mut [f64]) {
    softmax_row_body(row, out)
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the running CPU supports AVX2.
        return unsafe { softmax_row_avx2(row, out) };
    }
    softmax_row_body(row, out)
}

impl Graph {
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

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; receives a gradient.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf; no gradient is tracked through it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// `a * b` or `a * b^T`.
    pub fn matmul(&mut self, a: Var, b: Var, b_trans: bool) -> Result<Var> {
        let (m, k) = dims(self.value(a));
        let (br, bc) = dims(self.value(b));
        let (kb, n) = if b_trans { (bc, br) } else { (br, bc) };
        if k != kb {
            return invalid(format!("matmul inner dims {k} vs {kb}"));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.value(a).data, false, &self.value(b).data, b_trans, 0.0, &mut out);
        let value = Tensor { shape: vec![m, n], data: out };
        Ok(self.push(value, Op::MatMul { a, b, b_trans }, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape != self.value(b).shape {
            return invalid(format!(
                "add shapes {:?} vs {:?}",
                self.value(a).shape,
                self.value(b).shape
            ));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x + y).collect();
        let value = Tensor { shape: self.value(a).shape.clone(), data };
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds a `1 x n` row to every row of an `m x n` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (m, n) = dims(self.value(x));
        if self.value(row).len() != n {
            return invalid(format!("row of length {} for {n} columns", self.value(row).len()));
        }
        let r = &self.value(row).data;
        let mut data = self.value(x).data.clone();
        for i in 0..m {
            for (d, b) in data[i * n..(i + 1) * n].iter_mut().zip(r) {
                *d += b;
            }
        }
        let value = Tensor { shape: vec![m, n], data };
        Ok(self.push(value, Op::AddRow { x, row }, &[x, row]))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let t = self.value(x);
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().map(|v| v * s).collect() };
        self.push(value, Op::Scale(x, s), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().map(|v| v.max(0.0)).collect() };
        self.push(value, Op::Relu(x), &[x])
    }

    /// Element-wise multiply by a fixed mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        let t = self.value(x);
        if mask.len() != t.len() {
            return invalid("mask length mismatch");
        }
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().zip(&mask).map(|(a, b)| a * b).collect() };
        Ok(self.push(value, Op::Mask { x, mask }, &[x]))
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` for `j > i` is excluded
    /// (treated as -inf before normalisation) and gets exactly zero weight.
    pub fn softmax_rows(&mut self, x: Var, causal: bool) -> Var {
        let (m, n) = dims(self.value(x));
        let src = &self.value(x).data;
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let allowed = if causal { (i + 1).min(n) } else { n };
            softmax_row(&src[i * n..i * n + allowed], &mut data[i * n..i * n + allowed]);
        }
        let value = Tensor { shape: vec![m, n], data };
        self.push(value, Op::Softmax(x), &[x])
    }

    /// Per-row layer normalisation followed by an element-wise gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (m, n) = dims(self.value(x));
        if self.value(gain).len() != n || self.value(bias).len() != n {
            return invalid("layer norm gain/bias length mismatch");
        }
        let src = &self.value(x).data;
        let g = &self.value(gain).data;
        let b = &self.value(bias).data;
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[i] = s;
            for j in 0..n {
                let h = (row[j] - mean) * s;
                xhat[i * n + j] = h;
                data[i * n + j] = g[j] * h + b[j];
            }
        }
        let value = Tensor { shape: vec![m, n], data };
        Ok(self.push(value, Op::LayerNorm { x, gain, bias, xhat, inv_std }, &[x, gain, bias]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return invalid("nothing to concatenate");
        };
        let m = self.value(first).rows();
        if parts.iter().any(|p| self.value(*p).rows() != m) {
            return invalid("concat row counts differ");
        }
        let widths: Vec<usize> = parts.iter().map(|p| self.value(*p).cols()).collect();
        let n: usize = widths.iter().sum();
        let mut data = vec![0.0; m * n];
        let mut off = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            let src = &self.value(*p).data;
            for i in 0..m {
                data[i * n + off..i * n + off + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            off += w;
        }
        let value = Tensor { shape: vec![m, n], data };
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), parts))
    }


    /// Row lookup: `out[i, :] = table[ids[i], :]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, n) = dims(self.value(table));
        if let Some(bad) = ids.iter().find(|&&i| i >= v) {
            return invalid(format!("token id {bad} outside table of {v} rows"));
        }
        let src = &self.value(table).data;
        let mut data = Vec::with_capacity(ids.len() * n);
        for &i in ids {
            data.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        let value = Tensor { shape: vec![ids.len(), n], data };
        Ok(self.push(value, Op::Gather { table, ids: ids.to_vec() }, &[table]))
    }

    /// `scale * sum_t -log softmax(logits[t])[target[t]]`, skipping `None` targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>], scale: f64) -> Result<Var> {
        let (m, n) = dims(self.value(logits));
        if targets.len() != m {
            return invalid(format!("{} targets for {m} logit rows", targets.len()));
        }
        let src = &self.value(logits).data;
        let mut probs = vec![0.0; m * n];
        let mut total = 0.0;
        for (i, target) in targets.iter().enumerate() {
            let row = &src[i * n..(i + 1) * n];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = max + sum.ln();
            for j in 0..n {
                probs[i * n + j] = (row[j] - log_z).exp();
            }
            if let Some(t) = *target {
                if t >= n {
                    return invalid(format!("target {t} outside vocabulary of {n}"));
                }
                total += log_z - row[t];
            }
        }
        let value = Tensor { shape: vec![1, 1], data: vec![scale * total] };
        Ok(self.push(
            value,
            Op::CrossEntropy { logits, targets: targets.to_vec(), probs, scale },
            &[logits],
        ))
    }

    /// Gradients of the scalar `root` with respect to every leaf; `None` for
    /// constants and interior nodes.
    pub fn backward(&self, root: Var) -> Vec<Option<Vec<f64>>> {
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[root.0].needs_grad {
            return grads;
        }
        grads[root.0] = Some(vec![1.0; self.nodes[root.0].value.len()]);
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop(node, &g, &mut grads);
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }
        grads
    }

    fn backprop(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if nodes[v.0].needs_grad {
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
                f(slot);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, b_trans } => {
                let (m, k) = dims(&nodes[a.0].value);
                let n = node.value.cols();
                let av = &nodes[a.0].value.data;
                let bv = &nodes[b.0].value.data;
                // dA = dC * op(B)^T
                acc(*a, &mut |da| gemm(m, n, k, g, false, bv, !*b_trans, 1.0, da));
                if *b_trans {
                    // B is n x k: dB = dC^T * A
                    acc(*b, &mut |db| gemm(n, m, k, g, true, av, false, 1.0, db));
                } else {
                    // B is k x n: dB = A^T * dC
                    acc(*b, &mut |db| gemm(k, m, n, av, true, g, false, 1.0, db));
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::AddRow { x, row } => {
                let n = node.value.cols();
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*row, &mut |d| {
                    for chunk in g.chunks(n) {
                        d.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Scale(x, s) => {
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += s * y));
            }
            Op::Relu(x) => {
                let xv = &nodes[x.0].value.data;
                acc(*x, &mut |d| {
                    for ((dx, gy), xin) in d.iter_mut().zip(g).zip(xv) {
                        if *xin > 0.0 {
                            *dx += gy;
                        }
                    }
                });
            }
            Op::Mask { x, mask } => {
                acc(*x, &mut |d| {
                    for ((dx, gy), mk) in d.iter_mut().zip(g).zip(mask) {
                        *dx += gy * mk;
                    }
                });
            }
            Op::Softmax(x) => {
                let (m, n) = dims(&node.value);
                let y = &node.value.data;
                acc(*x, &mut |d| {
                    for i in 0..m {
                        let yr = &y[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let dot = dot(yr, gr);
                        for ((dj, yj), gj) in d[i * n..(i + 1) * n].iter_mut().zip(yr).zip(gr) {
                            *dj += yj * (gj - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let (m, n) = dims(&node.value);
                let gv = &nodes[gain.0].value.data;
                acc(*x, &mut |d| {
                    for i in 0..m {
                        let h = &xhat[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let dh: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let mean_dh = dh.iter().sum::<f64>() / n as f64;
                        let mean_dh_h = dh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for j in 0..n {
                            d[i * n + j] += inv_std[i] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                        }
                    }
                });
                acc(*gain, &mut |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                });
                acc(*bias, &mut |d| {
                    for chunk in g.chunks(n) {
                        d.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (m, n) = dims(&node.value);
                let mut off = 0;
                for p in parts {
                    let w = nodes[p.0].value.cols();
                    acc(*p, &mut |d| {
                        for i in 0..m {
                            for j in 0..w {
                                d[i * w + j] += g[i * n + off + j];
                            }
                        }
                    });
                    off += w;
                }
            }
            Op::Gather { table, ids } => {
                let n = node.value.cols();
                acc(*table, &mut |d| {
                    for (row, &id) in ids.iter().enumerate() {
                        for j in 0..n {
                            d[id * n + j] += g[row * n + j];
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, targets, probs, scale } => {
                let n = nodes[logits.0].value.cols();
                let up = g[0] * scale;
                acc(*logits, &mut |d| {
                    for (i, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        for j in 0..n {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            d[i * n + j] += up * (probs[i * n + j] - onehot);
                        }
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_exp_matches_libm() {
        let mut worst: f64 = 0.0;
        for i in 0..=200_000 {
            let x = -(i as f64) * 700.0 / 200_000.0;
            let want = x.exp();
            worst = worst.max((exp_nonpositive(x) - want).abs() / want);
        }
        for x in [0.0, -1e-300, -1e-12, -0.346, -0.347] {
            worst = worst.max((exp_nonpositive(x) - x.exp()).abs() / x.exp());
        }
        assert!(worst < 1e-15, "{worst:e}");
    }
    use rand::{Rng, SeedableRng};

    #[cfg(target_arch = "x86_64")]
    #[test]
    fn wide_softmax_path_is_bit_identical() {
        if !std::arch::is_x86_feature_detected!("avx2") {
            return;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [1, 3, 7, 64, 625] {
            let row: Vec<f64> = (0..n).map(|_| rng.random_range(-40.0..40.0)).collect();
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            softmax_row_body(&row, &mut a);
            // SAFETY: feature checked above.
            unsafe { softmax_row_avx2(&row, &mut b) };
            assert_eq!(a, b);
        }
    }

    fn rand_tensor(rng: &mut impl Rng, r: usize, c: usize) -> Tensor {
        Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Checks every op's backward pass against central differences on a
    /// composite scalar function.
    #[test]
    fn ops_match_finite_differences() {
        let mut rng = crate::seed::seeded_rng(5);
        let inputs = vec![
            rand_tensor(&mut rng, 3, 4),
            rand_tensor(&mut rng, 4, 4),
            rand_tensor(&mut rng, 1, 4),
            rand_tensor(&mut rng, 5, 4),
            rand_tensor(&mut rng, 3, 2),
        ];
        let f = |ts: &[Tensor]| -> (f64, Vec<Option<Vec<f64>>>) {
            let mut g = Graph::new();
            let v: Vec<Var> = ts.iter().map(|t| g.param(t.clone())).collect();
            let h = g.matmul(v[0], v[1], false).unwrap();
            let h = g.add_row(h, v[2]).unwrap();
            let s = g.matmul(h, v[3], true).unwrap();
            let s = g.scale(s, 0.7);
            let a = g.softmax_rows(s, true);
            let o = g.matmul(a, v[3], false).unwrap();
            let gain = g.param(Tensor::filled(&[4], 1.3));
            let bias = g.param(Tensor::filled(&[4], 0.1));
            let o = g.layer_norm(o, gain, bias).unwrap();
            let o = g.relu(o);
            let o = g.add(o, v[0]).unwrap();
            let c = g.concat_cols(&[o, v[4]]).unwrap();
            let gath = g.gather(v[1], &[2, 0, 2]).unwrap();
            let gath = g.concat_cols(&[gath, v[4]]).unwrap();
            let c = g.add(c, gath).unwrap();
            let c = g.mask(c, (0..18).map(|i| if i % 5 == 0 { 0.0 } else { 1.2 }).collect()).unwrap();
            let loss = g.cross_entropy(c, &[Some(1), None, Some(5)], 0.9).unwrap();
            let grads = g.backward(loss);
            (g.value(loss).data[0], grads[..ts.len()].to_vec())
        };
        let (_, grads) = f(&inputs);
        let eps = 1e-6;
        for (ti, t) in inputs.iter().enumerate() {
            for j in 0..t.len() {
                let mut plus = inputs.clone();
                plus[ti].data[j] += eps;
                let mut minus = inputs.clone();
                minus[ti].data[j] -= eps;
                let fd = (f(&plus).0 - f(&minus).0) / (2.0 * eps);
                let an = grads[ti].as_ref().map_or(0.0, |g| g[j]);
                assert!((fd - an).abs() < 1e-7, "tensor {ti} entry {j}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Tensor::filled(&[1, 2], 1.0));
        let p = g.param(Tensor::filled(&[1, 2], 2.0));
        let s = g.add(c, p).unwrap();
        let l = g.cross_entropy(s, &[Some(0)], 1.0).unwrap();
        let grads = g.backward(l);
        assert!(grads[c.0].is_none());
        assert!(grads[p.0].is_some());
    }

    #[test]
    fn causal_softmax_zeroes_upper_triangle() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::filled(&[3, 3], 0.3));
        let y = g.softmax_rows(x, true);
        let v = g.value(y);
        assert_eq!(v.data, vec![1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }
}
