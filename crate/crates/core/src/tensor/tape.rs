use std::collections::HashMap;
use std::sync::Arc;

use super::gemm::gemm;
use super::{Gradients, ParamStore, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Reduction applied by [`Tape::segment_reduce`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
}

enum Op {
    Leaf,
    Param,
    Matmul(Var, Var),
    Bmm(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>, usize),
    Slice { x: Var, axis: usize, start: usize },
    Reshape(Var),
    Relu(Var),
    SumLast(Var),
    NormLast(Var),
    SegmentSoftmax { x: Var, seg: Arc<[usize]>, num: usize },
    SegmentReduce { x: Var, seg: Arc<[usize]>, mode: Reduce, counts: Vec<usize>, argmax: Vec<usize> },
    GatherRows(Var, Arc<[usize]>),
    Sum(Var),
    Mean(Var),
    Mse(Var, Tensor),
    Mae(Var, Tensor),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations in execution order and replays their pullbacks in reverse.
///
/// Every op checks operand shapes; there is no implicit broadcasting.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

fn prod(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Row indices of every segment, ascending.
fn members(seg: &[usize], num: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); num];
    for (e, &g) in seg.iter().enumerate() {
        out[g].push(e);
    }
    out
}

/// Sum that does not depend on the order of `vals` (sorted before adding).
fn ordered_sum(vals: &mut [f64]) -> f64 {
    vals.sort_unstable_by(f64::total_cmp);
    vals.iter().sum()
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value recorded on tape (node {})", self.nodes.len());
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Registers parameter `name` from `store`; repeated calls return the same handle.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        let value = store.get(name)?.clone();
        let v = self.push(value, Op::Param, true);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, &mut out, 0.0);
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::Matmul(a, b), needs))
    }

    /// Batched product `[B,m,k] x [B,k,n] -> [B,m,n]`.
    ///
    /// A 2-D left operand `[m,k]` is shared by every batch entry.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ok = sb.len() == 3
            && match sa.len() {
                2 => sa[1] == sb[1],
                3 => sa[0] == sb[0] && sa[2] == sb[1],
                _ => false,
            };
        if !ok {
            return Err(shape_err("bmm", sa, sb));
        }
        let shared = sa.len() == 2;
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (batch, n) = (sb[0], sb[2]);
        let mut out = vec![0.0; batch * m * n];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            let ao = if shared { 0 } else { i * m * k };
            gemm(m, k, n, &av[ao..ao + m * k], false, &bv[i * k * n..(i + 1) * k * n], false, &mut out[i * m * n..(i + 1) * m * n], 0.0);
        }
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(vec![batch, m, n], out)?, Op::Bmm(a, b), needs))
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * s).collect()).expect("same shape");
        let needs = self.needs(&[a]);
        self.push(value, Op::Scale(a, s), needs)
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| shape_err("concat", &[], &[]))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(shape_err("concat", &base, &[axis]));
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for p in parts {
            let s = self.shape(*p);
            if s.len() != base.len() || s.iter().enumerate().any(|(d, &n)| d != axis && n != base[d]) {
                return Err(shape_err("concat", &base, s));
            }
            out_shape[axis] += s[axis];
        }
        let outer = prod(&base[..axis]);
        let mut out = Vec::with_capacity(prod(&out_shape));
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let inner = prod(&t.shape()[axis..]);
                out.extend_from_slice(&t.data()[o * inner..(o + 1) * inner]);
            }
        }
        let needs = self.needs(parts);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Concat(parts.to_vec(), axis), needs))
    }

    /// Keeps indices `start..end` of `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || start > end || end > s[axis] {
            return Err(shape_err("slice", &s, &[axis, start, end]));
        }
        let (outer, inner, dim) = (prod(&s[..axis]), prod(&s[axis + 1..]), s[axis]);
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            out.extend_from_slice(&data[(o * dim + start) * inner..(o * dim + end) * inner]);
        }
        let mut out_shape = s;
        out_shape[axis] = end - start;
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Slice { x, axis, start }, needs))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        let needs = self.needs(&[x]);
        Ok(self.push(value, Op::Reshape(x), needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v.max(0.0)).collect()).expect("same shape");
        let needs = self.needs(&[x]);
        self.push(value, Op::Relu(x), needs)
    }

    fn last_axis_split(&self, x: Var) -> (Vec<usize>, usize) {
        let s = self.shape(x);
        let n = *s.last().expect("tensors have rank >= 1");
        let head = if s.len() == 1 { vec![1] } else { s[..s.len() - 1].to_vec() };
        (head, n)
    }

    /// Sums the last axis away (`[..., n] -> [...]`; rank-1 input gives `[1]`).
    pub fn sum_last(&mut self, x: Var) -> Var {
        let (head, n) = self.last_axis_split(x);
        let data = self.value(x).data();
        let out = (0..prod(&head)).map(|r| data[r * n..(r + 1) * n].iter().sum()).collect();
        let needs = self.needs(&[x]);
        self.push(Tensor::new(head, out).expect("consistent"), Op::SumLast(x), needs)
    }

    /// `sqrt(sum x^2 + eps^2)` over the last axis; smooth everywhere for `eps > 0`.
    pub fn norm_last(&mut self, x: Var, eps: f64) -> Var {
        let (head, n) = self.last_axis_split(x);
        let data = self.value(x).data();
        let out = (0..prod(&head))
            .map(|r| (data[r * n..(r + 1) * n].iter().map(|v| v * v).sum::<f64>() + eps * eps).sqrt())
            .collect();
        let needs = self.needs(&[x]);
        self.push(Tensor::new(head, out).expect("consistent"), Op::NormLast(x), needs)
    }

    fn check_segments(&self, op: &'static str, x: Var, seg: &[usize], num: usize) -> Result<()> {
        let s = self.shape(x);
        if s[0] != seg.len() {
            return Err(shape_err(op, s, &[seg.len()]));
        }
        if let Some(bad) = seg.iter().find(|&&g| g >= num) {
            return Err(Error::InvalidIndex(format!("{op}: segment id {bad} >= {num}")));
        }
        Ok(())
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    ///
    /// `x` is `[E]` or `[E, H]`; the per-segment maximum is subtracted first.
    /// Like [`segment_reduce`](Self::segment_reduce), the result is bitwise
    /// independent of the order of rows within a segment.
    pub fn segment_softmax(&mut self, x: Var, seg: Arc<[usize]>, num: usize) -> Result<Var> {
        self.check_segments("segment_softmax", x, &seg, num)?;
        let s = self.shape(x).to_vec();
        if s.len() > 2 {
            return Err(shape_err("segment_softmax", &s, &[]));
        }
        let h = if s.len() == 2 { s[1] } else { 1 };
        let data = self.value(x).data();
        let mut max = vec![f64::NEG_INFINITY; num * h];
        for (e, &g) in seg.iter().enumerate() {
            for c in 0..h {
                max[g * h + c] = max[g * h + c].max(data[e * h + c]);
            }
        }
        let mut out: Vec<f64> = data.to_vec();
        for (e, &g) in seg.iter().enumerate() {
            for c in 0..h {
                out[e * h + c] = (out[e * h + c] - max[g * h + c]).exp();
            }
        }
        let mut denom = vec![0.0; num * h];
        let mut buf = Vec::new();
        for (g, rows) in members(&seg, num).iter().enumerate() {
            for c in 0..h {
                buf.clear();
                buf.extend(rows.iter().map(|&e| out[e * h + c]));
                denom[g * h + c] = ordered_sum(&mut buf);
            }
        }
        for (e, &g) in seg.iter().enumerate() {
            for c in 0..h {
                out[e * h + c] /= denom[g * h + c];
            }
        }
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::new(s, out)?, Op::SegmentSoftmax { x, seg, num }, needs))
    }

    /// Reduces the rows of `x` into `num` segments. Empty segments produce zeros;
    /// `Max` routes gradient to the first maximal row.
    ///
    /// Sums add each segment's values in sorted order, so permuting rows
    /// within a segment leaves the result bitwise unchanged.
    pub fn segment_reduce(&mut self, x: Var, seg: Arc<[usize]>, num: usize, mode: Reduce) -> Result<Var> {
        self.check_segments("segment_reduce", x, &seg, num)?;
        let t = self.value(x);
        let w = t.row_len();
        let data = t.data();
        let mut out = vec![0.0; num * w];
        let mut counts = vec![0usize; num];
        let mut argmax = Vec::new();
        for &g in seg.iter() {
            counts[g] += 1;
        }
        match mode {
            Reduce::Sum | Reduce::Mean => {
                let mut buf = Vec::new();
                for (g, rows) in members(&seg, num).iter().enumerate() {
                    for c in 0..w {
                        buf.clear();
                        buf.extend(rows.iter().map(|&e| data[e * w + c]));
                        out[g * w + c] = ordered_sum(&mut buf);
                    }
                }
                if mode == Reduce::Mean {
                    for g in 0..num {
                        if counts[g] > 0 {
                            let inv = 1.0 / counts[g] as f64;
                            out[g * w..(g + 1) * w].iter_mut().for_each(|v| *v *= inv);
                        }
                    }
                }
            }
            Reduce::Max => {
                argmax = vec![usize::MAX; num * w];
                for (e, &g) in seg.iter().enumerate() {
                    for c in 0..w {
                        let slot = g * w + c;
                        if argmax[slot] == usize::MAX || data[e * w + c] > out[slot] {
                            argmax[slot] = e;
                            out[slot] = data[e * w + c];
                        }
                    }
                }
            }
        }
        let mut shape = t.shape().to_vec();
        shape[0] = num;
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::new(shape, out)?, Op::SegmentReduce { x, seg, mode, counts, argmax }, needs))
    }

    /// Selects rows `idx` of `x` (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var> {
        let t = self.value(x);
        let (rows, w) = (t.rows(), t.row_len());
        if let Some(bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::InvalidIndex(format!("gather_rows: row {bad} >= {rows}")));
        }
        let mut out = Vec::with_capacity(idx.len() * w);
        for &i in idx.iter() {
            out.extend_from_slice(&t.data()[i * w..(i + 1) * w]);
        }
        let mut shape = t.shape().to_vec();
        shape[0] = idx.len();
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::new(shape, out)?, Op::GatherRows(x, idx), needs))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = self.value(x).data().iter().sum();
        let needs = self.needs(&[x]);
        self.push(Tensor::scalar(v), Op::Sum(x), needs)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let v = t.data().iter().sum::<f64>() / t.len().max(1) as f64;
        let needs = self.needs(&[x]);
        self.push(Tensor::scalar(v), Op::Mean(x), needs)
    }

    fn check_target(&self, op: &'static str, pred: Var, target: &Tensor) -> Result<()> {
        if self.shape(pred) != target.shape() {
            return Err(shape_err(op, self.shape(pred), target.shape()));
        }
        Ok(())
    }

    /// Mean squared error against a constant target.
    pub fn mse_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        self.check_target("mse_loss", pred, target)?;
        let p = self.value(pred);
        let v = p.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len().max(1) as f64;
        let needs = self.needs(&[pred]);
        Ok(self.push(Tensor::scalar(v), Op::Mse(pred, target.clone()), needs))
    }

    /// Mean absolute error against a constant target.
    pub fn mae_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        self.check_target("mae_loss", pred, target)?;
        let p = self.value(pred);
        let v = p.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len().max(1) as f64;
        let needs = self.needs(&[pred]);
        Ok(self.push(Tensor::scalar(v), Op::Mae(pred, target.clone()), needs))
    }

    /// Gradient of the scalar `loss` with respect to every parameter registered on this tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward", self.shape(loss), &[1]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if let Op::Param = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.pullback(node, &g, &mut grads);
        }
        let mut out = Gradients::new();
        for (name, v) in &self.params {
            let shape = self.shape(*v).to_vec();
            let g = grads[v.0].take().unwrap_or_else(|| vec![0.0; prod(&shape)]);
            out.insert(name.clone(), Tensor::new(shape, g)?);
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, delta: Vec<f64>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
            slot => *slot = Some(delta),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn pullback(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        let shp = |v: Var| self.nodes[v.0].value.shape();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::Matmul(a, b) => {
                let (m, k, n) = (shp(*a)[0], shp(*a)[1], shp(*b)[1]);
                if self.wants(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g, false, val(*b), true, &mut ga, 0.0);
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, val(*a), true, g, false, &mut gb, 0.0);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Bmm(a, b) => {
                let sa = shp(*a);
                let shared = sa.len() == 2;
                let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let (batch, n) = (shp(*b)[0], shp(*b)[2]);
                let (av, bv) = (val(*a), val(*b));
                if self.wants(*a) {
                    let mut ga = vec![0.0; av.len()];
                    for i in 0..batch {
                        let ao = if shared { 0 } else { i * m * k };
                        let beta = if shared { 1.0 } else { 0.0 };
                        gemm(m, n, k, &g[i * m * n..(i + 1) * m * n], false, &bv[i * k * n..(i + 1) * k * n], true, &mut ga[ao..ao + m * k], beta);
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let mut gb = vec![0.0; bv.len()];
                    for i in 0..batch {
                        let ao = if shared { 0 } else { i * m * k };
                        gemm(k, m, n, &av[ao..ao + m * k], true, &g[i * m * n..(i + 1) * m * n], false, &mut gb[i * k * n..(i + 1) * k * n], 0.0);
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, g.iter().zip(val(*b)).map(|(g, y)| g * y).collect());
                }
                if self.wants(*b) {
                    self.accumulate(grads, *b, g.iter().zip(val(*a)).map(|(g, x)| g * x).collect());
                }
            }
            Op::Div(a, b) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, g.iter().zip(val(*b)).map(|(g, y)| g / y).collect());
                }
                if self.wants(*b) {
                    let gb = g.iter().zip(val(*a)).zip(val(*b)).map(|((g, x), y)| -g * x / (y * y)).collect();
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.iter().map(|v| v * s).collect()),
            Op::Concat(parts, axis) => {
                let outer = prod(&shp(parts[0])[..*axis]);
                let mut parts_g: Vec<Vec<f64>> = parts.iter().map(|p| Vec::with_capacity(val(*p).len())).collect();
                let mut off = 0;
                for _ in 0..outer {
                    for (p, pg) in parts.iter().zip(parts_g.iter_mut()) {
                        let inner = prod(&shp(*p)[*axis..]);
                        pg.extend_from_slice(&g[off..off + inner]);
                        off += inner;
                    }
                }
                for (p, pg) in parts.iter().zip(parts_g) {
                    self.accumulate(grads, *p, pg);
                }
            }
            Op::Slice { x, axis, start } => {
                let s = shp(*x);
                let (outer, inner, dim) = (prod(&s[..*axis]), prod(&s[axis + 1..]), s[*axis]);
                let width = node.value.shape()[*axis] * inner;
                let mut gx = vec![0.0; val(*x).len()];
                for o in 0..outer {
                    let dst = (o * dim + start) * inner;
                    gx[dst..dst + width].copy_from_slice(&g[o * width..(o + 1) * width]);
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Reshape(x) => self.accumulate(grads, *x, g.to_vec()),
            Op::Relu(x) => {
                let gx = g.iter().zip(val(*x)).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::SumLast(x) => {
                let n = *shp(*x).last().expect("rank >= 1");
                let gx = (0..val(*x).len()).map(|i| g[i / n]).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::NormLast(x) => {
                let n = *shp(*x).last().expect("rank >= 1");
                let y = node.value.data();
                let gx = val(*x).iter().enumerate().map(|(i, v)| g[i / n] * v / y[i / n]).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::SegmentSoftmax { x, seg, num } => {
                let y = node.value.data();
                let h = y.len() / seg.len().max(1);
                let mut dot = vec![0.0; num * h];
                for (e, &s) in seg.iter().enumerate() {
                    for c in 0..h {
                        dot[s * h + c] += y[e * h + c] * g[e * h + c];
                    }
                }
                let gx = (0..y.len()).map(|i| y[i] * (g[i] - dot[seg[i / h] * h + i % h])).collect();
                self.accumulate(grads, *x, gx);
            }
            Op::SegmentReduce { x, seg, mode, counts, argmax } => {
                let w = self.nodes[x.0].value.row_len();
                let mut gx = vec![0.0; val(*x).len()];
                match mode {
                    Reduce::Sum | Reduce::Mean => {
                        for (e, &s) in seg.iter().enumerate() {
                            let f = if *mode == Reduce::Mean { 1.0 / counts[s] as f64 } else { 1.0 };
                            for c in 0..w {
                                gx[e * w + c] = g[s * w + c] * f;
                            }
                        }
                    }
                    Reduce::Max => {
                        for (slot, &e) in argmax.iter().enumerate() {
                            if e != usize::MAX {
                                gx[e * w + slot % w] += g[slot];
                            }
                        }
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::GatherRows(x, idx) => {
                let w = self.nodes[x.0].value.row_len();
                let mut gx = vec![0.0; val(*x).len()];
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..w {
                        gx[i * w + c] += g[r * w + c];
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Sum(x) => self.accumulate(grads, *x, vec![g[0]; val(*x).len()]),
            Op::Mean(x) => {
                let n = val(*x).len().max(1) as f64;
                self.accumulate(grads, *x, vec![g[0] / n; val(*x).len()]);
            }
            Op::Mse(p, t) => {
                let n = t.len().max(1) as f64;
                let gp = val(*p).iter().zip(t.data()).map(|(a, b)| g[0] * 2.0 * (a - b) / n).collect();
                self.accumulate(grads, *p, gp);
            }
            Op::Mae(p, t) => {
                let n = t.len().max(1) as f64;
                let sign = |d: f64| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
                let gp = val(*p).iter().zip(t.data()).map(|(a, b)| g[0] * sign(a - b) / n).collect();
                self.accumulate(grads, *p, gp);
            }
        }
    }
}
