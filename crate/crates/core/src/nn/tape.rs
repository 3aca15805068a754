use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{GatherPlan, ParamId, ParamStore, Real, Tensor};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Relu(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>),
    Stack(Vec<NodeId>),
    Gather(NodeId, Arc<GatherPlan<T>>),
    Softmax(NodeId),
    WeightedCe { logits: NodeId, target: Vec<u32>, weight: Vec<f64> },
    Smoothmax { logits: NodeId, alpha: f64, dbeta: f64 },
    Sum(NodeId),
}

#[derive(Debug, Clone)]
struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    needs_grad: bool,
}

/// Append-only computation record. Gradients are recomputed from scratch by
/// every call to [`Tape::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(NodeId, ParamId)>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, needs_grad });
        self.nodes.len() - 1
    }

    fn ng(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id].value
    }

    /// Constant input.
    pub fn input(&mut self, t: Tensor<T>) -> NodeId {
        self.push(Op::Leaf, t, false)
    }

    /// Leaf whose gradient is wanted.
    pub fn variable(&mut self, t: Tensor<T>) -> NodeId {
        self.push(Op::Leaf, t, true)
    }

    /// Leaf holding a copy of a parameter block; `trainable = false` freezes it.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId, trainable: bool) -> NodeId {
        let b = store.block(id);
        let n = self.push(Op::Leaf, Tensor::from_vec(b.rows, b.cols, b.data.clone()), trainable);
        if trainable {
            self.params.push((n, id));
        }
        n
    }

    /// `x W + b` with `x: n x in`, `W: in x out`, `b: 1 x out`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let (xv, wv) = (&self.nodes[x].value, &self.nodes[w].value);
        assert_eq!(xv.cols, wv.rows, "linear: input width {} vs weight rows {}", xv.cols, wv.rows);
        let (n, k, m) = (xv.rows, xv.cols, wv.cols);
        let mut out = Tensor::zeros(n, m);
        if let Some(b) = b {
            let bv = &self.nodes[b].value;
            assert_eq!(bv.data.len(), m, "linear: bias length");
            for r in 0..n {
                out.row_mut(r).copy_from_slice(&bv.data);
            }
        }
        T::gemm(n, k, m, &xv.data, k as isize, 1, &wv.data, m as isize, 1, T::one(), &mut out.data);
        let mut deps = vec![x, w];
        deps.extend(b);
        let ng = self.ng(&deps);
        self.push(Op::Linear { x, w, b }, out, ng)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut v = self.nodes[x].value.clone();
        v.data.iter_mut().for_each(|a| {
            if *a < T::zero() {
                *a = T::zero()
            }
        });
        let ng = self.ng(&[x]);
        self.push(Op::Relu(x), v, ng)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        assert!(av.same_shape(bv), "add: shape mismatch");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| *x + *y).collect();
        let t = Tensor::from_vec(av.rows, av.cols, data);
        let ng = self.ng(&[a, b]);
        self.push(Op::Add(a, b), t, ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        assert!(av.same_shape(bv), "mul: shape mismatch");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| *x * *y).collect();
        let t = Tensor::from_vec(av.rows, av.cols, data);
        let ng = self.ng(&[a, b]);
        self.push(Op::Mul(a, b), t, ng)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let mut v = self.nodes[x].value.clone();
        let cc = T::from_f64(c);
        v.data.iter_mut().for_each(|a| *a *= cc);
        let ng = self.ng(&[x]);
        self.push(Op::Scale(x, c), v, ng)
    }

    /// Column-wise concatenation of equally tall matrices.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.nodes[parts[0]].value.rows;
        let cols: usize = parts.iter().map(|&p| self.nodes[p].value.cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = &self.nodes[p].value;
            assert_eq!(v.rows, rows, "concat: row mismatch");
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + v.cols].copy_from_slice(v.row(r));
            }
            off += v.cols;
        }
        let ng = self.ng(parts);
        self.push(Op::Concat(parts.to_vec()), out, ng)
    }

    /// Row-wise stacking of equally wide matrices.
    pub fn stack(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.nodes[parts[0]].value.cols;
        let mut data = Vec::new();
        for &p in parts {
            let v = &self.nodes[p].value;
            assert_eq!(v.cols, cols, "stack: column mismatch");
            data.extend_from_slice(&v.data);
        }
        let rows = data.len() / cols.max(1);
        let ng = self.ng(parts);
        self.push(Op::Stack(parts.to_vec()), Tensor::from_vec(rows, cols, data), ng)
    }

    pub fn gather(&mut self, x: NodeId, plan: Arc<GatherPlan<T>>) -> NodeId {
        let xv = &self.nodes[x].value;
        assert_eq!(xv.rows, plan.in_rows, "gather: input rows");
        let c = xv.cols;
        let mut out = Tensor::zeros(plan.out_rows, plan.blocks * c);
        for r in 0..plan.out_rows {
            for b in 0..plan.blocks {
                let o = r * plan.blocks * c + b * c;
                for (i, w) in plan.slot(r, b) {
                    let src = xv.row(i);
                    for (d, s) in out.data[o..o + c].iter_mut().zip(src) {
                        *d += w * *s;
                    }
                }
            }
        }
        let ng = self.ng(&[x]);
        self.push(Op::Gather(x, plan), out, ng)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let mut out = xv.clone();
        for r in 0..xv.rows {
            softmax_row(out.row_mut(r));
        }
        let ng = self.ng(&[x]);
        self.push(Op::Softmax(x), out, ng)
    }

    /// `Σ_r weight_r · (−ln softmax(logits_r)[target_r])` as a 1x1 node.
    pub fn weighted_ce(&mut self, logits: NodeId, target: &[u32], weight: &[f64]) -> NodeId {
        let lv = &self.nodes[logits].value;
        assert!(target.len() == lv.rows && weight.len() == lv.rows, "weighted_ce: batch size");
        let mut total = 0.0f64;
        for r in 0..lv.rows {
            let row = lv.row(r);
            let t = target[r] as usize;
            assert!(t < lv.cols, "weighted_ce: target bin out of range");
            total += weight[r] * (logsumexp(row) - row[t].as_f64());
        }
        let ng = self.ng(&[logits]);
        self.push(
            Op::WeightedCe {
                logits,
                target: target.to_vec(),
                weight: weight.to_vec(),
            },
            Tensor::scalar(T::from_f64(total)),
            ng,
        )
    }

    /// Differentiable point estimate `Δβ Σ_q q Φ_q` with
    /// `Φ = P^α / Σ P^α = softmax(α · logits)`; one output column.
    pub fn smoothmax(&mut self, logits: NodeId, alpha: f64, dbeta: f64) -> NodeId {
        let lv = &self.nodes[logits].value;
        let mut out = Tensor::zeros(lv.rows, 1);
        for r in 0..lv.rows {
            let phi = amplified(lv.row(r), alpha);
            let e: f64 = phi.iter().enumerate().map(|(q, p)| q as f64 * p).sum();
            out.data[r] = T::from_f64(dbeta * e);
        }
        let ng = self.ng(&[logits]);
        self.push(Op::Smoothmax { logits, alpha, dbeta }, out, ng)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.nodes[x].value.data.iter().map(|v| v.as_f64()).sum();
        let ng = self.ng(&[x]);
        self.push(Op::Sum(x), Tensor::scalar(T::from_f64(s)), ng)
    }

    /// Gradients of a scalar node.
    pub fn backward(&mut self, out: NodeId) {
        let v = &self.nodes[out].value;
        assert!(v.rows == 1 && v.cols == 1, "backward needs a scalar output");
        self.backward_with_seed(out, Tensor::scalar(T::one()));
    }

    /// Vector–Jacobian product with an explicit output cotangent.
    pub fn backward_with_seed(&mut self, out: NodeId, seed: Tensor<T>) {
        assert!(seed.same_shape(&self.nodes[out].value), "seed shape");
        self.grads = vec![None; self.nodes.len()];
        self.grads[out] = Some(seed);
        for id in (0..=out).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let g = match self.grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop(id, &g);
            self.grads[id] = Some(g);
        }
    }

    /// Gradient of the last backward pass at `id` (zeros if unreached).
    pub fn grad(&self, id: NodeId) -> Tensor<T> {
        match self.grads.get(id).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => {
                let v = &self.nodes[id].value;
                Tensor::zeros(v.rows, v.cols)
            }
        }
    }

    /// Parameter gradients of the last backward pass, one vector per block of
    /// `store` (zeros for blocks not on the tape or frozen).
    pub fn param_grads(&self, store: &ParamStore<T>) -> Vec<Vec<T>> {
        let mut out: Vec<Vec<T>> = store.blocks().iter().map(|b| vec![T::zero(); b.data.len()]).collect();
        for &(node, pid) in &self.params {
            if let Some(g) = self.grads.get(node).and_then(|g| g.as_ref()) {
                for (o, v) in out[pid.0].iter_mut().zip(&g.data) {
                    *o += *v;
                }
            }
        }
        out
    }

    fn backprop(&mut self, id: NodeId, g: &Tensor<T>) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        match &nodes[id].op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (x, w, b) = (*x, *w, *b);
                let (n, k) = (nodes[x].value.rows, nodes[x].value.cols);
                let m = nodes[w].value.cols;
                if nodes[x].needs_grad {
                    let wv = &nodes[w].value.data;
                    // gx += g (n x m) · Wᵀ (m x k)
                    acc(nodes, grads, x, |gx| {
                        T::gemm(n, m, k, &g.data, m as isize, 1, wv, 1, m as isize, T::one(), &mut gx.data)
                    });
                }
                if nodes[w].needs_grad {
                    let xv = &nodes[x].value.data;
                    // gW += xᵀ (k x n) · g (n x m)
                    acc(nodes, grads, w, |gw| {
                        T::gemm(k, n, m, xv, 1, k as isize, &g.data, m as isize, 1, T::one(), &mut gw.data)
                    });
                }
                if let Some(b) = b {
                    acc(nodes, grads, b, |gb| {
                        for c in 0..m {
                            let s: f64 = (0..n).map(|r| g.data[r * m + c].as_f64()).sum();
                            gb.data[c] += T::from_f64(s);
                        }
                    });
                }
            }
            Op::Relu(x) => {
                let x = *x;
                let xv = &nodes[x].value.data;
                acc(nodes, grads, x, |gx| {
                    for ((d, v), gi) in gx.data.iter_mut().zip(xv.iter()).zip(&g.data) {
                        if *v > T::zero() {
                            *d += *gi;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                acc(nodes, grads, a, |ga| ga.data.iter_mut().zip(&g.data).for_each(|(d, s)| *d += *s));
                acc(nodes, grads, b, |gb| gb.data.iter_mut().zip(&g.data).for_each(|(d, s)| *d += *s));
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let av = &nodes[a].value.data;
                let bv = &nodes[b].value.data;
                acc(nodes, grads, a, |ga| {
                    for i in 0..ga.data.len() {
                        ga.data[i] += g.data[i] * bv[i];
                    }
                });
                acc(nodes, grads, b, |gb| {
                    for i in 0..gb.data.len() {
                        gb.data[i] += g.data[i] * av[i];
                    }
                });
            }
            Op::Scale(x, c) => {
                let (x, cc) = (*x, T::from_f64(*c));
                acc(nodes, grads, x, |gx| gx.data.iter_mut().zip(&g.data).for_each(|(d, s)| *d += *s * cc));
            }
            Op::Concat(parts) => {
                let cols = g.cols;
                let mut off = 0;
                for &p in parts {
                    let pc = nodes[p].value.cols;
                    acc(nodes, grads, p, |gp| {
                        for r in 0..g.rows {
                            let src = &g.data[r * cols + off..r * cols + off + pc];
                            gp.row_mut(r).iter_mut().zip(src).for_each(|(d, s)| *d += *s);
                        }
                    });
                    off += pc;
                }
            }
            Op::Stack(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = nodes[p].value.data.len();
                    acc(nodes, grads, p, |gp| {
                        gp.data.iter_mut().zip(&g.data[off..off + n]).for_each(|(d, s)| *d += *s)
                    });
                    off += n;
                }
            }
            Op::Gather(x, plan) => {
                let x = *x;
                let c = nodes[x].value.cols;
                acc(nodes, grads, x, |gx| {
                    for r in 0..plan.out_rows {
                        for b in 0..plan.blocks {
                            let o = r * plan.blocks * c + b * c;
                            let src = &g.data[o..o + c];
                            for (i, w) in plan.slot(r, b) {
                                for (d, s) in gx.row_mut(i).iter_mut().zip(src) {
                                    *d += w * *s;
                                }
                            }
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let x = *x;
                let y = &nodes[id].value;
                acc(nodes, grads, x, |gx| {
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dotp: f64 = yr.iter().zip(gr).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                        let dd = T::from_f64(dotp);
                        for ((d, yi), gi) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d += *yi * (*gi - dd);
                        }
                    }
                });
            }
            Op::WeightedCe { logits, target, weight } => {
                let logits = *logits;
                let lv = &nodes[logits].value;
                let s = g.data[0].as_f64();
                acc(nodes, grads, logits, |gl| {
                    for r in 0..lv.rows {
                        let mut p: Vec<f64> = lv.row(r).iter().map(|v| v.as_f64()).collect();
                        softmax_row(&mut p);
                        p[target[r] as usize] -= 1.0;
                        let k = s * weight[r];
                        for (d, pi) in gl.row_mut(r).iter_mut().zip(&p) {
                            *d += T::from_f64(k * pi);
                        }
                    }
                });
            }
            Op::Smoothmax { logits, alpha, dbeta } => {
                let (logits, alpha, dbeta) = (*logits, *alpha, *dbeta);
                let lv = &nodes[logits].value;
                acc(nodes, grads, logits, |gl| {
                    for r in 0..lv.rows {
                        let phi = amplified(lv.row(r), alpha);
                        let e: f64 = phi.iter().enumerate().map(|(q, p)| q as f64 * p).sum();
                        let k = g.data[r].as_f64() * alpha * dbeta;
                        for (q, (d, p)) in gl.row_mut(r).iter_mut().zip(&phi).enumerate() {
                            *d += T::from_f64(k * p * (q as f64 - e));
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let x = *x;
                let s = g.data[0];
                acc(nodes, grads, x, |gx| gx.data.iter_mut().for_each(|d| *d += s));
            }
        }
    }
}

fn acc<T: Real>(nodes: &[Node<T>], grads: &mut [Option<Tensor<T>>], id: NodeId, f: impl FnOnce(&mut Tensor<T>)) {
    if !nodes[id].needs_grad {
        return;
    }
    let g = grads[id].get_or_insert_with(|| {
        let v = &nodes[id].value;
        Tensor::zeros(v.rows, v.cols)
    });
    f(g);
}

fn logsumexp<T: Real>(row: &[T]) -> f64 {
    let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v.as_f64() - m).exp()).sum::<f64>().ln()
}

/// In-place numerically stable softmax with `f64` normalization.
pub(crate) fn softmax_row<T: Real>(row: &mut [T]) {
    let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        let e = (v.as_f64() - m).exp();
        s += e;
        *v = T::from_f64(e);
    }
    for v in row.iter_mut() {
        *v = T::from_f64(v.as_f64() / s);
    }
}

/// `softmax(α · logits)` in `f64`.
fn amplified<T: Real>(row: &[T], alpha: f64) -> Vec<f64> {
    let mut p: Vec<f64> = row.iter().map(|v| alpha * v.as_f64()).collect();
    softmax_row(&mut p);
    p
}
