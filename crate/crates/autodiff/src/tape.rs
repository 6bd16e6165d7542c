use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Handle to a value node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Dense { x: NodeId, w: ParamId, b: ParamId },
    Conv3x3 { x: NodeId, k: ParamId, b: ParamId },
    /// `argmax` holds, for every output element, the flat index of the input
    /// element that won its 2x2 window (recorded during the forward pass).
    MaxPool2 { x: NodeId, argmax: Vec<u32> },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Scale { x: NodeId, factor: T },
    Add { a: NodeId, b: NodeId },
    Reshape { x: NodeId },
    Mse { pred: NodeId, target: NodeId },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Append-only record of a forward computation.
///
/// Inputs of a node always precede it on the tape, so a single reverse sweep
/// in [`Tape::backward`] visits every node after all of its consumers.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of the loss with respect to tape nodes, as produced by
/// [`Tape::backward`]. Nodes the loss does not depend on have no entry.
pub struct NodeGrads<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> NodeGrads<T> {
    pub fn wrt(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }
}

/// Valid output range for one kernel offset `d` in {0,1,2} of a 3x3
/// same-padding convolution along an axis of length `n`: output positions `p`
/// with `p + d - 1` inside `[0, n)`. The source position is `p + d - 1`.
fn conv_span(d: usize, n: usize) -> (usize, usize) {
    let lo = 1usize.saturating_sub(d);
    let hi = (n as isize + 1 - d as isize).clamp(0, n as isize) as usize;
    (lo, hi)
}

fn sigmoid_stable<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Record an input tensor that is not differentiated through.
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Fully connected layer: `y = W x + b` with `x: [in]`, `W: [out, in]`,
    /// `b: [out]`.
    pub fn dense(&mut self, store: &ParamStore<T>, x: NodeId, w: ParamId, b: ParamId) -> Result<NodeId> {
        let xv = self.value(x);
        let wv = store.value(w);
        let bv = store.value(b);
        let (w_shape, x_shape) = (wv.shape(), xv.shape());
        if x_shape.len() != 1 || w_shape.len() != 2 || w_shape[1] != x_shape[0] {
            return Err(Error::ShapeMismatch(format!(
                "dense expects x: [in], W: [out, in]; got x: {x_shape:?}, W: {w_shape:?}"
            )));
        }
        let (n_out, n_in) = (w_shape[0], w_shape[1]);
        if bv.shape() != [n_out] {
            return Err(Error::ShapeMismatch(format!(
                "dense bias must be [{n_out}], got {:?}",
                bv.shape()
            )));
        }
        let mut y = bv.data().to_vec();
        let (xd, wd) = (xv.data(), wv.data());
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &wd[o * n_in..(o + 1) * n_in];
            let mut acc = T::zero();
            for (wi, xi) in row.iter().zip(xd) {
                acc += *wi * *xi;
            }
            *yo += acc;
        }
        let value = Tensor::from_vec(&[n_out], y)?;
        Ok(self.push(value, Op::Dense { x, w, b }))
    }

    /// 3x3 convolution with stride 1 and same zero padding, in the
    /// cross-correlation convention:
    /// `y[co,i,j] = b[co] + sum_{ci,di,dj} k[co,ci,di,dj] * x[ci, i+di-1, j+dj-1]`.
    ///
    /// Shapes: `x: [C_in, H, W]`, `k: [C_out, C_in, 3, 3]`, `b: [C_out]`.
    pub fn conv2d_3x3(&mut self, store: &ParamStore<T>, x: NodeId, k: ParamId, b: ParamId) -> Result<NodeId> {
        let xv = self.value(x);
        let kv = store.value(k);
        let bv = store.value(b);
        let xs = xv.shape();
        let ks = kv.shape();
        if xs.len() != 3 || ks.len() != 4 || ks[2] != 3 || ks[3] != 3 || ks[1] != xs[0] {
            return Err(Error::ShapeMismatch(format!(
                "conv2d_3x3 expects x: [C_in, H, W], k: [C_out, C_in, 3, 3]; got x: {xs:?}, k: {ks:?}"
            )));
        }
        let (c_out, c_in, h, w) = (ks[0], ks[1], xs[1], xs[2]);
        if bv.shape() != [c_out] {
            return Err(Error::ShapeMismatch(format!(
                "conv2d_3x3 bias must be [{c_out}], got {:?}",
                bv.shape()
            )));
        }
        let plane = h * w;
        let mut out = vec![T::zero(); c_out * plane];
        let (xd, kd, bd) = (xv.data(), kv.data(), bv.data());
        for co in 0..c_out {
            let out_plane = &mut out[co * plane..(co + 1) * plane];
            out_plane.fill(bd[co]);
            for ci in 0..c_in {
                let x_plane = &xd[ci * plane..(ci + 1) * plane];
                for di in 0..3 {
                    let (i_lo, i_hi) = conv_span(di, h);
                    for dj in 0..3 {
                        let (j_lo, j_hi) = conv_span(dj, w);
                        if j_lo >= j_hi {
                            continue;
                        }
                        let kval = kd[((co * c_in + ci) * 3 + di) * 3 + dj];
                        for i in i_lo..i_hi {
                            let si = i + di - 1;
                            let sj = j_lo + dj - 1;
                            let orow = &mut out_plane[i * w + j_lo..i * w + j_hi];
                            let xrow = &x_plane[si * w + sj..si * w + sj + (j_hi - j_lo)];
                            for (o, xv) in orow.iter_mut().zip(xrow) {
                                *o += kval * *xv;
                            }
                        }
                    }
                }
            }
        }
        let value = Tensor::from_vec(&[c_out, h, w], out)?;
        Ok(self.push(value, Op::Conv3x3 { x, k, b }))
    }

    /// 2x2 max pooling with stride 2 on `[C, H, W]`; output is
    /// `[C, H/2, W/2]` (floor), so trailing odd rows/columns are dropped.
    /// Ties within a window resolve to the first element in row-major scan
    /// order, which makes the backward routing deterministic.
    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let xs = xv.shape();
        if xs.len() != 3 {
            return Err(Error::ShapeMismatch(format!("maxpool2 expects x: [C, H, W], got {xs:?}")));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::ShapeMismatch(format!("maxpool2 needs H >= 2 and W >= 2, got {xs:?}")));
        }
        let xd = xv.data();
        let mut out = vec![T::zero(); c * oh * ow];
        let mut argmax = vec![0u32; out.len()];
        for ci in 0..c {
            for oi in 0..oh {
                for oj in 0..ow {
                    let base = ci * h * w + (2 * oi) * w + 2 * oj;
                    let mut best_idx = base;
                    let mut best = xd[base];
                    for (di, dj) in [(0usize, 1usize), (1, 0), (1, 1)] {
                        let idx = base + di * w + dj;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                    let o = ci * oh * ow + oi * ow + oj;
                    out[o] = best;
                    argmax[o] = best_idx as u32;
                }
            }
        }
        let value = Tensor::from_vec(&[c, oh, ow], out)?;
        Ok(self.push(value, Op::MaxPool2 { x, argmax }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = {
            let xv = self.value(x);
            let data = xv.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
            Tensor::from_vec(xv.shape(), data).expect("same shape")
        };
        self.push(value, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = {
            let xv = self.value(x);
            let data = xv.data().iter().map(|&v| sigmoid_stable(v)).collect();
            Tensor::from_vec(xv.shape(), data).expect("same shape")
        };
        self.push(value, Op::Sigmoid { x })
    }

    /// Multiply every element by a constant.
    pub fn scale(&mut self, x: NodeId, factor: T) -> NodeId {
        let value = {
            let xv = self.value(x);
            let data = xv.data().iter().map(|&v| v * factor).collect();
            Tensor::from_vec(xv.shape(), data).expect("same shape")
        };
        self.push(value, Op::Scale { x, factor })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            if av.shape() != bv.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "add requires equal shapes, got {:?} and {:?}",
                    av.shape(),
                    bv.shape()
                )));
            }
            let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x + y).collect();
            Tensor::from_vec(av.shape(), data)?
        };
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).reshape(shape)?;
        Ok(self.push(value, Op::Reshape { x }))
    }

    /// Mean squared error over all elements; produces a rank-0 node.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let value = {
            let (pv, tv) = (self.value(pred), self.value(target));
            if pv.shape() != tv.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "mse requires equal shapes, got {:?} and {:?}",
                    pv.shape(),
                    tv.shape()
                )));
            }
            if pv.is_empty() {
                return Err(Error::InvalidArgument("mse over an empty tensor".into()));
            }
            let mut acc = T::zero();
            for (&p, &t) in pv.data().iter().zip(tv.data()) {
                let d = p - t;
                acc += d * d;
            }
            Tensor::scalar(acc / T::from_f64(pv.len() as f64))
        };
        Ok(self.push(value, Op::Mse { pred, target }))
    }

    /// Reverse sweep from `loss` (must be a one-element node).
    ///
    /// Parameter gradients are accumulated (`+=`) into `store`, so calling
    /// backward repeatedly without [`ParamStore::zero_grads`] sums gradients
    /// across passes — that is how minibatches are accumulated. Gradients with
    /// respect to tape nodes are returned fresh on every call.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore<T>) -> Result<NodeGrads<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward requires a one-element loss node, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let gd = g.data();
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Dense { x, w, b } => {
                    let n_in = self.value(*x).len();
                    let n_out = gd.len();
                    // dL/db = g
                    {
                        let gb = store.grad_mut(*b).data_mut();
                        for (gb_o, &g_o) in gb.iter_mut().zip(gd) {
                            *gb_o += g_o;
                        }
                    }
                    // dL/dW[o,i] = g[o] * x[i]
                    {
                        let xd_owned: Vec<T> = self.value(*x).data().to_vec();
                        let gw = store.grad_mut(*w).data_mut();
                        for o in 0..n_out {
                            let row = &mut gw[o * n_in..(o + 1) * n_in];
                            let g_o = gd[o];
                            for (gw_i, &x_i) in row.iter_mut().zip(&xd_owned) {
                                *gw_i += g_o * x_i;
                            }
                        }
                    }
                    // dL/dx[i] = sum_o W[o,i] * g[o]
                    {
                        let wd = store.value(*w).data();
                        let gx = Self::slot(&mut grads, *x, self.value(*x).shape());
                        for o in 0..n_out {
                            let row = &wd[o * n_in..(o + 1) * n_in];
                            let g_o = gd[o];
                            for (gx_i, &w_i) in gx.iter_mut().zip(row) {
                                *gx_i += g_o * w_i;
                            }
                        }
                    }
                }
                Op::Conv3x3 { x, k, b } => {
                    let xs = self.value(*x).shape().to_vec();
                    let (c_in, h, w) = (xs[0], xs[1], xs[2]);
                    let c_out = store.value(*b).len();
                    let plane = h * w;
                    {
                        let gb = store.grad_mut(*b).data_mut();
                        for co in 0..c_out {
                            let mut acc = T::zero();
                            for &g_v in &gd[co * plane..(co + 1) * plane] {
                                acc += g_v;
                            }
                            gb[co] += acc;
                        }
                    }
                    let xd_owned: Vec<T> = self.value(*x).data().to_vec();
                    // dL/dk[co,ci,di,dj] = sum over the valid span of
                    // g[co,i,j] * x[ci, i+di-1, j+dj-1]
                    {
                        let gk = store.grad_mut(*k).data_mut();
                        for co in 0..c_out {
                            let g_plane = &gd[co * plane..(co + 1) * plane];
                            for ci in 0..c_in {
                                let x_plane = &xd_owned[ci * plane..(ci + 1) * plane];
                                for di in 0..3 {
                                    let (i_lo, i_hi) = conv_span(di, h);
                                    for dj in 0..3 {
                                        let (j_lo, j_hi) = conv_span(dj, w);
                                        if j_lo >= j_hi {
                                            continue;
                                        }
                                        let mut acc = T::zero();
                                        for i in i_lo..i_hi {
                                            let si = i + di - 1;
                                            let sj = j_lo + dj - 1;
                                            let grow = &g_plane[i * w + j_lo..i * w + j_hi];
                                            let xrow = &x_plane[si * w + sj..si * w + sj + (j_hi - j_lo)];
                                            for (&g_v, &x_v) in grow.iter().zip(xrow) {
                                                acc += g_v * x_v;
                                            }
                                        }
                                        gk[((co * c_in + ci) * 3 + di) * 3 + dj] += acc;
                                    }
                                }
                            }
                        }
                    }
                    // dL/dx[ci, i+di-1, j+dj-1] += k[co,ci,di,dj] * g[co,i,j]
                    {
                        let kd_owned: Vec<T> = store.value(*k).data().to_vec();
                        let gx = Self::slot(&mut grads, *x, &xs);
                        for co in 0..c_out {
                            let g_plane = &gd[co * plane..(co + 1) * plane];
                            for ci in 0..c_in {
                                let gx_plane = &mut gx[ci * plane..(ci + 1) * plane];
                                for di in 0..3 {
                                    let (i_lo, i_hi) = conv_span(di, h);
                                    for dj in 0..3 {
                                        let (j_lo, j_hi) = conv_span(dj, w);
                                        if j_lo >= j_hi {
                                            continue;
                                        }
                                        let kval = kd_owned[((co * c_in + ci) * 3 + di) * 3 + dj];
                                        for i in i_lo..i_hi {
                                            let si = i + di - 1;
                                            let sj = j_lo + dj - 1;
                                            let grow = &g_plane[i * w + j_lo..i * w + j_hi];
                                            let gxrow = &mut gx_plane[si * w + sj..si * w + sj + (j_hi - j_lo)];
                                            for (gx_v, &g_v) in gxrow.iter_mut().zip(grow) {
                                                *gx_v += kval * g_v;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Op::MaxPool2 { x, argmax } => {
                    let shape = self.value(*x).shape().to_vec();
                    let gx = Self::slot(&mut grads, *x, &shape);
                    for (&src, &g_v) in argmax.iter().zip(gd) {
                        gx[src as usize] += g_v;
                    }
                }
                Op::Relu { x } => {
                    let mask: Vec<bool> = self.value(*x).data().iter().map(|&v| v > T::zero()).collect();
                    let shape = self.value(*x).shape().to_vec();
                    let gx = Self::slot(&mut grads, *x, &shape);
                    for ((gx_v, &g_v), m) in gx.iter_mut().zip(gd).zip(mask) {
                        if m {
                            *gx_v += g_v;
                        }
                    }
                }
                Op::Sigmoid { x } => {
                    // d sigma / dx = y (1 - y), using the stored output.
                    let y_owned: Vec<T> = self.nodes[idx].value.data().to_vec();
                    let shape = self.value(*x).shape().to_vec();
                    let gx = Self::slot(&mut grads, *x, &shape);
                    for ((gx_v, &g_v), y_v) in gx.iter_mut().zip(gd).zip(y_owned) {
                        *gx_v += g_v * y_v * (T::one() - y_v);
                    }
                }
                Op::Scale { x, factor } => {
                    let f = *factor;
                    let shape = self.value(*x).shape().to_vec();
                    let gx = Self::slot(&mut grads, *x, &shape);
                    for (gx_v, &g_v) in gx.iter_mut().zip(gd) {
                        *gx_v += f * g_v;
                    }
                }
                Op::Add { a, b } => {
                    let shape = self.value(*a).shape().to_vec();
                    {
                        let ga = Self::slot(&mut grads, *a, &shape);
                        for (ga_v, &g_v) in ga.iter_mut().zip(gd) {
                            *ga_v += g_v;
                        }
                    }
                    let gb = Self::slot(&mut grads, *b, &shape);
                    for (gb_v, &g_v) in gb.iter_mut().zip(gd) {
                        *gb_v += g_v;
                    }
                }
                Op::Reshape { x } => {
                    let shape = self.value(*x).shape().to_vec();
                    let gx = Self::slot(&mut grads, *x, &shape);
                    for (gx_v, &g_v) in gx.iter_mut().zip(gd) {
                        *gx_v += g_v;
                    }
                }
                Op::Mse { pred, target } => {
                    let g_scalar = gd[0];
                    let n = self.value(*pred).len();
                    let two_over_n = T::from_f64(2.0 / n as f64) * g_scalar;
                    let diffs: Vec<T> = self
                        .value(*pred)
                        .data()
                        .iter()
                        .zip(self.value(*target).data())
                        .map(|(&p, &t)| p - t)
                        .collect();
                    let pshape = self.value(*pred).shape().to_vec();
                    {
                        let gp = Self::slot(&mut grads, *pred, &pshape);
                        for (gp_v, &d) in gp.iter_mut().zip(&diffs) {
                            *gp_v += two_over_n * d;
                        }
                    }
                    let gt = Self::slot(&mut grads, *target, &pshape);
                    for (gt_v, &d) in gt.iter_mut().zip(&diffs) {
                        *gt_v -= two_over_n * d;
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(NodeGrads { grads })
    }

    fn slot<'a>(grads: &'a mut [Option<Tensor<T>>], id: NodeId, shape: &[usize]) -> &'a mut [T] {
        grads[id.0].get_or_insert_with(|| Tensor::zeros(shape)).data_mut()
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}
