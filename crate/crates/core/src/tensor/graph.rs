use std::collections::HashMap;

use super::kernels::{self, ConvGeom};
use super::{Real, Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`]. Only meaningful for the graph that
/// issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which axes a [`Graph::broadcast_mul`] weight is broadcast over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broadcast {
    /// Weight is `n x 1 x h x w`, shared by every channel.
    Pixel,
    /// Weight is `n x c x 1 x 1`, shared by every position.
    Channel,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var, geom: ConvGeom },
    Prelu { x: Var, slope: Var },
    Sigmoid { x: Var },
    GlobalAvgPool { x: Var },
    Concat { inputs: Vec<Var> },
    Add { x: Var, y: Var },
    Mul { x: Var, y: Var },
    BroadcastMul { x: Var, w: Var, mode: Broadcast },
    Sum { x: Var },
    L2Loss { out: Var, target: Var },
}

#[derive(Debug)]
struct Node<T> {
    op: Op,
    value: Tensor<T>,
    requires_grad: bool,
}

/// Append-only tape. Inputs of a node always precede it, so append order is
/// a topological order and backward is a single reverse sweep.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    bound: HashMap<usize, Var>,
    bindings: Vec<(usize, Var)>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            bound: HashMap::new(),
            bindings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that receives no gradient (images, targets).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    /// A differentiable leaf.
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Binds an externally owned parameter under `key`. Binding the same key
    /// twice returns the same leaf, so shared weights accumulate gradients.
    pub fn bind(&mut self, key: usize, value: &Tensor<T>) -> Var {
        if let Some(&v) = self.bound.get(&key) {
            return v;
        }
        let v = self.variable(value.clone());
        self.bound.insert(key, v);
        self.bindings.push((key, v));
        v
    }

    /// Parameter bindings in bind order.
    pub fn bindings(&self) -> &[(usize, Var)] {
        &self.bindings
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    /// Stride-1 cross-correlation with zero padding and per-channel bias.
    /// `weight` is `co x ci x kh x kw`, `bias` is `1 x co x 1 x 1`.
    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var, pad: usize) -> Result<Var> {
        let s = self.shape(x);
        let ws = self.shape(weight);
        let bs = self.shape(bias);
        if ws.c != s.c {
            return Err(Error::shape(format!(
                "conv2d: input has {} channels, weight {ws} expects {}",
                s.c, ws.c
            )));
        }
        if bs.numel() != ws.n {
            return Err(Error::shape(format!(
                "conv2d: bias {bs} does not match {} output channels",
                ws.n
            )));
        }
        if s.h + 2 * pad < ws.h || s.w + 2 * pad < ws.w {
            return Err(Error::shape(format!(
                "conv2d: kernel {}x{} larger than padded input {s} (pad {pad})",
                ws.h, ws.w
            )));
        }
        let geom = ConvGeom {
            ci: s.c,
            co: ws.n,
            kh: ws.h,
            kw: ws.w,
            pad,
            h: s.h,
            w: s.w,
            oh: s.h + 2 * pad - ws.h + 1,
            ow: s.w + 2 * pad - ws.w + 1,
        };
        let out = kernels::conv2d_forward(&geom, self.value(x), self.value(weight), self.value(bias));
        let rg = self.needs(x) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            Op::Conv2d {
                x,
                w: weight,
                b: bias,
                geom,
            },
            out,
            rg,
        ))
    }

    /// Per-channel PReLU; `slope` holds one value per channel.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let s = self.shape(x);
        let a = self.value(slope);
        if a.numel() != s.c {
            return Err(Error::shape(format!(
                "prelu: {} slopes for {} channels",
                a.numel(),
                s.c
            )));
        }
        let plane = s.spatial();
        let a = a.data();
        let mut out = self.value(x).clone();
        for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let k = a[i % s.c];
            for v in chunk {
                if *v < T::zero() {
                    *v *= k;
                }
            }
        }
        let rg = self.needs(x) || self.needs(slope);
        Ok(self.push(Op::Prelu { x, slope }, out, rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        let rg = self.needs(x);
        self.push(Op::Sigmoid { x }, out, rg)
    }

    /// Mean over each spatial plane, giving `n x c x 1 x 1`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let s = self.shape(x);
        let plane = s.spatial();
        let denom = T::lit(plane as f64);
        let data = self
            .value(x)
            .data()
            .chunks(plane)
            .map(|c| c.iter().copied().sum::<T>() / denom)
            .collect();
        let out = Tensor::from_vec(Shape { h: 1, w: 1, ..s }, data).expect("pool shape");
        let rg = self.needs(x);
        self.push(Op::GlobalAvgPool { x }, out, rg)
    }

    /// Concatenates along the channel axis in argument order.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::shape("concat of zero tensors"))?;
        let s0 = self.shape(first);
        let mut channels = 0;
        for &v in inputs {
            let s = self.shape(v);
            if (s.n, s.h, s.w) != (s0.n, s0.h, s0.w) {
                return Err(Error::shape(format!("concat: {s} does not match {s0}")));
            }
            channels += s.c;
        }
        let out_shape = Shape { c: channels, ..s0 };
        let plane = s0.spatial();
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..s0.n {
            for &v in inputs {
                let t = self.value(v);
                let c = t.shape().c;
                data.extend_from_slice(&t.data()[n * c * plane..(n + 1) * c * plane]);
            }
        }
        let out = Tensor::from_vec(out_shape, data)?;
        let rg = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(
            Op::Concat {
                inputs: inputs.to_vec(),
            },
            out,
            rg,
        ))
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        self.same_shape("add", x, y)?;
        let mut out = self.value(x).clone();
        out.add_assign(self.value(y));
        let rg = self.needs(x) || self.needs(y);
        Ok(self.push(Op::Add { x, y }, out, rg))
    }

    /// Elementwise product of two same-shaped tensors.
    pub fn mul(&mut self, x: Var, y: Var) -> Result<Var> {
        self.same_shape("mul", x, y)?;
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(self.value(y).data())
            .map(|(&a, &b)| a * b)
            .collect();
        let out = Tensor::from_vec(self.shape(x), data)?;
        let rg = self.needs(x) || self.needs(y);
        Ok(self.push(Op::Mul { x, y }, out, rg))
    }

    /// Multiplies `x` by a weight broadcast over channels (`n x 1 x h x w`)
    /// or over positions (`n x c x 1 x 1`).
    pub fn broadcast_mul(&mut self, x: Var, w: Var) -> Result<Var> {
        let s = self.shape(x);
        let ws = self.shape(w);
        let mode = if ws == (Shape { c: 1, ..s }) {
            Broadcast::Pixel
        } else if ws == (Shape { h: 1, w: 1, ..s }) {
            Broadcast::Channel
        } else {
            return Err(Error::shape(format!(
                "broadcast_mul: weight {ws} fits neither {} nor {} for input {s}",
                Shape { c: 1, ..s },
                Shape { h: 1, w: 1, ..s }
            )));
        };
        let plane = s.spatial();
        let wd = self.value(w).data();
        let mut out = self.value(x).clone();
        for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            match mode {
                Broadcast::Pixel => {
                    let n = i / s.c;
                    let row = &wd[n * plane..(n + 1) * plane];
                    chunk.iter_mut().zip(row).for_each(|(v, &k)| *v *= k);
                }
                Broadcast::Channel => {
                    let k = wd[i];
                    chunk.iter_mut().for_each(|v| *v *= k);
                }
            }
        }
        let rg = self.needs(x) || self.needs(w);
        Ok(self.push(Op::BroadcastMul { x, w, mode }, out, rg))
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.needs(x);
        self.push(Op::Sum { x }, out, rg)
    }

    /// `(1/N) * sum_i ||out_i - target_i||^2` with `N` the batch size.
    pub fn l2_loss(&mut self, out: Var, target: Var) -> Result<Var> {
        self.same_shape("l2_loss", out, target)?;
        let n = T::lit(self.shape(out).n as f64);
        let total: T = self
            .value(out)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        let rg = self.needs(out) || self.needs(target);
        Ok(self.push(Op::L2Loss { out, target }, Tensor::scalar(total / n), rg))
    }

    fn same_shape(&self, op: &str, x: Var, y: Var) -> Result<()> {
        let (a, b) = (self.shape(x), self.shape(y));
        if a != b {
            return Err(Error::shape(format!("{op}: shapes {a} and {b} differ")));
        }
        Ok(())
    }

    /// Reverse sweep from a scalar loss. Gradients from fan-out are summed,
    /// in node-append order.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let ls = self.shape(loss);
        if ls != Shape::scalar() {
            return Err(Error::contract(format!(
                "backward needs a 1x1x1x1 loss, got {ls}"
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            // Leaves have no inputs; their gradient simply stays in place.
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            let mut acc = |v: Var, t: Tensor<T>| match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Conv2d { x, w, b, geom } => {
                    let need_params = self.needs(*w) || self.needs(*b);
                    let (dx, dw, db) = kernels::conv2d_backward(
                        geom,
                        self.value(*x),
                        self.value(*w),
                        &g,
                        self.needs(*x),
                        need_params,
                    );
                    if let Some(dx) = dx {
                        acc(*x, dx);
                    }
                    if let (Some(dw), Some(db)) = (dw, db) {
                        if self.needs(*w) {
                            acc(*w, dw);
                        }
                        if self.needs(*b) {
                            let bs = self.shape(*b);
                            acc(*b, Tensor::from_vec(bs, db.into_vec())?);
                        }
                    }
                }
                Op::Prelu { x, slope } => {
                    let xv = self.value(*x);
                    let s = xv.shape();
                    let plane = s.spatial();
                    let a = self.value(*slope).data();
                    let mut dx = g.clone();
                    let mut da = vec![T::zero(); s.c];
                    for (i, (gc, xc)) in dx
                        .data_mut()
                        .chunks_mut(plane)
                        .zip(xv.data().chunks(plane))
                        .enumerate()
                    {
                        let c = i % s.c;
                        for (gv, &xi) in gc.iter_mut().zip(xc) {
                            if xi < T::zero() {
                                da[c] += *gv * xi;
                                *gv *= a[c];
                            }
                        }
                    }
                    if self.needs(*x) {
                        acc(*x, dx);
                    }
                    if self.needs(*slope) {
                        let ss = self.shape(*slope);
                        acc(*slope, Tensor::from_vec(ss, da)?);
                    }
                }
                Op::Sigmoid { x } => {
                    let y = &node.value;
                    let mut dx = g.clone();
                    for (gv, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
                        *gv *= yv * (T::one() - yv);
                    }
                    acc(*x, dx);
                }
                Op::GlobalAvgPool { x } => {
                    let s = self.shape(*x);
                    let plane = s.spatial();
                    let denom = T::lit(plane as f64);
                    let mut dx = Tensor::zeros(s);
                    for (chunk, &gv) in dx.data_mut().chunks_mut(plane).zip(g.data()) {
                        let share = gv / denom;
                        chunk.iter_mut().for_each(|v| *v = share);
                    }
                    acc(*x, dx);
                }
                Op::Concat { inputs } => {
                    let mut start = 0;
                    for &v in inputs {
                        let c = self.shape(v).c;
                        if self.needs(v) {
                            acc(v, g.channel_slice(start, c)?);
                        }
                        start += c;
                    }
                }
                Op::Add { x, y } => {
                    if self.needs(*y) {
                        acc(*y, g.clone());
                    }
                    if self.needs(*x) {
                        acc(*x, g.clone());
                    }
                }
                Op::Mul { x, y } => {
                    let (xv, yv) = (self.value(*x), self.value(*y));
                    if self.needs(*x) {
                        let d = g.data().iter().zip(yv.data()).map(|(&a, &b)| a * b);
                        acc(*x, Tensor::from_vec(g.shape(), d.collect())?);
                    }
                    if self.needs(*y) {
                        let d = g.data().iter().zip(xv.data()).map(|(&a, &b)| a * b);
                        acc(*y, Tensor::from_vec(g.shape(), d.collect())?);
                    }
                }
                Op::BroadcastMul { x, w, mode } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let s = xv.shape();
                    let plane = s.spatial();
                    let wd = wv.data();
                    if self.needs(*x) {
                        let mut dx = g.clone();
                        for (i, chunk) in dx.data_mut().chunks_mut(plane).enumerate() {
                            match mode {
                                Broadcast::Pixel => {
                                    let n = i / s.c;
                                    let row = &wd[n * plane..(n + 1) * plane];
                                    chunk.iter_mut().zip(row).for_each(|(v, &k)| *v *= k);
                                }
                                Broadcast::Channel => {
                                    let k = wd[i];
                                    chunk.iter_mut().for_each(|v| *v *= k);
                                }
                            }
                        }
                        acc(*x, dx);
                    }
                    if self.needs(*w) {
                        let mut dw = Tensor::zeros(wv.shape());
                        for (i, (gc, xc)) in
                            g.data().chunks(plane).zip(xv.data().chunks(plane)).enumerate()
                        {
                            match mode {
                                Broadcast::Pixel => {
                                    let n = i / s.c;
                                    let row = &mut dw.data_mut()[n * plane..(n + 1) * plane];
                                    for ((d, &gv), &xi) in row.iter_mut().zip(gc).zip(xc) {
                                        *d += gv * xi;
                                    }
                                }
                                Broadcast::Channel => {
                                    dw.data_mut()[i] +=
                                        gc.iter().zip(xc).map(|(&gv, &xi)| gv * xi).sum::<T>();
                                }
                            }
                        }
                        acc(*w, dw);
                    }
                }
                Op::Sum { x } => {
                    let gv = g.item()?;
                    acc(*x, Tensor::full(self.shape(*x), gv));
                }
                Op::L2Loss { out, target } => {
                    let gv = g.item()?;
                    let ov = self.value(*out);
                    let tv = self.value(*target);
                    let scale = T::lit(2.0) * gv / T::lit(ov.shape().n as f64);
                    let diff: Vec<T> = ov
                        .data()
                        .iter()
                        .zip(tv.data())
                        .map(|(&a, &b)| scale * (a - b))
                        .collect();
                    if self.needs(*target) {
                        let neg = diff.iter().map(|&d| -d).collect();
                        acc(*target, Tensor::from_vec(ov.shape(), neg)?);
                    }
                    if self.needs(*out) {
                        acc(*out, Tensor::from_vec(ov.shape(), diff)?);
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}
