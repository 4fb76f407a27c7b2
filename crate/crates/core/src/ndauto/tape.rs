use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

use super::conv::{self, Padding};
use super::pool::{self, PoolKind};
use super::tensor::Tensor;
use super::upsample;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Backward rule of a user-supplied op: receives the input values, the
/// output value and the output gradient, returns one gradient per input.
pub type CustomBackward<T> = Box<dyn Fn(&[&Tensor<T>], &Tensor<T>, &[T]) -> Vec<Vec<T>>>;

pub(crate) enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: Padding,
    },
    Pool {
        input: Var,
        kind: PoolKind,
        size: usize,
        stride: usize,
        argmax: Vec<usize>,
    },
    Upsample(Var),
    Affine {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    Sigmoid(Var),
    Log(Var),
    Clamp {
        input: Var,
        lo: T,
        hi: T,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleShift {
        input: Var,
        scale: T,
    },
    Square(Var),
    Sum(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Custom {
        inputs: Vec<Var>,
        backward: CustomBackward<T>,
    },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernel, bias, .. } => {
                let mut v = vec![*input, *kernel];
                v.extend(bias.iter().copied());
                v
            }
            Op::Pool { input, .. }
            | Op::Upsample(input)
            | Op::Relu(input)
            | Op::LeakyRelu(input, _)
            | Op::Sigmoid(input)
            | Op::Log(input)
            | Op::Clamp { input, .. }
            | Op::ScaleShift { input, .. }
            | Op::Square(input)
            | Op::Sum(input)
            | Op::Reshape(input) => vec![*input],
            Op::Affine { input, weight, bias } => vec![*input, *weight, *bias],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Concat(vs) => vs.clone(),
            Op::Custom { inputs, .. } => inputs.clone(),
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    name: &'static str,
    requires_grad: bool,
    needs_grad: bool,
}

/// Records operations in execution order and replays them in reverse to
/// accumulate gradients.
///
/// One tape per thread and per training step. Leaves created with
/// `requires_grad = false` still pass gradients through to whatever they
/// feed, but never receive one themselves.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    backward_done: bool,
    check_finite: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
            check_finite: cfg!(debug_assertions),
        }
    }

    /// Enables or disables the per-op finiteness scan (on by default in
    /// debug builds).
    pub fn set_check_finite(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn reset(&mut self) {
        self.nodes.clear();
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            name: "leaf",
            requires_grad,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    /// Copies `v` into a fresh constant leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    /// Gradient of the last `backward` call w.r.t. a `requires_grad` leaf.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Ordered op names as recorded; leaves appear as `"leaf"`.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.name).collect()
    }

    pub(crate) fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if self.check_finite && !value.is_finite() {
            return Err(Error::NonFinite { op: name.to_string() });
        }
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            name,
            requires_grad: false,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Registers an op whose backward rule is supplied by the caller.
    pub fn custom(
        &mut self,
        name: &'static str,
        inputs: &[Var],
        value: Tensor<T>,
        backward: CustomBackward<T>,
    ) -> Result<Var> {
        self.push(
            name,
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                backward,
            },
        )
    }

    fn same_dims(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.dims(a) != self.dims(b) {
            return shape_err(
                op,
                format!("operands {:?} and {:?} differ", self.dims(a), self.dims(b)),
            );
        }
        Ok(())
    }

    fn unary(
        &mut self,
        name: &'static str,
        x: Var,
        f: impl Fn(T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let value = self.value(x).map(f);
        self.push(name, value, op)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        self.same_dims(name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_parts(va.dims().to_vec(), data);
        self.push(name, value, op)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary("relu", x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Result<Var> {
        self.unary(
            "leaky_relu",
            x,
            |v| if v > T::zero() { v } else { v * slope },
            Op::LeakyRelu(x, slope),
        )
    }

    /// Logistic function, output kept strictly inside (0, 1) even where the
    /// exact value rounds to 0 or 1.
    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, sigmoid_open, Op::Sigmoid(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary("log", x, |v| v.ln(), Op::Log(x))
    }

    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Result<Var> {
        self.unary("clamp", x, |v| v.max(lo).min(hi), Op::Clamp { input: x, lo, hi })
    }

    /// `scale * x + shift`
    pub fn scale_shift(&mut self, x: Var, scale: T, shift: T) -> Result<Var> {
        self.unary(
            "scale_shift",
            x,
            |v| scale * v + shift,
            Op::ScaleShift { input: x, scale },
        )
    }

    pub fn scale(&mut self, x: Var, scale: T) -> Result<Var> {
        self.scale_shift(x, scale, T::zero())
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary("square", x, |v| v * v, Op::Square(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = T::from_usize_lossy(self.value(x).len());
        let s = self.sum(x)?;
        self.scale(s, T::one() / n)
    }

    pub fn reshape(&mut self, x: Var, dims: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(dims)?;
        self.push("reshape", value, Op::Reshape(x))
    }

    /// `[N, ...] -> [N, prod(...)]`
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let d = self.dims(x);
        let n = d[0];
        let rest = d[1..].iter().product::<usize>().max(1);
        self.reshape(x, &[n, rest])
    }

    /// Concatenates NCHW tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return shape_err("concat", "nothing to concatenate");
        }
        let first = self.dims(parts[0]).to_vec();
        if first.len() != 4 {
            return shape_err("concat", format!("expected NCHW, got {first:?}"));
        }
        let mut channels = 0;
        for &p in parts {
            let d = self.dims(p);
            if d.len() != 4 || d[0] != first[0] || d[2] != first[2] || d[3] != first[3] {
                return shape_err(
                    "concat",
                    format!("operand {:?} incompatible with {:?} (N,H,W must agree)", d, first),
                );
            }
            channels += d[1];
        }
        let (n, plane) = (first[0], first[2] * first[3]);
        let mut data = Vec::with_capacity(n * channels * plane);
        for b in 0..n {
            for &p in parts {
                let v = self.value(p);
                let c = v.dims()[1];
                data.extend_from_slice(&v.data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let value = Tensor::from_parts(vec![n, channels, first[2], first[3]], data);
        self.push("concat", value, Op::Concat(parts.to_vec()))
    }

    /// `input · weightᵀ + bias` for `input: [N, D]`, `weight: [M, D]`, `bias: [M]`.
    pub fn affine(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (x, w, b) = (self.value(input), self.value(weight), self.value(bias));
        if x.rank() != 2 || w.rank() != 2 || b.rank() != 1 {
            return shape_err(
                "affine",
                format!(
                    "expected input [N,D], weight [M,D], bias [M]; got {:?}, {:?}, {:?}",
                    x.dims(),
                    w.dims(),
                    b.dims()
                ),
            );
        }
        let (n, d) = (x.dims()[0], x.dims()[1]);
        let m = w.dims()[0];
        if w.dims()[1] != d {
            return shape_err(
                "affine",
                format!("input feature dim D={d} but weight dim 1 is {}", w.dims()[1]),
            );
        }
        if b.dims()[0] != m {
            return shape_err("affine", format!("bias length {} != output dim M={m}", b.dims()[0]));
        }
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(b.data());
        }
        T::gemm(n, d, m, T::one(), x.data(), (d as isize, 1), w.data(), (1, d as isize), T::one(), &mut out, (m as isize, 1));
        let value = Tensor::from_parts(vec![n, m], out);
        self.push("affine", value, Op::Affine { input, weight, bias })
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: Padding,
    ) -> Result<Var> {
        let value = conv::forward(
            self.value(input),
            self.value(kernel),
            bias.map(|b| self.value(b)),
            stride,
            padding,
        )?;
        self.push(
            "conv2d",
            value,
            Op::Conv2d { input, kernel, bias, stride, padding },
        )
    }

    pub fn pool2d(&mut self, input: Var, kind: PoolKind, size: usize, stride: usize) -> Result<Var> {
        let (value, argmax) = pool::forward(self.value(input), kind, size, stride)?;
        let name = match kind {
            PoolKind::Max => "max_pool2d",
            PoolKind::Avg => "avg_pool2d",
        };
        self.push(name, value, Op::Pool { input, kind, size, stride, argmax })
    }

    pub fn upsample_bilinear2x(&mut self, input: Var) -> Result<Var> {
        let value = upsample::forward(self.value(input))?;
        self.push("upsample_bilinear2x", value, Op::Upsample(input))
    }

    /// Reverse-mode sweep from a single-element `loss`.
    ///
    /// Populates [`grad`](Self::grad) for every `requires_grad` leaf (zeros
    /// when the loss does not depend on it). May be called once per tape
    /// until [`reset`](Self::reset).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Backward(
                "backward already ran on this tape; reset it first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Backward(format!(
                "loss must be a scalar, got dims {:?}",
                self.dims(loss)
            )));
        }
        if !self.nodes.iter().any(|n| n.requires_grad) {
            return Err(Error::Backward("no leaf requires a gradient".into()));
        }
        self.backward_done = true;

        let mut bufs: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        bufs[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = bufs[i].take() else { continue };
            self.backward_node(i, &g, &mut bufs);
        }

        self.grads = self
            .nodes
            .iter()
            .zip(bufs)
            .map(|(node, buf)| {
                node.requires_grad.then(|| {
                    let dims = node.value.dims().to_vec();
                    match buf {
                        Some(g) => Tensor::from_parts(dims, g),
                        None => Tensor::zeros(&dims),
                    }
                })
            })
            .collect();
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn backward_node(&self, i: usize, g: &[T], bufs: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, stride, padding } => {
                let grads = conv::backward(
                    self.value(*input),
                    self.value(*kernel),
                    g,
                    out.dims(),
                    *stride,
                    *padding,
                    self.wants(*input),
                    self.wants(*kernel),
                );
                if let Some(gx) = grads.input {
                    accumulate(bufs, *input, gx);
                }
                if let Some(gk) = grads.kernel {
                    accumulate(bufs, *kernel, gk);
                }
                if let Some(b) = bias {
                    if self.wants(*b) {
                        accumulate(bufs, *b, conv::bias_grad(g, out.dims()));
                    }
                }
            }
            Op::Pool { input, kind, size, stride, argmax } => {
                let gx = pool::backward(self.value(*input).dims(), *kind, *size, *stride, argmax, g);
                accumulate(bufs, *input, gx);
            }
            Op::Upsample(input) => {
                accumulate(bufs, *input, upsample::backward(self.value(*input).dims(), g));
            }
            Op::Affine { input, weight, bias } => {
                let (x, w) = (self.value(*input), self.value(*weight));
                let (n, d) = (x.dims()[0], x.dims()[1]);
                let m = w.dims()[0];
                if self.wants(*input) {
                    let mut gx = vec![T::zero(); n * d];
                    T::gemm(n, m, d, T::one(), g, (m as isize, 1), w.data(), (d as isize, 1), T::zero(), &mut gx, (d as isize, 1));
                    accumulate(bufs, *input, gx);
                }
                if self.wants(*weight) {
                    let mut gw = vec![T::zero(); m * d];
                    T::gemm(m, n, d, T::one(), g, (1, m as isize), x.data(), (d as isize, 1), T::zero(), &mut gw, (d as isize, 1));
                    accumulate(bufs, *weight, gw);
                }
                if self.wants(*bias) {
                    let mut gb = vec![T::zero(); m];
                    for row in g.chunks_exact(m) {
                        for (acc, &v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    accumulate(bufs, *bias, gb);
                }
            }
            Op::Relu(x) => {
                let gx = zip_map(g, self.value(*x).data(), |g, v| if v > T::zero() { g } else { T::zero() });
                accumulate(bufs, *x, gx);
            }
            Op::LeakyRelu(x, slope) => {
                let s = *slope;
                let gx = zip_map(g, self.value(*x).data(), |g, v| if v > T::zero() { g } else { g * s });
                accumulate(bufs, *x, gx);
            }
            Op::Sigmoid(x) => {
                let gx = zip_map(g, out.data(), |g, y| g * y * (T::one() - y));
                accumulate(bufs, *x, gx);
            }
            Op::Log(x) => {
                let gx = zip_map(g, self.value(*x).data(), |g, v| g / v);
                accumulate(bufs, *x, gx);
            }
            Op::Clamp { input, lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                let gx = zip_map(g, self.value(*input).data(), |g, v| {
                    if v >= lo && v <= hi {
                        g
                    } else {
                        T::zero()
                    }
                });
                accumulate(bufs, *input, gx);
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(bufs, *a, g.to_vec());
                }
                if self.wants(*b) {
                    accumulate(bufs, *b, g.to_vec());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    accumulate(bufs, *a, g.to_vec());
                }
                if self.wants(*b) {
                    accumulate(bufs, *b, g.iter().map(|&v| -v).collect());
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    accumulate(bufs, *a, zip_map(g, self.value(*b).data(), |g, v| g * v));
                }
                if self.wants(*b) {
                    accumulate(bufs, *b, zip_map(g, self.value(*a).data(), |g, v| g * v));
                }
            }
            Op::ScaleShift { input, scale } => {
                let s = *scale;
                accumulate(bufs, *input, g.iter().map(|&v| v * s).collect());
            }
            Op::Square(x) => {
                let two = T::lit(2.0);
                let gx = zip_map(g, self.value(*x).data(), |g, v| two * v * g);
                accumulate(bufs, *x, gx);
            }
            Op::Sum(x) => {
                accumulate(bufs, *x, vec![g[0]; self.value(*x).len()]);
            }
            Op::Reshape(x) => accumulate(bufs, *x, g.to_vec()),
            Op::Concat(parts) => {
                let d = out.dims();
                let (n, total, plane) = (d[0], d[1], d[2] * d[3]);
                let mut offset = 0;
                for &p in parts {
                    let c = self.dims(p)[1];
                    if self.wants(p) {
                        let mut gp = Vec::with_capacity(n * c * plane);
                        for b in 0..n {
                            let start = (b * total + offset) * plane;
                            gp.extend_from_slice(&g[start..start + c * plane]);
                        }
                        accumulate(bufs, p, gp);
                    }
                    offset += c;
                }
            }
            Op::Custom { inputs, backward } => {
                let values: Vec<&Tensor<T>> = inputs.iter().map(|v| self.value(*v)).collect();
                let grads = backward(&values, out, g);
                for (v, gv) in inputs.iter().zip(grads) {
                    if self.wants(*v) {
                        accumulate(bufs, *v, gv);
                    }
                }
            }
        }
    }
}

/// Logistic function clamped to the open unit interval of `T`.
pub fn sigmoid_open<T: Scalar>(x: T) -> T {
    let y = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    let hi = T::one() - T::epsilon() / T::lit(2.0);
    y.max(T::min_positive_value()).min(hi)
}

fn zip_map<T: Scalar>(g: &[T], v: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    g.iter().zip(v).map(|(&g, &v)| f(g, v)).collect()
}

fn accumulate<T: Scalar>(bufs: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
    match &mut bufs[v.0] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
