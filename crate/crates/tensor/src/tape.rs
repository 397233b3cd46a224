//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation on a [`Var`] evaluates eagerly and appends a node to its
//! [`Tape`]. Nodes are appended only after their inputs, so the tape is
//! always in topological order and [`Tape::backward`] is a single reverse
//! sweep.

use std::cell::RefCell;
use std::sync::Arc;

use crate::kernels::{self, ConvGeom};
use crate::{Result, Tensor, TensorError};

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Exp(usize),
    Ln(usize),
    Sum(usize),
    SumLast(usize),
    Reshape(usize),
    Concat(Vec<usize>),
    SwapLeading(usize),
    Conv1d {
        x: usize,
        k: usize,
        geom: ConvGeom,
    },
    InstanceNorm {
        x: usize,
        eps: f64,
    },
    Linear {
        x: usize,
        w: usize,
    },
    Normalize {
        x: usize,
        eps: f64,
    },
    BmmT {
        a: usize,
        b: usize,
        batch: usize,
        m: usize,
        p: usize,
        d: usize,
    },
    LogSumExp {
        x: usize,
        mask: Option<Arc<[bool]>>,
    },
    Gather {
        x: usize,
        indices: Arc<[usize]>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward/backward pass.
///
/// A tape is single-threaded by construction (interior mutability through
/// `RefCell`); independent training sessions each own their own tape.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({:?})", self.id, self.value())
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `var`, or `None` when `var` does not
    /// require gradients or does not influence the loss.
    pub fn get(&self, var: Var<'_>) -> Option<Tensor> {
        self.grads.get(var.id)?.as_ref().map(|g| {
            Tensor::new(self.shapes[var.id].clone(), g.clone())
                .expect("gradient shape matches node shape")
        })
    }

    /// Like [`Gradients::get`] but returns zeros for an absent gradient.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        self.get(var).unwrap_or_else(|| {
            Tensor::zeros(&self.shapes[var.id]).unwrap_or_else(|_| Tensor::scalar(0.0))
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that receives gradients.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives gradients.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Concatenates along the leading axis; trailing shapes must agree.
    pub fn concat<'t>(&'t self, vars: &[Var<'t>]) -> Result<Var<'t>> {
        let first = vars
            .first()
            .ok_or_else(|| TensorError::Dimension("concat of zero tensors".into()))?;
        let first_shape = first.shape();
        if first_shape.is_empty() {
            return Err(TensorError::Dimension("cannot concat scalars".into()));
        }
        let mut lead = 0;
        let mut data = Vec::new();
        let mut requires = false;
        for v in vars {
            self.same_tape(*v)?;
            let t = v.value();
            if t.shape()[1..] != first_shape[1..] || t.ndim() != first_shape.len() {
                return Err(TensorError::Dimension(format!(
                    "concat trailing shape mismatch {:?} vs {:?}",
                    first_shape,
                    t.shape()
                )));
            }
            lead += t.shape()[0];
            data.extend_from_slice(t.data());
            requires |= v.requires_grad();
        }
        let mut shape = first_shape.clone();
        shape[0] = lead;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(
            value,
            Op::Concat(vars.iter().map(|v| v.id).collect()),
            requires,
        ))
    }

    fn same_tape(&self, v: Var<'_>) -> Result<()> {
        if std::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(TensorError::Contract("variables from different tapes".into()))
        }
    }

    /// Reverse sweep from a scalar `loss`, seeding d(loss)/d(loss) = 1.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.same_tape(loss)?;
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let n = loss.id + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..n).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop_node(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (id, node) in nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[id] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], id: usize, contrib: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match grads[id].as_mut() {
        Some(acc) => acc.iter_mut().zip(contrib).for_each(|(a, c)| *a += c),
        None => grads[id] = Some(contrib),
    }
}

fn accumulate_with(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    id: usize,
    f: impl FnOnce() -> Vec<f64>,
) {
    if nodes[id].requires_grad {
        accumulate(nodes, grads, id, f());
    }
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let val = |id: usize| nodes[id].value.data();
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, g.to_vec());
            accumulate(nodes, grads, *b, g.to_vec());
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, g.to_vec());
            accumulate_with(nodes, grads, *b, || g.iter().map(|v| -v).collect());
        }
        Op::Mul(a, b) => {
            accumulate_with(nodes, grads, *a, || {
                g.iter().zip(val(*b)).map(|(g, y)| g * y).collect()
            });
            accumulate_with(nodes, grads, *b, || {
                g.iter().zip(val(*a)).map(|(g, x)| g * x).collect()
            });
        }
        Op::Scale(a, c) => accumulate(nodes, grads, *a, g.iter().map(|v| v * c).collect()),
        Op::Relu(a) => accumulate_with(nodes, grads, *a, || {
            g.iter()
                .zip(val(*a))
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect()
        }),
        Op::Sigmoid(a) => accumulate_with(nodes, grads, *a, || {
            g.iter()
                .zip(node.value.data())
                .map(|(g, y)| g * y * (1.0 - y))
                .collect()
        }),
        Op::Exp(a) => accumulate_with(nodes, grads, *a, || {
            g.iter().zip(node.value.data()).map(|(g, y)| g * y).collect()
        }),
        Op::Ln(a) => accumulate_with(nodes, grads, *a, || {
            g.iter().zip(val(*a)).map(|(g, x)| g / x).collect()
        }),
        Op::Sum(a) => accumulate(nodes, grads, *a, vec![g[0]; val(*a).len()]),
        Op::SumLast(a) => accumulate_with(nodes, grads, *a, || {
            let x = &nodes[*a].value;
            let last = *x.shape().last().unwrap_or(&1);
            g.iter().flat_map(|&gv| std::iter::repeat_n(gv, last)).collect()
        }),
        Op::Reshape(a) => accumulate(nodes, grads, *a, g.to_vec()),
        Op::Concat(parts) => {
            let mut offset = 0;
            for &p in parts {
                let len = val(p).len();
                accumulate(nodes, grads, p, g[offset..offset + len].to_vec());
                offset += len;
            }
        }
        Op::SwapLeading(a) => accumulate_with(nodes, grads, *a, || {
            // node shape is [b, a, rest]; swap back to [a, b, rest]
            let s = node.value.shape();
            swap_leading(g, s[0], s[1], s[2..].iter().product())
        }),
        Op::Conv1d { x, k, geom } => {
            let (gx, gk) = geom.backward(
                val(*x),
                val(*k),
                g,
                nodes[*x].requires_grad,
                nodes[*k].requires_grad,
            );
            if let Some(gx) = gx {
                accumulate(nodes, grads, *x, gx);
            }
            if let Some(gk) = gk {
                accumulate(nodes, grads, *k, gk);
            }
        }
        Op::InstanceNorm { x, eps } => accumulate_with(nodes, grads, *x, || {
            let len = *nodes[*x].value.shape().last().unwrap_or(&1);
            kernels::instance_norm_backward(val(*x), node.value.data(), g, len, *eps)
        }),
        Op::Linear { x, w } => {
            let wt = &nodes[*w].value;
            let (out_dim, in_dim) = (wt.shape()[0], wt.shape()[1]);
            let rows = val(*x).len() / in_dim;
            accumulate_with(nodes, grads, *x, || {
                let mut gx = vec![0.0; rows * in_dim];
                kernels::gemm(rows, out_dim, in_dim, g, false, wt.data(), false, 0.0, &mut gx);
                gx
            });
            accumulate_with(nodes, grads, *w, || {
                let mut gw = vec![0.0; out_dim * in_dim];
                kernels::gemm(out_dim, rows, in_dim, g, true, val(*x), false, 0.0, &mut gw);
                gw
            });
        }
        Op::Normalize { x, eps } => accumulate_with(nodes, grads, *x, || {
            let xv = val(*x);
            let y = node.value.data();
            let d = *nodes[*x].value.shape().last().unwrap_or(&1);
            let mut gx = vec![0.0; xv.len()];
            for (((xr, yr), gr), out) in xv
                .chunks_exact(d)
                .zip(y.chunks_exact(d))
                .zip(g.chunks_exact(d))
                .zip(gx.chunks_exact_mut(d))
            {
                let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > *eps {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &gv), &yv) in out.iter_mut().zip(gr).zip(yr) {
                        *o = (gv - yv * dot) / norm;
                    }
                } else {
                    for (o, &gv) in out.iter_mut().zip(gr) {
                        *o = gv / eps;
                    }
                }
            }
            gx
        }),
        Op::BmmT {
            a,
            b,
            batch,
            m,
            p,
            d,
        } => {
            let (batch, m, p, d) = (*batch, *m, *p, *d);
            accumulate_with(nodes, grads, *a, || {
                let bv = val(*b);
                let mut ga = vec![0.0; batch * m * d];
                for i in 0..batch {
                    kernels::gemm(
                        m,
                        p,
                        d,
                        &g[i * m * p..][..m * p],
                        false,
                        &bv[i * p * d..][..p * d],
                        false,
                        0.0,
                        &mut ga[i * m * d..][..m * d],
                    );
                }
                ga
            });
            accumulate_with(nodes, grads, *b, || {
                let av = val(*a);
                let mut gb = vec![0.0; batch * p * d];
                for i in 0..batch {
                    kernels::gemm(
                        p,
                        m,
                        d,
                        &g[i * m * p..][..m * p],
                        true,
                        &av[i * m * d..][..m * d],
                        false,
                        0.0,
                        &mut gb[i * p * d..][..p * d],
                    );
                }
                gb
            });
        }
        Op::LogSumExp { x, mask } => accumulate_with(nodes, grads, *x, || {
            let xv = val(*x);
            let last = *nodes[*x].value.shape().last().unwrap_or(&1);
            let out = node.value.data();
            let mut gx = vec![0.0; xv.len()];
            for (r, (row, grow)) in xv.chunks_exact(last).zip(gx.chunks_exact_mut(last)).enumerate() {
                for (i, (&v, o)) in row.iter().zip(grow.iter_mut()).enumerate() {
                    let keep = mask.as_ref().is_none_or(|m| m[r * last + i]);
                    if keep {
                        *o = g[r] * (v - out[r]).exp();
                    }
                }
            }
            gx
        }),
        Op::Gather { x, indices } => accumulate_with(nodes, grads, *x, || {
            let mut gx = vec![0.0; val(*x).len()];
            for (&i, &gv) in indices.iter().zip(g) {
                gx[i] += gv;
            }
            gx
        }),
    }
}

fn swap_leading(data: &[f64], a: usize, b: usize, inner: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for i in 0..a {
        for j in 0..b {
            out[(j * a + i) * inner..][..inner]
                .copy_from_slice(&data[(i * b + j) * inner..][..inner]);
        }
    }
    out
}

fn reduced_shape(shape: &[usize]) -> Vec<usize> {
    match shape.split_last() {
        Some((_, rest)) => rest.to_vec(),
        None => Vec::new(),
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires(self.id)
    }

    fn record(&self, value: Tensor, op: Op, requires: bool) -> Var<'t> {
        self.tape.push(value, op, requires)
    }

    fn binary(
        self,
        rhs: Var<'t>,
        op: fn(usize, usize) -> Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        self.tape.same_tape(rhs)?;
        let value = self.value().zip_map(&rhs.value(), f)?;
        let requires = self.requires_grad() || rhs.requires_grad();
        Ok(self.record(value, op(self.id, rhs.id), requires))
    }

    fn unary(self, op: fn(usize) -> Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.value().map(f);
        self.record(value, op(self.id), self.requires_grad())
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Op::Add, |a, b| a + b)
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Op::Sub, |a, b| a - b)
    }

    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Op::Mul, |a, b| a * b)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let value = self.value().map(|v| v * c);
        self.record(value, Op::Scale(self.id, c), self.requires_grad())
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu, |v| v.max(0.0))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Op::Sigmoid, kernels::sigmoid)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp, f64::exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(Op::Ln, f64::ln)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(self) -> Var<'t> {
        let value = Tensor::scalar(self.value().data().iter().sum());
        self.record(value, Op::Sum(self.id), self.requires_grad())
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Sum over the last axis.
    pub fn sum_last(self) -> Var<'t> {
        let x = self.value();
        let last = *x.shape().last().unwrap_or(&1);
        let data: Vec<f64> = x.data().chunks_exact(last).map(|r| r.iter().sum()).collect();
        let value = Tensor::new(reduced_shape(x.shape()), data).expect("reduced shape");
        self.record(value, Op::SumLast(self.id), self.requires_grad())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value().reshape(shape)?;
        Ok(self.record(value, Op::Reshape(self.id), self.requires_grad()))
    }

    /// `[a, b, ...] -> [b, a, ...]`.
    pub fn swap_leading(self) -> Result<Var<'t>> {
        let x = self.value();
        let s = x.shape();
        if s.len() < 2 {
            return Err(TensorError::Dimension(format!(
                "swap_leading needs rank >= 2, got {s:?}"
            )));
        }
        let inner = s[2..].iter().product();
        let data = swap_leading(x.data(), s[0], s[1], inner);
        let mut shape = s.to_vec();
        shape.swap(0, 1);
        let value = Tensor::new(shape, data)?;
        Ok(self.record(value, Op::SwapLeading(self.id), self.requires_grad()))
    }

    /// Bias-free 1-D convolution with zero padding. Input `[C_in, L]` or
    /// `[B, C_in, L]`; kernel `[C_out, C_in, W]`.
    pub fn conv1d(self, kernel: Var<'t>, stride: usize, pad: usize) -> Result<Var<'t>> {
        self.tape.same_tape(kernel)?;
        let x = self.value();
        let k = kernel.value();
        let (batch, c_in, len, batched) = match *x.shape() {
            [c, l] => (1, c, l, false),
            [b, c, l] => (b, c, l, true),
            ref s => {
                return Err(TensorError::Dimension(format!(
                    "conv1d input must be [C, L] or [B, C, L], got {s:?}"
                )))
            }
        };
        let [c_out, k_in, width] = *k.shape() else {
            return Err(TensorError::Dimension(format!(
                "conv1d kernel must be [C_out, C_in, W], got {:?}",
                k.shape()
            )));
        };
        if k_in != c_in {
            return Err(TensorError::Dimension(format!(
                "conv1d channel mismatch: input has {c_in}, kernel expects {k_in}"
            )));
        }
        if stride == 0 {
            return Err(TensorError::Contract("conv1d stride must be positive".into()));
        }
        if len + 2 * pad < width {
            return Err(TensorError::Dimension(format!(
                "conv1d kernel width {width} exceeds padded length {}",
                len + 2 * pad
            )));
        }
        let geom = ConvGeom {
            batch,
            c_in,
            len,
            c_out,
            width,
            stride,
            pad,
            len_out: (len + 2 * pad - width) / stride + 1,
        };
        let data = geom.forward(x.data(), k.data());
        let shape = if batched {
            vec![batch, c_out, geom.len_out]
        } else {
            vec![c_out, geom.len_out]
        };
        let value = Tensor::new(shape, data)?;
        let requires = self.requires_grad() || kernel.requires_grad();
        Ok(self.record(
            value,
            Op::Conv1d {
                x: self.id,
                k: kernel.id,
                geom,
            },
            requires,
        ))
    }

    /// Standardizes every row along the last axis (no affine terms).
    pub fn instance_norm(self, eps: f64) -> Var<'t> {
        let x = self.value();
        let len = *x.shape().last().unwrap_or(&1);
        let data = kernels::instance_norm_forward(x.data(), len, eps);
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.record(value, Op::InstanceNorm { x: self.id, eps }, self.requires_grad())
    }

    /// `x · Wᵀ` over the last axis; `W` is `[out, in]`, no bias.
    pub fn linear(self, weight: Var<'t>) -> Result<Var<'t>> {
        self.tape.same_tape(weight)?;
        let x = self.value();
        let w = weight.value();
        let [out_dim, in_dim] = *w.shape() else {
            return Err(TensorError::Dimension(format!(
                "linear weight must be [out, in], got {:?}",
                w.shape()
            )));
        };
        if x.shape().last() != Some(&in_dim) {
            return Err(TensorError::Dimension(format!(
                "linear expects last axis {in_dim}, got shape {:?}",
                x.shape()
            )));
        }
        let rows = x.numel() / in_dim;
        let mut data = vec![0.0; rows * out_dim];
        kernels::gemm(rows, in_dim, out_dim, x.data(), false, w.data(), true, 0.0, &mut data);
        let mut shape = x.shape().to_vec();
        *shape.last_mut().expect("non-scalar") = out_dim;
        let value = Tensor::new(shape, data)?;
        let requires = self.requires_grad() || weight.requires_grad();
        Ok(self.record(
            value,
            Op::Linear {
                x: self.id,
                w: weight.id,
            },
            requires,
        ))
    }

    /// Divides each last-axis row by `max(‖row‖, eps)`.
    pub fn normalize(self, eps: f64) -> Var<'t> {
        let x = self.value();
        let d = *x.shape().last().unwrap_or(&1);
        let mut data = x.to_vec();
        for row in data.chunks_exact_mut(d) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(eps);
            row.iter_mut().for_each(|v| *v /= norm);
        }
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.record(value, Op::Normalize { x: self.id, eps }, self.requires_grad())
    }

    /// Batched `A · Bᵀ`: `[.., M, D] × [.., P, D] -> [.., M, P]`.
    pub fn bmm_t(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.tape.same_tape(rhs)?;
        let a = self.value();
        let b = rhs.value();
        let (sa, sb) = (a.shape(), b.shape());
        if sa.len() < 2 || sb.len() != sa.len() || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(TensorError::Dimension(format!(
                "bmm_t shape mismatch {sa:?} vs {sb:?}"
            )));
        }
        let r = sa.len();
        let (m, d) = (sa[r - 2], sa[r - 1]);
        let (p, d2) = (sb[r - 2], sb[r - 1]);
        if d != d2 {
            return Err(TensorError::Dimension(format!(
                "bmm_t inner dimension mismatch {d} vs {d2}"
            )));
        }
        let batch: usize = sa[..r - 2].iter().product();
        let mut data = vec![0.0; batch * m * p];
        for i in 0..batch {
            kernels::gemm(
                m,
                d,
                p,
                &a.data()[i * m * d..][..m * d],
                false,
                &b.data()[i * p * d..][..p * d],
                true,
                0.0,
                &mut data[i * m * p..][..m * p],
            );
        }
        let mut shape = sa[..r - 2].to_vec();
        shape.extend([m, p]);
        let value = Tensor::new(shape, data)?;
        let requires = self.requires_grad() || rhs.requires_grad();
        Ok(self.record(
            value,
            Op::BmmT {
                a: self.id,
                b: rhs.id,
                batch,
                m,
                p,
                d,
            },
            requires,
        ))
    }

    /// Log-sum-exp over the last axis, computed with max subtraction.
    /// `mask` (same length as the input) selects the entries included; every
    /// row must include at least one entry.
    pub fn logsumexp(self, mask: Option<Arc<[bool]>>) -> Result<Var<'t>> {
        let x = self.value();
        if let Some(m) = &mask {
            if m.len() != x.numel() {
                return Err(TensorError::Dimension(format!(
                    "logsumexp mask has {} entries for {} values",
                    m.len(),
                    x.numel()
                )));
            }
        }
        let last = *x.shape().last().unwrap_or(&1);
        let mut data = Vec::with_capacity(x.numel() / last);
        for (r, row) in x.data().chunks_exact(last).enumerate() {
            let row_mask = mask.as_ref().map(|m| &m[r * last..(r + 1) * last]);
            let v = kernels::logsumexp_row(row, row_mask).ok_or_else(|| {
                TensorError::Contract(format!("logsumexp row {r} has no included entries"))
            })?;
            data.push(v);
        }
        let value = Tensor::new(reduced_shape(x.shape()), data)?;
        Ok(self.record(
            value,
            Op::LogSumExp { x: self.id, mask },
            self.requires_grad(),
        ))
    }

    /// Picks flat elements `indices` into a tensor of `shape`.
    pub fn gather(self, indices: Arc<[usize]>, shape: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.numel()) {
            return Err(TensorError::Index(format!(
                "gather index {bad} out of range for {} elements",
                x.numel()
            )));
        }
        let data: Vec<f64> = indices.iter().map(|&i| x.data()[i]).collect();
        let value = Tensor::new(shape.to_vec(), data)?;
        Ok(self.record(
            value,
            Op::Gather {
                x: self.id,
                indices,
            },
            self.requires_grad(),
        ))
    }

    /// Sub-tensor `index` along the leading axis.
    pub fn select_leading(self, index: usize) -> Result<Var<'t>> {
        let shape = self.shape();
        let Some((&lead, rest)) = shape.split_first() else {
            return Err(TensorError::Index("cannot index a scalar".into()));
        };
        if index >= lead {
            return Err(TensorError::Index(format!(
                "index {index} out of range for leading extent {lead}"
            )));
        }
        let inner: usize = rest.iter().product();
        let indices: Arc<[usize]> = (index * inner..(index + 1) * inner).collect();
        self.gather(indices, rest)
    }
}
