use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::kernels::{self, ConvGeometry};
use super::{ParamId, ParamStore, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Exp(Var),
    Relu(Var),
    LeakyRelu(Var, T),
    Reshape(Var),
    Narrow { x: Var, start: usize, len: usize },
    ExpandRows { x: Var, times: usize },
    SumLast(Var),
    SumAll(Var),
    MeanAll(Var),
    Cosine(Var, Var),
    Linear { x: Var, w: Var, b: Var },
    Conv { x: Var, w: Var, b: Var, geom: ConvGeometry },
    ConvTranspose { x: Var, w: Var, b: Var, geom: ConvGeometry },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Input | Leaf | Param(_) => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Cosine(a, b) => vec![*a, *b],
            Scale(x, _)
            | AddScalar(x)
            | Exp(x)
            | Relu(x)
            | LeakyRelu(x, _)
            | Reshape(x)
            | SumLast(x)
            | SumAll(x)
            | MeanAll(x) => vec![*x],
            Narrow { x, .. } | ExpandRows { x, .. } => vec![*x],
            Linear { x, w, b } | Conv { x, w, b, .. } | ConvTranspose { x, w, b, .. } => {
                vec![*x, *w, *b]
            }
        }
    }
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Tape of recorded operations. Nodes are appended in evaluation order, so
/// reverse index order is a valid reverse topological order.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let requires_grad = match op {
            Op::Input => false,
            Op::Leaf | Op::Param(_) => true,
            _ => op.inputs().iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node { value: Arc::new(value), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Input)
    }

    /// Free variable whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.nodes.push(Node { value: store.shared_value(id), op: Op::Param(id), requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(op, format!("operands {:?} and {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_map(&self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        self.same_shape(op, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(va.shape().to_vec(), data)
    }

    fn map(&self, x: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let v = self.value(x);
        Tensor::from_fn(v.shape(), |i| f(v.data()[i]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_map("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_map("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_map("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let c = T::of(c);
        let t = self.map(x, |v| v * c);
        self.push(t, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let c = T::of(c);
        let t = self.map(x, |v| v + c);
        self.push(t, Op::AddScalar(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let t = self.map(x, |v| v.exp());
        self.push(t, Op::Exp(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.map(x, |v| v.max(T::zero()));
        self.push(t, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::of(slope);
        let t = self.map(x, |v| if v > T::zero() { v } else { v * s });
        self.push(t, Op::LeakyRelu(x, s))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Slice `[start, start + len)` of the last axis.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let last = *shape.last().ok_or_else(|| Error::dim("narrow", "scalar operand"))?;
        if len == 0 || start + len > last {
            return Err(Error::dim("narrow", format!("range {start}..{} outside last axis of {shape:?}", start + len)));
        }
        let v = self.value(x);
        let data = v.data().chunks(last).flat_map(|row| row[start..start + len].iter().copied()).collect();
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = len;
        let t = Tensor::new(out_shape, data)?;
        Ok(self.push(t, Op::Narrow { x, start, len }))
    }

    /// Repeat every slice along the leading axis `times` times in place:
    /// `[n, ..] -> [n * times, ..]`.
    pub fn expand_rows(&mut self, x: Var, times: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.is_empty() || times == 0 {
            return Err(Error::dim("expand_rows", format!("operand {shape:?}, times {times}")));
        }
        let row: usize = shape[1..].iter().product();
        let v = self.value(x);
        let mut data = Vec::with_capacity(v.numel() * times);
        for r in v.data().chunks(row) {
            for _ in 0..times {
                data.extend_from_slice(r);
            }
        }
        let mut out_shape = shape;
        out_shape[0] *= times;
        let t = Tensor::new(out_shape, data)?;
        Ok(self.push(t, Op::ExpandRows { x, times }))
    }

    /// Sum over the last axis.
    pub fn sum_last(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let last = *shape.last().ok_or_else(|| Error::dim("sum_last", "scalar operand"))?;
        let v = self.value(x);
        let data = v.data().chunks(last).map(|r| r.iter().fold(T::zero(), |a, b| a + *b)).collect();
        let t = Tensor::new(shape[..shape.len() - 1].to_vec(), data)?;
        Ok(self.push(t, Op::SumLast(x)))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |a, b| a + *b);
        self.push(Tensor::scalar(s), Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().fold(T::zero(), |a, b| a + *b) / T::of(v.numel() as f64);
        self.push(Tensor::scalar(s), Op::MeanAll(x))
    }

    /// Row-wise cosine similarity of two `[n, d]` operands, giving `[n]`.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("cosine", a, b)?;
        let shape = self.shape(a).to_vec();
        if shape.len() != 2 {
            return Err(Error::dim("cosine", format!("expected [n, d], got {shape:?}")));
        }
        let d = shape[1];
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(shape[0]);
        for (row, (ra, rb)) in va.chunks(d).zip(vb.chunks(d)).enumerate() {
            let (dot, na, nb) = dot_norms(ra, rb);
            if na == T::zero() || nb == T::zero() {
                return Err(Error::Degenerate(format!("zero-norm vector in cosine row {row}")));
            }
            out.push(dot / (na * nb));
        }
        let t = Tensor::new(vec![shape[0]], out)?;
        Ok(self.push(t, Op::Cosine(a, b)))
    }

    /// `y[b, o] = sum_i x[b, i] * w[o, i] + bias[o]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs != [ws[0]] || xs[1] != ws[1] {
            return Err(Error::dim("linear", format!("input {xs:?}, weight {ws:?}, bias {bs:?}")));
        }
        let (batch, inp, out) = (xs[0], xs[1], ws[0]);
        let mut y = vec![T::zero(); batch * out];
        for row in y.chunks_mut(out) {
            row.copy_from_slice(self.value(b).data());
        }
        T::gemm(batch, inp, out, T::one(), self.value(x).data(), false, self.value(w).data(), true, T::one(), &mut y);
        let t = Tensor::new(vec![batch, out], y)?;
        Ok(self.push(t, Op::Linear { x, w, b }))
    }

    /// Resolve the shared geometry of a (transposed) convolution.
    /// `x` is `[batch, c, spatial..]`, `w` is `[narrow, wide, kernel..]`.
    fn conv_geometry(
        &self,
        op: &'static str,
        x: Var,
        w: Var,
        b: Var,
        dims: usize,
        transposed: bool,
    ) -> Result<(usize, ConvGeometry)> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        let bad = || Error::dim(op, format!("input {xs:?}, kernel {ws:?}, bias {bs:?}"));
        if xs.len() != dims + 2 || ws.len() != dims + 2 {
            return Err(bad());
        }
        let pad = |s: &[usize]| {
            let mut a = [1usize; 3];
            a[3 - dims..].copy_from_slice(s);
            a
        };
        let kernel = pad(&ws[2..]);
        let spatial = pad(&xs[2..]);
        let (narrow_c, wide_c) = (ws[0], ws[1]);
        let geom = if transposed {
            if xs[1] != narrow_c || bs != [wide_c] {
                return Err(bad());
            }
            ConvGeometry {
                wide_channels: wide_c,
                narrow_channels: narrow_c,
                wide: [0, 1, 2].map(|i| spatial[i] + kernel[i] - 1),
                kernel,
            }
        } else {
            if xs[1] != wide_c || bs != [narrow_c] {
                return Err(bad());
            }
            if (0..3).any(|i| spatial[i] < kernel[i]) {
                return Err(Error::dim(op, format!("kernel {:?} larger than input {:?}", &ws[2..], &xs[2..])));
            }
            ConvGeometry { wide_channels: wide_c, narrow_channels: narrow_c, wide: spatial, kernel }
        };
        Ok((xs[0], geom))
    }

    fn conv_nd(&mut self, op: &'static str, x: Var, w: Var, b: Var, dims: usize) -> Result<Var> {
        let (batch, geom) = self.conv_geometry(op, x, w, b, dims, false)?;
        let mut y = vec![T::zero(); batch * geom.narrow_len()];
        kernels::correlate(&geom, batch, self.value(x).data(), self.value(w).data(), &mut y);
        kernels::add_channel_bias(&mut y, self.value(b).data(), geom.narrow_spatial());
        let mut shape = vec![batch, geom.narrow_channels];
        shape.extend_from_slice(&geom.narrow()[3 - dims..]);
        let t = Tensor::new(shape, y)?;
        Ok(self.push(t, Op::Conv { x, w, b, geom }))
    }

    fn conv_transpose_nd(&mut self, op: &'static str, x: Var, w: Var, b: Var, dims: usize) -> Result<Var> {
        let (batch, geom) = self.conv_geometry(op, x, w, b, dims, true)?;
        let mut y = vec![T::zero(); batch * geom.wide_len()];
        kernels::correlate_adjoint(&geom, batch, self.value(x).data(), self.value(w).data(), &mut y);
        let spatial: usize = geom.wide.iter().product();
        kernels::add_channel_bias(&mut y, self.value(b).data(), spatial);
        let mut shape = vec![batch, geom.wide_channels];
        shape.extend_from_slice(&geom.wide[3 - dims..]);
        let t = Tensor::new(shape, y)?;
        Ok(self.push(t, Op::ConvTranspose { x, w, b, geom }))
    }

    /// Valid cross-correlation: `[B, Cin, H, W] * [Cout, Cin, Kh, Kw] -> [B, Cout, H-Kh+1, W-Kw+1]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.conv_nd("conv2d", x, w, b, 2)
    }

    pub fn conv3d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.conv_nd("conv3d", x, w, b, 3)
    }

    /// Adjoint of [`Graph::conv2d`]: `[B, Cin, H, W] * [Cin, Cout, Kh, Kw] -> [B, Cout, H+Kh-1, W+Kw-1]`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.conv_transpose_nd("conv_transpose2d", x, w, b, 2)
    }

    pub fn conv_transpose3d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.conv_transpose_nd("conv_transpose3d", x, w, b, 3)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let root = &self.nodes[loss.0];
        if root.value.numel() != 1 {
            return Err(Error::Contract(format!("backward from non-scalar of shape {:?}", root.value.shape())));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        let mut out = Gradients { leaves: HashMap::new(), params: BTreeMap::new() };

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match node.op {
                Op::Input => {}
                Op::Leaf => {
                    let t = Tensor::new(node.value.shape().to_vec(), g)?;
                    out.leaves.insert(Var(i), t);
                }
                Op::Param(id) => match out.params.get_mut(&id) {
                    Some(acc) => acc.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                    None => {
                        out.params.insert(id, Tensor::new(node.value.shape().to_vec(), g)?);
                    }
                },
                ref op => self.propagate(op, &node.value, &g, &mut grads),
            }
        }
        Ok(out)
    }

    fn propagate(&self, op: &Op<T>, y: &Tensor<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match *op {
            Op::Input | Op::Leaf | Op::Param(_) => unreachable!(),
            Op::Add(a, b) => {
                self.accum(grads, a, |d| add_into(d, g));
                self.accum(grads, b, |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                self.accum(grads, a, |d| add_into(d, g));
                self.accum(grads, b, |d| d.iter_mut().zip(g).for_each(|(d, g)| *d -= *g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                self.accum(grads, a, |d| d.iter_mut().zip(g).zip(vb).for_each(|((d, g), v)| *d += *g * *v));
                self.accum(grads, b, |d| d.iter_mut().zip(g).zip(va).for_each(|((d, g), v)| *d += *g * *v));
            }
            Op::Scale(x, c) => self.accum(grads, x, |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += *g * c)),
            Op::AddScalar(x) | Op::Reshape(x) => self.accum(grads, x, |d| add_into(d, g)),
            Op::Exp(x) => {
                self.accum(grads, x, |d| d.iter_mut().zip(g).zip(y.data()).for_each(|((d, g), y)| *d += *g * *y))
            }
            Op::Relu(x) => {
                let vx = self.value(x).data();
                self.accum(grads, x, |d| {
                    for ((d, g), x) in d.iter_mut().zip(g).zip(vx) {
                        if *x > T::zero() {
                            *d += *g;
                        }
                    }
                })
            }
            Op::LeakyRelu(x, s) => {
                let vx = self.value(x).data();
                self.accum(grads, x, |d| {
                    for ((d, g), x) in d.iter_mut().zip(g).zip(vx) {
                        *d += if *x > T::zero() { *g } else { *g * s };
                    }
                })
            }
            Op::Narrow { x, start, len } => {
                let last = *self.shape(x).last().unwrap();
                self.accum(grads, x, |d| {
                    for (drow, grow) in d.chunks_mut(last).zip(g.chunks(len)) {
                        add_into(&mut drow[start..start + len], grow);
                    }
                })
            }
            Op::ExpandRows { x, times } => {
                let row: usize = self.shape(x)[1..].iter().product();
                self.accum(grads, x, |d| {
                    for (drow, gblock) in d.chunks_mut(row).zip(g.chunks(row * times)) {
                        for grow in gblock.chunks(row) {
                            add_into(drow, grow);
                        }
                    }
                })
            }
            Op::SumLast(x) => {
                let last = *self.shape(x).last().unwrap();
                self.accum(grads, x, |d| {
                    for (drow, gv) in d.chunks_mut(last).zip(g) {
                        drow.iter_mut().for_each(|d| *d += *gv);
                    }
                })
            }
            Op::SumAll(x) => self.accum(grads, x, |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::MeanAll(x) => {
                let scaled = g[0] / T::of(self.value(x).numel() as f64);
                self.accum(grads, x, |d| d.iter_mut().for_each(|d| *d += scaled))
            }
            Op::Cosine(a, b) => {
                let d = self.shape(a)[1];
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                let mut ga = vec![T::zero(); va.len()];
                let mut gb = vec![T::zero(); vb.len()];
                for (r, &gr) in g.iter().enumerate() {
                    let span = r * d..(r + 1) * d;
                    let (ra, rb) = (&va[span.clone()], &vb[span.clone()]);
                    let (dot, na, nb) = dot_norms(ra, rb);
                    let c = dot / (na * nb);
                    let inv = T::one() / (na * nb);
                    let (ca, cb) = (c / (na * na), c / (nb * nb));
                    for j in 0..d {
                        ga[span.start + j] = gr * (rb[j] * inv - ca * ra[j]);
                        gb[span.start + j] = gr * (ra[j] * inv - cb * rb[j]);
                    }
                }
                self.accum(grads, a, |d| add_into(d, &ga));
                self.accum(grads, b, |d| add_into(d, &gb));
            }
            Op::Linear { x, w, b } => {
                let (batch, out) = (y.shape()[0], y.shape()[1]);
                let inp = self.shape(x)[1];
                let (vx, vw) = (self.value(x).data(), self.value(w).data());
                self.accum(grads, x, |d| T::gemm(batch, out, inp, T::one(), g, false, vw, false, T::one(), d));
                self.accum(grads, w, |d| T::gemm(out, batch, inp, T::one(), g, true, vx, false, T::one(), d));
                self.accum(grads, b, |d| {
                    for row in g.chunks(out) {
                        add_into(d, row);
                    }
                });
            }
            Op::Conv { x, w, b, ref geom } => {
                let batch = y.shape()[0];
                let (vx, vw) = (self.value(x).data(), self.value(w).data());
                self.accum(grads, x, |d| kernels::correlate_adjoint(geom, batch, g, vw, d));
                self.accum(grads, w, |d| kernels::weight_grad(geom, batch, vx, g, d));
                self.accum(grads, b, |d| kernels::channel_sums_add(g, d, geom.narrow_spatial()));
            }
            Op::ConvTranspose { x, w, b, ref geom } => {
                let batch = y.shape()[0];
                let (vx, vw) = (self.value(x).data(), self.value(w).data());
                self.accum(grads, x, |d| {
                    let mut tmp = vec![T::zero(); d.len()];
                    kernels::correlate(geom, batch, g, vw, &mut tmp);
                    add_into(d, &tmp);
                });
                self.accum(grads, w, |d| kernels::weight_grad(geom, batch, g, vx, d));
                let spatial: usize = geom.wide.iter().product();
                self.accum(grads, b, |d| kernels::channel_sums_add(g, d, spatial));
            }
        }
    }

    fn accum(&self, grads: &mut [Option<Vec<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        let buf = grads[v.0].get_or_insert_with(|| vec![T::zero(); node.value.numel()]);
        f(buf);
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += *s);
}

fn dot_norms<T: Real>(a: &[T], b: &[T]) -> (T, T, T) {
    let (mut dot, mut aa, mut bb) = (T::zero(), T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        dot += *x * *y;
        aa += *x * *x;
        bb += *y * *y;
    }
    (dot, aa.sqrt(), bb.sqrt())
}

/// Result of one reverse sweep.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    leaves: HashMap<Var, Tensor<T>>,
    params: BTreeMap<ParamId, Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to a [`Graph::leaf`]; `None` when the leaf does
    /// not reach the loss.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(&v)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(&id)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (*k, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_gradient_is_twice_the_weight() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("w", t(&[3], &[1.0, -2.0, 0.5])).unwrap();
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum_all(sq);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.param(id).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("w", t(&[2], &[1.5, -0.25])).unwrap();
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum_all(sq);
        let grads = g.backward(loss).unwrap();
        store.accumulate(&grads);
        let once = store.get(id).grad().unwrap().clone();
        store.accumulate(&g.backward(loss).unwrap());
        let twice = store.get(id).grad().unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert_eq!(2.0 * a, *b);
        }
        store.zero_grad();
        assert!(store.get(id).grad().unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]));
        let y = g.exp(x);
        assert!(matches!(g.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn param_used_twice_sums_both_paths() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("w", t(&[1], &[3.0])).unwrap();
        let mut g = Graph::new();
        let a = g.param(&store, id);
        let b = g.param(&store, id);
        let p = g.mul(a, b).unwrap();
        let loss = g.sum_all(p);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.param(id).unwrap().data(), &[6.0]);
    }

    #[test]
    fn linear_zero_weights_give_zero_output() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let w = g.input(Tensor::zeros(&[4, 3]));
        let b = g.input(Tensor::zeros(&[4]));
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.shape(y), &[2, 4]);
        assert!(g.value(y).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_shape_mismatch_names_operands() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[2, 3]));
        let w = g.input(Tensor::zeros(&[4, 5]));
        let b = g.input(Tensor::zeros(&[4]));
        let err = g.linear(x, w, b).unwrap_err().to_string();
        assert!(err.contains("linear") && err.contains("[2, 3]") && err.contains("[4, 5]"));
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[1, 1, 2, 2]));
        let w = g.input(Tensor::zeros(&[1, 1, 3, 3]));
        let b = g.input(Tensor::zeros(&[1]));
        assert!(matches!(g.conv2d(x, w, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn conv2d_all_ones() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_fn(&[1, 1, 3, 3], |_| 1.0));
        let w = g.input(Tensor::from_fn(&[1, 1, 2, 2], |_| 1.0));
        let b = g.input(Tensor::zeros(&[1]));
        let y = g.conv2d(x, w, b).unwrap();
        assert_eq!(g.shape(y), &[1, 1, 2, 2]);
        assert_eq!(g.value(y).data(), &[4.0; 4]);
    }

    #[test]
    fn unit_kernels_are_identity() {
        let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.5 - 3.0).collect();
        let mut g = Graph::<f64>::new();
        let x2 = g.input(t(&[1, 1, 4, 6], &data));
        let x3 = g.input(t(&[1, 1, 2, 3, 4], &data));
        let w2 = g.input(t(&[1, 1, 1, 1], &[1.0]));
        let w3 = g.input(t(&[1, 1, 1, 1, 1], &[1.0]));
        let b = g.input(t(&[1], &[0.0]));
        for y in [
            g.conv2d(x2, w2, b).unwrap(),
            g.conv3d(x3, w3, b).unwrap(),
            g.conv_transpose2d(x2, w2, b).unwrap(),
            g.conv_transpose3d(x3, w3, b).unwrap(),
        ] {
            assert_eq!(g.value(y).data(), data.as_slice());
        }
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        let mut g = Graph::<f64>::new();
        let a = g.input(t(&[1, 2], &[0.0, 0.0]));
        let b = g.input(t(&[1, 2], &[1.0, 0.0]));
        assert!(matches!(g.cosine(a, b), Err(Error::Degenerate(_))));
    }

    #[test]
    fn leaky_relu_fixes_zero() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[3], &[0.0, -2.0, 2.0]));
        let y = g.leaky_relu(x, 0.01);
        assert_eq!(g.value(y).data(), &[0.0, -0.02, 2.0]);
    }
}
