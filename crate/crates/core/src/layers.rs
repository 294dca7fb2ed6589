//! Layer primitives with hand-derived backward passes.
//!
//! Feature maps are laid out `rows × cols × channels` (row-major), kernels
//! `filters × g × h × depth`. Convolution is valid cross-correlation with
//! stride 1.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2DLayer<T = f32> {
    /// `F × g × h × z`
    pub kernels: Tensor<T>,
    /// `F`
    pub biases: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub biases: Tensor<T>,
}

impl<T: Real> Conv2DLayer<T> {
    pub fn new(kernels: Tensor<T>, biases: Tensor<T>) -> Result<Self> {
        if kernels.rank() != 4 || biases.rank() != 1 || kernels.shape()[0] != biases.shape()[0] {
            return Err(Error::ShapeMismatch { left: kernels.shape().to_vec(), right: biases.shape().to_vec() });
        }
        Ok(Self { kernels, biases })
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    /// Spatial kernel extent `(g, h)`.
    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.shape()[1], self.kernels.shape()[2])
    }

    pub fn depth(&self) -> usize {
        self.kernels.shape()[3]
    }

    /// Output spatial extent for an `m × n` input.
    pub fn output_extent(&self, m: usize, n: usize) -> Result<(usize, usize)> {
        let (g, h) = self.kernel_size();
        if g > m || h > n {
            return Err(Error::KernelTooLarge { g, h, m, n });
        }
        Ok((m - g + 1, n - h + 1))
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        if input.rank() != 3 || input.shape()[2] != self.depth() {
            return Err(Error::ShapeMismatch { left: input.shape().to_vec(), right: self.kernels.shape().to_vec() });
        }
        let (m, n) = (input.shape()[0], input.shape()[1]);
        let (p, q) = self.output_extent(m, n)?;
        Ok((m, n, p, q))
    }

    /// `(m−g+1) × (n−h+1) × F` feature maps.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, n, p, q) = self.check_input(input)?;
        let (g, h) = self.kernel_size();
        let (f_count, z) = (self.filters(), self.depth());
        let x = input.data();
        let k = self.kernels.data();
        let b = self.biases.data();
        let span = h * z;
        let mut out = vec![T::zero(); p * q * f_count];
        for i in 0..p {
            for j in 0..q {
                let cell = &mut out[(i * q + j) * f_count..(i * q + j + 1) * f_count];
                for (f, o) in cell.iter_mut().enumerate() {
                    let mut acc = b[f];
                    for a in 0..g {
                        let xs = ((i + a) * n + j) * z;
                        let ks = (f * g + a) * span;
                        acc = acc + dot(&x[xs..xs + span], &k[ks..ks + span]);
                    }
                    *o = acc;
                }
            }
        }
        Tensor::from_vec(&[p, q, f_count], out)?.ensure_finite("conv2d forward")
    }

    pub fn backward(&self, input: &Tensor<T>, upstream: &Tensor<T>) -> Result<ConvGrads<T>> {
        let (grads, dx) = self.backward_impl(input, upstream, true)?;
        Ok(ConvGrads { input: dx.expect("requested"), kernels: grads.0, biases: grads.1 })
    }

    /// Kernel and bias gradients only; skips the input gradient.
    pub fn param_backward(&self, input: &Tensor<T>, upstream: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        Ok(self.backward_impl(input, upstream, false)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn backward_impl(
        &self,
        input: &Tensor<T>,
        upstream: &Tensor<T>,
        want_input: bool,
    ) -> Result<((Tensor<T>, Tensor<T>), Option<Tensor<T>>)> {
        let (_, n, p, q) = self.check_input(input)?;
        let f_count = self.filters();
        if upstream.shape() != [p, q, f_count] {
            return Err(Error::ShapeMismatch { left: upstream.shape().to_vec(), right: vec![p, q, f_count] });
        }
        let (g, h) = self.kernel_size();
        let z = self.depth();
        let span = h * z;
        let x = input.data();
        let k = self.kernels.data();
        let up = upstream.data();
        let mut dx = Tensor::zeros(input.shape())?;
        let mut dk = Tensor::zeros(self.kernels.shape())?;
        let mut db = Tensor::zeros(self.biases.shape())?;
        {
            let dxd = dx.data_mut();
            let dkd = dk.data_mut();
            let dbd = db.data_mut();
            for i in 0..p {
                for j in 0..q {
                    for f in 0..f_count {
                        let d = up[(i * q + j) * f_count + f];
                        if d == T::zero() {
                            continue;
                        }
                        dbd[f] = dbd[f] + d;
                        for a in 0..g {
                            let xs = ((i + a) * n + j) * z;
                            let ks = (f * g + a) * span;
                            axpy(d, &x[xs..xs + span], &mut dkd[ks..ks + span]);
                            if want_input {
                                axpy(d, &k[ks..ks + span], &mut dxd[xs..xs + span]);
                            }
                        }
                    }
                }
            }
        }
        let dx = if want_input { Some(dx.ensure_finite("conv2d backward")?) } else { None };
        Ok(((dk.ensure_finite("conv2d backward")?, db.ensure_finite("conv2d backward")?), dx))
    }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Passes `upstream` where the forward input was strictly positive.
pub fn relu_backward<T: Real>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    input.same_shape(upstream)?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &u)| if x > T::zero() { u } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

// ---------------------------------------------------------------------------
// Global max pooling
// ---------------------------------------------------------------------------

/// Per-channel maximum over all spatial positions of a `p × q × F` map.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolOutput<T> {
    pub values: Tensor<T>,
    /// Flat spatial index (`row · q + col`) of each channel's maximum.
    pub argmax: Vec<usize>,
}

pub fn global_max_pool<T: Real>(input: &Tensor<T>) -> Result<MaxPoolOutput<T>> {
    if input.rank() != 3 {
        return Err(Error::InvalidShape { shape: input.shape().to_vec(), reason: "expected p×q×F".into() });
    }
    let channels = input.shape()[2];
    let data = input.data();
    let mut values = data[..channels].to_vec();
    let mut argmax = vec![0usize; channels];
    for (pos, cell) in data.chunks_exact(channels).enumerate().skip(1) {
        for (f, &v) in cell.iter().enumerate() {
            // strict comparison keeps the lowest flat index on ties
            if v > values[f] {
                values[f] = v;
                argmax[f] = pos;
            }
        }
    }
    Ok(MaxPoolOutput { values: Tensor::vector(values)?, argmax })
}

/// Routes each channel's upstream gradient to its argmax position.
pub fn global_max_pool_backward<T: Real>(input_shape: &[usize], argmax: &[usize], upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let channels = *input_shape.last().unwrap_or(&0);
    if upstream.len() != channels || argmax.len() != channels {
        return Err(Error::ShapeMismatch { left: upstream.shape().to_vec(), right: input_shape.to_vec() });
    }
    let mut grad = Tensor::zeros(input_shape)?;
    let g = grad.data_mut();
    for (f, (&pos, &u)) in argmax.iter().zip(upstream.data()).enumerate() {
        g[pos * channels + f] = u;
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Concatenation
// ---------------------------------------------------------------------------

/// Joins rank-1 parts in order; returns the joined vector and each part's length.
pub fn concat<T: Real>(parts: &[Tensor<T>]) -> Result<(Tensor<T>, Vec<usize>)> {
    if parts.is_empty() {
        return Err(Error::Input("concat of zero parts".into()));
    }
    let mut data = Vec::with_capacity(parts.iter().map(Tensor::len).sum());
    let mut sizes = Vec::with_capacity(parts.len());
    for p in parts {
        if p.rank() != 1 {
            return Err(Error::InvalidShape { shape: p.shape().to_vec(), reason: "concat expects rank-1 parts".into() });
        }
        data.extend_from_slice(p.data());
        sizes.push(p.len());
    }
    Ok((Tensor::vector(data)?, sizes))
}

pub fn concat_backward<T: Real>(upstream: &Tensor<T>, sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
    if sizes.iter().sum::<usize>() != upstream.len() {
        return Err(Error::ShapeMismatch { left: upstream.shape().to_vec(), right: sizes.to_vec() });
    }
    let mut offset = 0;
    sizes
        .iter()
        .map(|&s| {
            let part = Tensor::vector(upstream.data()[offset..offset + s].to_vec());
            offset += s;
            part
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f32> {
    /// `u × r`
    pub weights: Tensor<T>,
    /// `r`
    pub biases: Tensor<T>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, biases: Tensor<T>, activation: Activation) -> Result<Self> {
        if weights.rank() != 2 || biases.rank() != 1 || weights.shape()[1] != biases.shape()[0] {
            return Err(Error::ShapeMismatch { left: weights.shape().to_vec(), right: biases.shape().to_vec() });
        }
        Ok(Self { weights, biases, activation })
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Returns `(activation output, pre-activation)`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        if x.rank() != 1 || x.len() != self.inputs() {
            return Err(Error::ShapeMismatch { left: x.shape().to_vec(), right: self.weights.shape().to_vec() });
        }
        let mut pre = Tensor::matvec(&self.weights, x)?;
        for (p, &b) in pre.data_mut().iter_mut().zip(self.biases.data()) {
            *p = *p + b;
        }
        let out = match self.activation {
            Activation::Relu => relu_forward(&pre),
            Activation::Identity => pre.clone(),
        };
        Ok((out.ensure_finite("dense forward")?, pre))
    }

    pub fn backward(&self, x: &Tensor<T>, pre: &Tensor<T>, upstream: &Tensor<T>) -> Result<DenseGrads<T>> {
        let dz = match self.activation {
            Activation::Relu => relu_backward(pre, upstream)?,
            Activation::Identity => {
                pre.same_shape(upstream)?;
                upstream.clone()
            }
        };
        let (u, r) = (self.inputs(), self.outputs());
        let mut dw = Vec::with_capacity(u * r);
        for &xi in x.data() {
            dw.extend(dz.data().iter().map(|&d| xi * d));
        }
        let dx: Vec<T> = self.weights.data().chunks_exact(r).map(|row| dot(row, dz.data())).collect();
        Ok(DenseGrads {
            input: Tensor::vector(dx)?.ensure_finite("dense backward")?,
            weights: Tensor::from_vec(&[u, r], dw)?.ensure_finite("dense backward")?,
            biases: dz,
        })
    }
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: survivors are scaled by `1/(1−rate)` at train time so
/// evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns the output and, in train mode with a positive rate, the mask
    /// of per-element multipliers needed by [`Dropout::backward`].
    pub fn forward<T: Real, R: Rng + ?Sized>(&self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> (Tensor<T>, Option<Vec<T>>) {
        if mode == Mode::Eval || self.rate == 0.0 {
            return (x.clone(), None);
        }
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.random::<f64>() < self.rate { T::zero() } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        (Tensor::from_vec(x.shape(), data).expect("shape preserved"), Some(mask))
    }

    pub fn backward<T: Real>(mask: Option<&[T]>, upstream: &Tensor<T>) -> Tensor<T> {
        match mask {
            None => upstream.clone(),
            Some(mask) => {
                let data = upstream.data().iter().zip(mask).map(|(&u, &m)| u * m).collect();
                Tensor::from_vec(upstream.shape(), data).expect("shape preserved")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// One logit, sigmoid output.
    Binary,
    /// One logit per class, softmax output.
    Multiclass,
}

pub fn sigmoid<T: Real>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&t| (t - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Sigmoid for a binary head, softmax otherwise.
pub fn classify<T: Real>(task: Task, logits: &Tensor<T>) -> Result<Tensor<T>> {
    let probs = match task {
        Task::Binary => {
            if logits.len() != 1 {
                return Err(Error::Input(format!("binary head expects 1 logit, got {}", logits.len())));
            }
            vec![sigmoid(logits.data()[0])]
        }
        Task::Multiclass => softmax(logits.data()),
    };
    Tensor::vector(probs)?.ensure_finite("classify")
}
