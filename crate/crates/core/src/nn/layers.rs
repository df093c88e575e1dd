//! Stateful layers: parameters, gradients and the activations cached for
//! the backward pass.

use rand::Rng;

use crate::error::{Error, Result};

use super::ops::{self, BatchNormCache};
use super::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: &'static str, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { name, value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    fn accumulate(&mut self, g: &Tensor<T>) -> Result<()> {
        self.grad.add_assign(g)
    }
}

/// He-uniform: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn he_uniform<T: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Tensor<T> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.gen_range(-bound..bound)))
}

/// Common contract for every layer.
///
/// `forward` in [`Mode::Train`] caches whatever `backward` needs;
/// `infer` is the side-effect-free eval path.
pub trait Layer<T: Scalar>: Send + Sync {
    fn kind(&self) -> &'static str;

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    /// Non-trainable state that must survive a checkpoint.
    fn buffers(&self) -> Vec<(&'static str, &Tensor<T>)> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        Vec::new()
    }
}

fn no_cache(kind: &str) -> Error {
    Error::param(format!(
        "{kind}: backward called without a train-mode forward"
    ))
}

fn seq_shape(kind: &'static str, input: &[usize]) -> Result<(usize, usize, usize)> {
    match *input {
        [b, c, l] => Ok((b, c, l)),
        _ => Err(Error::shape(kind, input, &[0, 0, 0])),
    }
}

fn out_len(kind: &str, len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    ops::conv_out_len(len, kernel, stride, padding)
        .ok_or_else(|| Error::param(format!("{kind}: kernel {kernel} does not fit length {len}")))
}

pub struct BatchNorm1d<T> {
    gamma: Param<T>,
    beta: Param<T>,
    running_mean: Tensor<T>,
    running_var: Tensor<T>,
    /// Weight on the old running value.
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BatchNormCache<T>>,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            gamma: Param::new("gamma", Tensor::full(&[channels], T::one())),
            beta: Param::new("beta", Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            momentum: 0.9,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn running_mean(&self) -> &Tensor<T> {
        &self.running_mean
    }

    pub fn running_var(&self) -> &Tensor<T> {
        &self.running_var
    }
}

impl<T: Scalar> Layer<T> for BatchNorm1d<T> {
    fn kind(&self) -> &'static str {
        "batchnorm"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Eval {
            return self.infer(x);
        }
        let (y, cache) = ops::batchnorm1d_train(x, &self.gamma.value, &self.beta.value, self.eps)?;
        let (b, _, l) = x.dims3("batchnorm1d")?;
        let n = (b * l) as f64;
        let m = self.momentum;
        for (c, (rm, rv)) in self
            .running_mean
            .data_mut()
            .iter_mut()
            .zip(self.running_var.data_mut().iter_mut())
            .enumerate()
        {
            let unbiased = cache.var[c] * n / (n - 1.0);
            *rm = T::from_f64_lossy(m * rm.as_f64() + (1.0 - m) * cache.mean[c]);
            *rv = T::from_f64_lossy(m * rv.as_f64() + (1.0 - m) * unbiased);
        }
        self.cache = Some(cache);
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::batchnorm1d_eval(
            x,
            &self.gamma.value,
            &self.beta.value,
            &self.running_mean,
            &self.running_var,
            self.eps,
        )
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| no_cache("batchnorm"))?;
        let (dx, dg, db) = ops::batchnorm1d_backward(&cache, &self.gamma.value, grad_out)?;
        self.gamma.accumulate(&dg)?;
        self.beta.accumulate(&db)?;
        Ok(dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (_, c, _) = seq_shape("batchnorm", input)?;
        if c != self.gamma.value.len() {
            return Err(Error::shape("batchnorm", input, self.gamma.value.shape()));
        }
        Ok(input.to_vec())
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ]
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("running_mean", &mut self.running_mean),
            ("running_var", &mut self.running_var),
        ]
    }
}

pub struct Conv1d<T> {
    weight: Param<T>,
    bias: Param<T>,
    stride: usize,
    padding: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        Conv1d {
            weight: Param::new(
                "weight",
                he_uniform(&[c_out, c_in, kernel], c_in * kernel, rng),
            ),
            bias: Param::new("bias", Tensor::zeros(&[c_out])),
            stride,
            padding,
            input: None,
        }
    }
}

impl<T: Scalar> Layer<T> for Conv1d<T> {
    fn kind(&self) -> &'static str {
        "conv"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::conv1d(
            x,
            &self.weight.value,
            Some(&self.bias.value),
            self.stride,
            self.padding,
        )
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| no_cache("conv"))?;
        let g = ops::conv1d_backward(&x, &self.weight.value, self.stride, self.padding, grad_out)?;
        self.weight.accumulate(&g.weight)?;
        self.bias.accumulate(&g.bias)?;
        Ok(g.input)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (b, c, l) = seq_shape("conv", input)?;
        let ws = self.weight.value.shape();
        if c != ws[1] {
            return Err(Error::shape("conv", input, ws));
        }
        Ok(vec![
            b,
            ws[0],
            out_len("conv", l, ws[2], self.stride, self.padding)?,
        ])
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Depthwise (no bias) then pointwise (with bias) convolution; stride 1,
/// "same" padding for odd kernels.
pub struct DepthwiseSeparable<T> {
    depthwise: Param<T>,
    pointwise: Param<T>,
    bias: Param<T>,
    padding: usize,
    cache: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> DepthwiseSeparable<T> {
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, kernel: usize, rng: &mut R) -> Self {
        DepthwiseSeparable {
            depthwise: Param::new(
                "depthwise_weight",
                he_uniform(&[c_in, 1, kernel], kernel, rng),
            ),
            pointwise: Param::new("pointwise_weight", he_uniform(&[c_out, c_in, 1], c_in, rng)),
            bias: Param::new("pointwise_bias", Tensor::zeros(&[c_out])),
            padding: kernel / 2,
            cache: None,
        }
    }
}

impl<T: Scalar> Layer<T> for DepthwiseSeparable<T> {
    fn kind(&self) -> &'static str {
        "dwsep"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Eval {
            return self.infer(x);
        }
        let mid = ops::depthwise_conv1d(x, &self.depthwise.value, 1, self.padding)?;
        let y = ops::conv1d(&mid, &self.pointwise.value, Some(&self.bias.value), 1, 0)?;
        self.cache = Some((x.clone(), mid));
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::depthwise_separable_conv1d(
            x,
            &self.depthwise.value,
            &self.pointwise.value,
            &self.bias.value,
            self.padding,
        )
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (x, mid) = self.cache.take().ok_or_else(|| no_cache("dwsep"))?;
        let pw = ops::conv1d_backward(&mid, &self.pointwise.value, 1, 0, grad_out)?;
        self.pointwise.accumulate(&pw.weight)?;
        self.bias.accumulate(&pw.bias)?;
        let (dx, ddw) =
            ops::depthwise_conv1d_backward(&x, &self.depthwise.value, 1, self.padding, &pw.input)?;
        self.depthwise.accumulate(&ddw)?;
        Ok(dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (b, c, l) = seq_shape("dwsep", input)?;
        let ds = self.depthwise.value.shape();
        if c != ds[0] {
            return Err(Error::shape("dwsep", input, ds));
        }
        let len = out_len("dwsep", l, ds[2], 1, self.padding)?;
        Ok(vec![b, self.pointwise.value.shape()[0], len])
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.depthwise, &self.pointwise, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.depthwise, &mut self.pointwise, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Swish,
    Relu,
}

pub struct Activation<T> {
    kind: ActivationKind,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Activation<T> {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, input: None }
    }
}

impl<T: Scalar> Layer<T> for Activation<T> {
    fn kind(&self) -> &'static str {
        match self.kind {
            ActivationKind::Swish => "swish",
            ActivationKind::Relu => "relu",
        }
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(match self.kind {
            ActivationKind::Swish => ops::swish(x),
            ActivationKind::Relu => ops::relu(x),
        })
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| no_cache(Layer::<T>::kind(self)))?;
        match self.kind {
            ActivationKind::Swish => ops::swish_backward(&x, grad_out),
            ActivationKind::Relu => ops::relu_backward(&x, grad_out),
        }
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }
}

pub struct MaxPool1d {
    window: usize,
    stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(window: usize, stride: usize) -> Self {
        MaxPool1d {
            window,
            stride,
            cache: None,
        }
    }
}

impl<T: Scalar> Layer<T> for MaxPool1d {
    fn kind(&self) -> &'static str {
        "maxpool"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (y, argmax) = ops::maxpool1d(x, self.window, self.stride)?;
        if mode == Mode::Train {
            self.cache = Some((x.shape().to_vec(), argmax));
        }
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(ops::maxpool1d(x, self.window, self.stride)?.0)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, argmax) = self.cache.take().ok_or_else(|| no_cache("maxpool"))?;
        ops::maxpool1d_backward(&shape, &argmax, grad_out)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (b, c, l) = seq_shape("maxpool", input)?;
        Ok(vec![
            b,
            c,
            out_len("maxpool", l, self.window, self.stride, 0)?,
        ])
    }
}

#[derive(Default)]
pub struct GlobalAvgPool {
    len: Option<usize>,
}

impl<T: Scalar> Layer<T> for GlobalAvgPool {
    fn kind(&self) -> &'static str {
        "gap"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = ops::global_avg_pool(x)?;
        if mode == Mode::Train {
            self.len = Some(x.shape()[2]);
        }
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::global_avg_pool(x)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let len = self.len.take().ok_or_else(|| no_cache("gap"))?;
        ops::global_avg_pool_backward(grad_out, len)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (b, c, l) = seq_shape("gap", input)?;
        if l == 0 {
            return Err(Error::param("gap over an empty length"));
        }
        Ok(vec![b, c])
    }
}

#[derive(Default)]
pub struct Flatten {
    shape: Option<Vec<usize>>,
}

impl<T: Scalar> Layer<T> for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Train {
            self.shape = Some(x.shape().to_vec());
        }
        self.infer(x)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = Layer::<T>::output_shape(self, x.shape())?;
        x.clone().reshape(&shape)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.shape.take().ok_or_else(|| no_cache("flatten"))?;
        grad_out.clone().reshape(&shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input.split_first() {
            Some((&b, rest)) if !rest.is_empty() => Ok(vec![b, rest.iter().product()]),
            _ => Err(Error::shape("flatten", input, &[0, 0])),
        }
    }
}

pub struct Dense<T> {
    weight: Param<T>,
    bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            weight: Param::new("weight", he_uniform(&[outputs, inputs], inputs, rng)),
            bias: Param::new("bias", Tensor::zeros(&[outputs])),
            input: None,
        }
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::dense(x, &self.weight.value, &self.bias.value)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| no_cache("dense"))?;
        let (dx, dw, db) = ops::dense_backward(&x, &self.weight.value, grad_out)?;
        self.weight.accumulate(&dw)?;
        self.bias.accumulate(&db)?;
        Ok(dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let ws = self.weight.value.shape();
        match *input {
            [b, f] if f == ws[1] => Ok(vec![b, ws[0]]),
            _ => Err(Error::shape("dense", input, ws)),
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
