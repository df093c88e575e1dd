//! Forward and backward kernels for the fixed operator set.
//!
//! Layouts: sequences are `[batch, channels, length]`, dense activations
//! `[batch, features]`. Convolutions use cross-correlation (no kernel flip)
//! with explicit zero padding.

use crate::error::{Error, Result};

use super::scalar::{gemm, Mat};
use super::{Scalar, Tensor};

/// Output length of a strided, padded 1D window op, or `None` when the
/// kernel does not fit.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if kernel == 0 || stride == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn out_len_or_err(
    op: &'static str,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<usize> {
    conv_out_len(len, kernel, stride, padding).ok_or_else(|| {
        Error::param(format!(
            "{op}: kernel {kernel} (stride {stride}, padding {padding}) does not fit length {len}"
        ))
    })
}

/// Output positions `t` for which `t * stride + k - padding` is a valid
/// input index.
fn valid_range(
    len: usize,
    out_len: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> (usize, usize) {
    let lo = if padding > k {
        (padding - k).div_ceil(stride)
    } else {
        0
    };
    // t * stride + k - padding <= len - 1
    let hi = if len + padding > k {
        ((len + padding - k - 1) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// Unfolds one `[channels, len]` sample into a `[channels * kernel, out_len]`
/// matrix.
fn im2col<T: Scalar>(
    x: &[T],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
    col: &mut [T],
) {
    for c in 0..channels {
        let xs = &x[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &mut col[(c * kernel + k) * out_len..(c * kernel + k + 1) * out_len];
            let (lo, hi) = valid_range(len, out_len, k, stride, padding);
            row[..lo].fill(T::zero());
            row[hi..].fill(T::zero());
            if stride == 1 {
                let start = lo + k - padding;
                row[lo..hi].copy_from_slice(&xs[start..start + (hi - lo)]);
            } else {
                for t in lo..hi {
                    row[t] = xs[t * stride + k - padding];
                }
            }
        }
    }
}

/// Adjoint of [`im2col`], accumulating into `dx`.
fn col2im<T: Scalar>(
    col: &[T],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
    dx: &mut [T],
) {
    for c in 0..channels {
        let xs = &mut dx[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &col[(c * kernel + k) * out_len..(c * kernel + k + 1) * out_len];
            let (lo, hi) = valid_range(len, out_len, k, stride, padding);
            for t in lo..hi {
                xs[t * stride + k - padding] += row[t];
            }
        }
    }
}

fn is_pointwise(kernel: usize, stride: usize, padding: usize) -> bool {
    kernel == 1 && stride == 1 && padding == 0
}

/// Full 1D convolution. `weight` is `[c_out, c_in, kernel]`, `bias` `[c_out]`.
pub fn conv1d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (batch, c_in, len) = x.dims3("conv1d")?;
    let (c_out, w_in, kernel) = weight.dims3("conv1d weight")?;
    if w_in != c_in {
        return Err(Error::shape("conv1d", x.shape(), weight.shape()));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::shape("conv1d bias", b.shape(), &[c_out]));
        }
    }
    let out_len = out_len_or_err("conv1d", len, kernel, stride, padding)?;
    let rows = c_in * kernel;
    let mut out = vec![T::zero(); batch * c_out * out_len];
    let mut col = if is_pointwise(kernel, stride, padding) {
        Vec::new()
    } else {
        vec![T::zero(); rows * out_len]
    };
    let w = Mat::new(weight.data(), c_out, rows);
    for b in 0..batch {
        let xb = &x.data()[b * c_in * len..(b + 1) * c_in * len];
        let cols: &[T] = if col.is_empty() {
            xb
        } else {
            im2col(xb, c_in, len, kernel, stride, padding, out_len, &mut col);
            &col
        };
        let ob = &mut out[b * c_out * out_len..(b + 1) * c_out * out_len];
        gemm(T::one(), w, Mat::new(cols, rows, out_len), T::zero(), ob);
        if let Some(bias) = bias {
            for (row, &bv) in ob.chunks_exact_mut(out_len).zip(bias.data()) {
                row.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new(&[batch, c_out, out_len], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (batch, c_in, len) = x.dims3("conv1d backward")?;
    let (c_out, _, kernel) = weight.dims3("conv1d backward weight")?;
    let out_len = out_len_or_err("conv1d backward", len, kernel, stride, padding)?;
    if grad_out.shape() != [batch, c_out, out_len] {
        return Err(Error::shape(
            "conv1d backward",
            grad_out.shape(),
            &[batch, c_out, out_len],
        ));
    }
    let rows = c_in * kernel;
    let pointwise = is_pointwise(kernel, stride, padding);
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); weight.len()];
    let mut db = vec![T::zero(); c_out];
    let mut col = vec![T::zero(); if pointwise { 0 } else { rows * out_len }];
    let mut dcol = vec![T::zero(); if pointwise { 0 } else { rows * out_len }];
    let w = Mat::new(weight.data(), c_out, rows);
    for b in 0..batch {
        let xb = &x.data()[b * c_in * len..(b + 1) * c_in * len];
        let gb = &grad_out.data()[b * c_out * out_len..(b + 1) * c_out * out_len];
        let g = Mat::new(gb, c_out, out_len);
        for (d, row) in db.iter_mut().zip(gb.chunks_exact(out_len)) {
            *d += row.iter().copied().sum::<T>();
        }
        let dxb = &mut dx[b * c_in * len..(b + 1) * c_in * len];
        if pointwise {
            gemm(
                T::one(),
                g,
                Mat::new(xb, rows, out_len).t(),
                T::one(),
                &mut dw,
            );
            gemm(T::one(), w.t(), g, T::zero(), dxb);
        } else {
            im2col(xb, c_in, len, kernel, stride, padding, out_len, &mut col);
            gemm(
                T::one(),
                g,
                Mat::new(&col, rows, out_len).t(),
                T::one(),
                &mut dw,
            );
            gemm(T::one(), w.t(), g, T::zero(), &mut dcol);
            col2im(&dcol, c_in, len, kernel, stride, padding, out_len, dxb);
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(x.shape(), dx)?,
        weight: Tensor::new(weight.shape(), dw)?,
        bias: Tensor::new(&[c_out], db)?,
    })
}

/// Per-channel convolution. `weight` is `[channels, 1, kernel]`.
pub fn depthwise_conv1d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (batch, channels, len) = x.dims3("depthwise_conv1d")?;
    let (w_ch, one, kernel) = weight.dims3("depthwise_conv1d weight")?;
    if w_ch != channels || one != 1 {
        return Err(Error::shape("depthwise_conv1d", x.shape(), weight.shape()));
    }
    let out_len = out_len_or_err("depthwise_conv1d", len, kernel, stride, padding)?;
    let mut out = vec![T::zero(); batch * channels * out_len];
    for (bc, ob) in out.chunks_exact_mut(out_len).enumerate() {
        let c = bc % channels;
        let xs = &x.data()[bc * len..(bc + 1) * len];
        let ws = &weight.data()[c * kernel..(c + 1) * kernel];
        for (k, &wk) in ws.iter().enumerate() {
            let (lo, hi) = valid_range(len, out_len, k, stride, padding);
            if stride == 1 {
                let start = lo + k - padding;
                for (o, &xv) in ob[lo..hi].iter_mut().zip(&xs[start..start + (hi - lo)]) {
                    *o += wk * xv;
                }
            } else {
                for t in lo..hi {
                    ob[t] += wk * xs[t * stride + k - padding];
                }
            }
        }
    }
    Tensor::new(&[batch, channels, out_len], out)
}

/// Returns `(grad_input, grad_weight)`.
pub fn depthwise_conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (batch, channels, len) = x.dims3("depthwise_conv1d backward")?;
    let (_, _, kernel) = weight.dims3("depthwise_conv1d backward weight")?;
    let out_len = out_len_or_err("depthwise_conv1d backward", len, kernel, stride, padding)?;
    if grad_out.shape() != [batch, channels, out_len] {
        return Err(Error::shape(
            "depthwise_conv1d backward",
            grad_out.shape(),
            &[batch, channels, out_len],
        ));
    }
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); weight.len()];
    for bc in 0..batch * channels {
        let c = bc % channels;
        let xs = &x.data()[bc * len..(bc + 1) * len];
        let gs = &grad_out.data()[bc * out_len..(bc + 1) * out_len];
        let dxs = &mut dx[bc * len..(bc + 1) * len];
        for k in 0..kernel {
            let wk = weight.data()[c * kernel + k];
            let (lo, hi) = valid_range(len, out_len, k, stride, padding);
            let mut acc = T::zero();
            if stride == 1 {
                let start = lo + k - padding;
                let xr = &xs[start..start + (hi - lo)];
                for (&g, &xv) in gs[lo..hi].iter().zip(xr) {
                    acc += g * xv;
                }
                for (d, &g) in dxs[start..start + (hi - lo)].iter_mut().zip(&gs[lo..hi]) {
                    *d += wk * g;
                }
            } else {
                for t in lo..hi {
                    let i = t * stride + k - padding;
                    acc += gs[t] * xs[i];
                    dxs[i] += wk * gs[t];
                }
            }
            dw[c * kernel + k] += acc;
        }
    }
    Ok((
        Tensor::new(x.shape(), dx)?,
        Tensor::new(weight.shape(), dw)?,
    ))
}

/// Depthwise convolution (stride 1, `padding`) followed by a pointwise
/// `[c_out, c_in, 1]` convolution with bias.
pub fn depthwise_separable_conv1d<T: Scalar>(
    x: &Tensor<T>,
    depthwise_weight: &Tensor<T>,
    pointwise_weight: &Tensor<T>,
    pointwise_bias: &Tensor<T>,
    padding: usize,
) -> Result<Tensor<T>> {
    let mid = depthwise_conv1d(x, depthwise_weight, 1, padding)?;
    conv1d(&mid, pointwise_weight, Some(pointwise_bias), 1, 0)
}

/// Batch statistics produced by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub normalized: Tensor<T>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Biased batch variance.
    pub var: Vec<f64>,
}

/// Training-mode batch normalization over `(batch, length)` per channel.
pub fn batchnorm1d_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (batch, channels, len) = x.dims3("batchnorm1d")?;
    check_affine(channels, gamma, beta)?;
    if batch < 2 {
        return Err(Error::param(
            "batchnorm1d in train mode needs a batch of at least 2",
        ));
    }
    let n = (batch * len) as f64;
    let mut mean = vec![0.0f64; channels];
    let mut var = vec![0.0f64; channels];
    for (bc, row) in x.data().chunks_exact(len).enumerate() {
        mean[bc % channels] += row.iter().map(|v| v.as_f64()).sum::<f64>();
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for (bc, row) in x.data().chunks_exact(len).enumerate() {
        let m = mean[bc % channels];
        var[bc % channels] += row.iter().map(|v| (v.as_f64() - m).powi(2)).sum::<f64>();
    }
    var.iter_mut().for_each(|v| *v /= n);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for (bc, (row, (hrow, yrow))) in x
        .data()
        .chunks_exact(len)
        .zip(xhat.chunks_exact_mut(len).zip(y.chunks_exact_mut(len)))
        .enumerate()
    {
        let c = bc % channels;
        let (m, s) = (mean[c], inv_std[c]);
        let (g, b) = (gamma.data()[c].as_f64(), beta.data()[c].as_f64());
        for ((&xv, h), yv) in row.iter().zip(hrow.iter_mut()).zip(yrow.iter_mut()) {
            let nv = (xv.as_f64() - m) * s;
            *h = T::from_f64_lossy(nv);
            *yv = T::from_f64_lossy(g * nv + b);
        }
    }
    let cache = BatchNormCache {
        normalized: Tensor::new(x.shape(), xhat)?,
        inv_std,
        mean,
        var,
    };
    Ok((Tensor::new(x.shape(), y)?, cache))
}

pub fn batchnorm1d_eval<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let (_, channels, len) = x.dims3("batchnorm1d")?;
    check_affine(channels, gamma, beta)?;
    check_affine(channels, running_mean, running_var)?;
    let mut y = x.clone();
    for (bc, row) in y.data_mut().chunks_exact_mut(len).enumerate() {
        let c = bc % channels;
        let s = 1.0 / (running_var.data()[c].as_f64() + eps).sqrt();
        let scale = gamma.data()[c].as_f64() * s;
        let shift = beta.data()[c].as_f64() - running_mean.data()[c].as_f64() * scale;
        let (scale, shift) = (T::from_f64_lossy(scale), T::from_f64_lossy(shift));
        row.iter_mut().for_each(|v| *v = *v * scale + shift);
    }
    Ok(y)
}

fn check_affine<T: Scalar>(channels: usize, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != [channels] || b.shape() != [channels] {
        return Err(Error::shape(
            "batchnorm1d parameters",
            a.shape(),
            &[channels],
        ));
    }
    Ok(())
}

/// Returns `(grad_input, grad_gamma, grad_beta)`.
pub fn batchnorm1d_backward<T: Scalar>(
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (batch, channels, len) = cache.normalized.dims3("batchnorm1d backward")?;
    if grad_out.shape() != cache.normalized.shape() {
        return Err(Error::shape(
            "batchnorm1d backward",
            grad_out.shape(),
            cache.normalized.shape(),
        ));
    }
    let n = (batch * len) as f64;
    let mut dgamma = vec![0.0f64; channels];
    let mut dbeta = vec![0.0f64; channels];
    for (bc, (g, h)) in grad_out
        .data()
        .chunks_exact(len)
        .zip(cache.normalized.data().chunks_exact(len))
        .enumerate()
    {
        let c = bc % channels;
        for (&gv, &hv) in g.iter().zip(h) {
            dbeta[c] += gv.as_f64();
            dgamma[c] += gv.as_f64() * hv.as_f64();
        }
    }
    let mut dx = vec![T::zero(); grad_out.len()];
    for (bc, ((g, h), d)) in grad_out
        .data()
        .chunks_exact(len)
        .zip(cache.normalized.data().chunks_exact(len))
        .zip(dx.chunks_exact_mut(len))
        .enumerate()
    {
        let c = bc % channels;
        let k = gamma.data()[c].as_f64() * cache.inv_std[c] / n;
        for ((&gv, &hv), dv) in g.iter().zip(h).zip(d.iter_mut()) {
            *dv = T::from_f64_lossy(k * (n * gv.as_f64() - dbeta[c] - hv.as_f64() * dgamma[c]));
        }
    }
    let cast = |v: Vec<f64>| v.into_iter().map(T::from_f64_lossy).collect::<Vec<T>>();
    Ok((
        Tensor::new(grad_out.shape(), dx)?,
        Tensor::new(&[channels], cast(dgamma))?,
        Tensor::new(&[channels], cast(dbeta))?,
    ))
}

/// Max pooling; also returns the flat input index of every selected element.
pub fn maxpool1d<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (batch, channels, len) = x.dims3("maxpool1d")?;
    let out_len = out_len_or_err("maxpool1d", len, window, stride, 0)?;
    let mut out = Vec::with_capacity(batch * channels * out_len);
    let mut argmax = Vec::with_capacity(batch * channels * out_len);
    for (bc, row) in x.data().chunks_exact(len).enumerate() {
        for t in 0..out_len {
            let start = t * stride;
            let mut best = start;
            for i in start + 1..start + window {
                if row[i] > row[best] {
                    best = i;
                }
            }
            out.push(row[best]);
            argmax.push(bc * len + best);
        }
    }
    Ok((Tensor::new(&[batch, channels, out_len], out)?, argmax))
}

pub fn maxpool1d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::shape(
            "maxpool1d backward",
            grad_out.shape(),
            &[argmax.len()],
        ));
    }
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(dx)
}

/// `y = x W^T + b` with `weight` `[out, in]`.
pub fn dense<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, inputs) = x.dims2("dense")?;
    let (outputs, w_in) = weight.dims2("dense weight")?;
    if w_in != inputs {
        return Err(Error::shape("dense", x.shape(), weight.shape()));
    }
    if bias.shape() != [outputs] {
        return Err(Error::shape("dense bias", bias.shape(), &[outputs]));
    }
    let mut y = vec![T::zero(); batch * outputs];
    for row in y.chunks_exact_mut(outputs) {
        row.copy_from_slice(bias.data());
    }
    gemm(
        T::one(),
        Mat::new(x.data(), batch, inputs),
        Mat::new(weight.data(), outputs, inputs).t(),
        T::one(),
        &mut y,
    );
    Tensor::new(&[batch, outputs], y)
}

/// Returns `(grad_input, grad_weight, grad_bias)`.
pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (batch, inputs) = x.dims2("dense backward")?;
    let (outputs, _) = weight.dims2("dense backward weight")?;
    if grad_out.shape() != [batch, outputs] {
        return Err(Error::shape(
            "dense backward",
            grad_out.shape(),
            &[batch, outputs],
        ));
    }
    let g = Mat::new(grad_out.data(), batch, outputs);
    let mut dx = vec![T::zero(); batch * inputs];
    gemm(
        T::one(),
        g,
        Mat::new(weight.data(), outputs, inputs),
        T::zero(),
        &mut dx,
    );
    let mut dw = vec![T::zero(); outputs * inputs];
    gemm(
        T::one(),
        g.t(),
        Mat::new(x.data(), batch, inputs),
        T::zero(),
        &mut dw,
    );
    let mut db = vec![T::zero(); outputs];
    for row in grad_out.data().chunks_exact(outputs) {
        for (d, &v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
    Ok((
        Tensor::new(x.shape(), dx)?,
        Tensor::new(weight.shape(), dw)?,
        Tensor::new(&[outputs], db)?,
    ))
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn swish<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v * sigmoid(v))
}

/// `dy * s(x) * (1 + x * (1 - s(x)))`.
pub fn swish_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::shape("swish backward", x.shape(), grad_out.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| {
            let s = sigmoid(v);
            g * s * (T::one() + v * (T::one() - s))
        })
        .collect();
    Tensor::new(x.shape(), data)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::shape("relu backward", x.shape(), grad_out.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}

/// `[batch, channels, length] -> [batch, channels]` mean over length.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, channels, len) = x.dims3("global_avg_pool")?;
    if len == 0 {
        return Err(Error::param("global_avg_pool over an empty length"));
    }
    let scale = T::one() / T::from_usize(len).unwrap();
    let data = x
        .data()
        .chunks_exact(len)
        .map(|row| row.iter().copied().sum::<T>() * scale)
        .collect();
    Tensor::new(&[batch, channels], data)
}

pub fn global_avg_pool_backward<T: Scalar>(grad_out: &Tensor<T>, len: usize) -> Result<Tensor<T>> {
    let (batch, channels) = grad_out.dims2("global_avg_pool backward")?;
    let scale = T::one() / T::from_usize(len).unwrap();
    let mut data = Vec::with_capacity(batch * channels * len);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g * scale, len));
    }
    Tensor::new(&[batch, channels, len], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(shape: [usize; 3], v: &[f64]) -> Tensor<f64> {
        Tensor::new(&shape, v.to_vec()).unwrap()
    }

    /// Direct triple-loop convolution used as the reference.
    fn naive_conv(
        x: &Tensor<f64>,
        w: &Tensor<f64>,
        b: &[f64],
        stride: usize,
        padding: usize,
    ) -> Vec<f64> {
        let (bn, ci, l) = x.dims3("").unwrap();
        let (co, _, k) = w.dims3("").unwrap();
        let lo = (l + 2 * padding - k) / stride + 1;
        let mut out = vec![0.0; bn * co * lo];
        for bb in 0..bn {
            for o in 0..co {
                for t in 0..lo {
                    let mut acc = b[o];
                    for c in 0..ci {
                        for kk in 0..k {
                            let idx = (t * stride + kk) as isize - padding as isize;
                            if idx >= 0 && (idx as usize) < l {
                                acc += w.data()[(o * ci + c) * k + kk]
                                    * x.data()[(bb * ci + c) * l + idx as usize];
                            }
                        }
                    }
                    out[(bb * co + o) * lo + t] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = t3([1, 1, 4], &[1.0, -2.0, 3.5, 4.0]);
        let w = t3([1, 1, 1], &[1.0]);
        assert_eq!(conv1d(&x, &w, None, 1, 0).unwrap(), x);
    }

    #[test]
    fn box_kernel_same_padding() {
        let x = t3([1, 1, 3], &[1.0, 2.0, 3.0]);
        let w = t3([1, 1, 3], &[1.0, 1.0, 1.0]);
        let y = conv1d(&x, &w, None, 1, 1).unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn output_length_formula() {
        assert_eq!(conv_out_len(4910, 15, 2, 7), Some(2455));
        assert_eq!(conv_out_len(10, 3, 1, 1), Some(10));
        assert_eq!(conv_out_len(2, 5, 1, 1), None);
        let x = t3([1, 1, 2], &[1.0, 2.0]);
        let w = t3([1, 1, 5], &[1.0; 5]);
        assert!(conv1d(&x, &w, None, 1, 1).is_err());
    }

    #[test]
    fn shape_error_names_both_shapes() {
        let x = t3([1, 2, 4], &[0.0; 8]);
        let w = t3([1, 3, 1], &[0.0; 3]);
        let msg = conv1d(&x, &w, None, 1, 0).unwrap_err().to_string();
        assert!(
            msg.contains("[1, 2, 4]") && msg.contains("[1, 3, 1]"),
            "{msg}"
        );
    }

    #[test]
    fn conv_matches_naive_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(b, ci, co, l, k, s, p) in &[
            (4, 8, 8, 64, 5, 1, 2),
            (2, 3, 5, 17, 4, 2, 1),
            (1, 1, 4, 33, 15, 2, 7),
            (3, 6, 2, 9, 1, 1, 0),
            (2, 2, 3, 10, 3, 3, 0),
        ] {
            let x = Tensor::from_fn(&[b, ci, l], |_| rng.gen_range(-1.0..1.0));
            let w = Tensor::from_fn(&[co, ci, k], |_| rng.gen_range(-1.0..1.0));
            let bias = Tensor::from_fn(&[co], |_| rng.gen_range(-1.0..1.0));
            let y = conv1d(&x, &w, Some(&bias), s, p).unwrap();
            let want = naive_conv(&x, &w, bias.data(), s, p);
            for (a, e) in y.data().iter().zip(&want) {
                assert!((a - e).abs() < 1e-10);
            }
            // f32 path
            let y32 = conv1d(&x.cast::<f32>(), &w.cast(), Some(&bias.cast()), s, p).unwrap();
            for (a, e) in y32.data().iter().zip(&want) {
                assert!((f64::from(*a) - e).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn depthwise_separable_with_one_channel_is_scaled_conv() {
        let x = t3([1, 1, 5], &[1.0, 2.0, -1.0, 0.5, 3.0]);
        let dw = t3([1, 1, 3], &[0.5, -1.0, 2.0]);
        let pw = t3([1, 1, 1], &[3.0]);
        let pb = Tensor::new(&[1], vec![0.0]).unwrap();
        let y = depthwise_separable_conv1d(&x, &dw, &pw, &pb, 1).unwrap();
        let direct = conv1d(&x, &dw, None, 1, 1).unwrap().map(|v| v * 3.0);
        assert_eq!(y, direct);
    }

    #[test]
    fn depthwise_matches_grouped_naive() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 11], |i| ((i * 7) % 13) as f64 - 6.0);
        let w = Tensor::<f64>::from_fn(&[3, 1, 5], |i| (i as f64) * 0.1 - 0.7);
        let y = depthwise_conv1d(&x, &w, 1, 2).unwrap();
        for c in 0..3 {
            let mut wc = [0.0; 3 * 5];
            wc[c * 5..c * 5 + 5].copy_from_slice(&w.data()[c * 5..c * 5 + 5]);
            let full = Tensor::new(&[3, 3, 5], {
                let mut v = vec![0.0; 45];
                v[(c * 3 + c) * 5..(c * 3 + c) * 5 + 5]
                    .copy_from_slice(&w.data()[c * 5..c * 5 + 5]);
                v
            })
            .unwrap();
            let ref_y = naive_conv(&x, &full, &[0.0; 3], 1, 2);
            for b in 0..2 {
                for t in 0..11 {
                    let i = (b * 3 + c) * 11 + t;
                    assert!((y.data()[i] - ref_y[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn maxpool_pairs() {
        let x = t3([1, 1, 4], &[1.0, 4.0, 2.0, 3.0]);
        let (y, idx) = maxpool1d(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.0, 3.0]);
        assert_eq!(idx, vec![1, 3]);
        let g = Tensor::new(&[1, 1, 2], vec![10.0, 20.0]).unwrap();
        let dx = maxpool1d_backward(x.shape(), &idx, &g).unwrap();
        assert_eq!(dx.data(), &[0.0, 10.0, 0.0, 20.0]);
    }

    #[test]
    fn activations_at_fixed_points() {
        let x = Tensor::new(&[3], vec![0.0f64, -3.0, 2.0]).unwrap();
        assert_eq!(swish(&x).data()[0], 0.0);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert!((sigmoid(-800.0f64)).is_finite());
        assert!((sigmoid(800.0f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_train_moments() {
        let x = Tensor::<f64>::from_fn(&[4, 2, 25], |i| {
            ((i * 31) % 17) as f64 * 0.3 + (i % 2) as f64
        });
        let gamma = Tensor::full(&[2], 1.0);
        let beta = Tensor::zeros(&[2]);
        let (y, _) = batchnorm1d_train(&x, &gamma, &beta, 1e-5).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|b| y.data()[(b * 2 + c) * 25..(b * 2 + c + 1) * 25].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|a| (a - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-4);
            assert!((v - 1.0).abs() < 1e-4);
        }
        let single = Tensor::<f64>::zeros(&[1, 2, 5]);
        assert!(batchnorm1d_train(&single, &gamma, &beta, 1e-5).is_err());
    }

    #[test]
    fn batchnorm_eval_with_unit_stats_is_affine() {
        let x = Tensor::<f64>::from_fn(&[2, 1, 3], |i| i as f64);
        let g = Tensor::full(&[1], 2.0);
        let b = Tensor::full(&[1], 0.5);
        let y = batchnorm1d_eval(
            &x,
            &g,
            &b,
            &Tensor::zeros(&[1]),
            &Tensor::full(&[1], 1.0),
            0.0,
        )
        .unwrap();
        for (a, e) in y.data().iter().zip(x.data()) {
            assert!((a - (2.0 * e + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn global_pool_round_trip_shapes() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 4], |i| i as f64);
        let y = global_avg_pool(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert_eq!(y.data()[0], 1.5);
        let dx = global_avg_pool_backward(&Tensor::full(&[2, 3], 4.0), 4).unwrap();
        assert!(dx.data().iter().all(|&v| v == 1.0));
    }
}
