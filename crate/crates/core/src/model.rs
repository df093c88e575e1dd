//! Network assembly from a textual architecture descriptor, plus the binary
//! checkpoint format.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{
    Activation, ActivationKind, AdamState, BatchNorm1d, Conv1d, Dense, DepthwiseSeparable, Flatten,
    GlobalAvgPool, Layer, MaxPool1d, Mode, Param, Scalar, Tensor,
};
use crate::seed;
use crate::windowing::TARGET_COUNT;

/// Default model input length in samples.
pub const INPUT_LEN: usize = 4910;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    BatchNorm,
    /// Padding is `kernel / 2`.
    Conv {
        channels: usize,
        kernel: usize,
        stride: usize,
        activation: Option<ActivationKind>,
    },
    DwSep {
        channels: usize,
        kernel: usize,
        activation: Option<ActivationKind>,
    },
    MaxPool {
        size: usize,
    },
    GlobalAvgPool,
    Flatten,
    Dense {
        units: usize,
        activation: Option<ActivationKind>,
    },
}

impl LayerSpec {
    fn kind(&self) -> &'static str {
        match self {
            LayerSpec::BatchNorm => "bn",
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::DwSep { .. } => "dwsep",
            LayerSpec::MaxPool { .. } => "pool",
            LayerSpec::GlobalAvgPool => "gap",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }

    fn activation(&self) -> Option<ActivationKind> {
        match *self {
            LayerSpec::Conv { activation, .. }
            | LayerSpec::DwSep { activation, .. }
            | LayerSpec::Dense { activation, .. } => activation,
            _ => None,
        }
    }
}

fn act_name(a: Option<ActivationKind>) -> &'static str {
    match a {
        Some(ActivationKind::Swish) => "swish",
        Some(ActivationKind::Relu) => "relu",
        None => "linear",
    }
}

fn parse_act(s: &str) -> Option<Option<ActivationKind>> {
    match s {
        "swish" => Some(Some(ActivationKind::Swish)),
        "relu" => Some(Some(ActivationKind::Relu)),
        "linear" => Some(None),
        _ => None,
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::BatchNorm | LayerSpec::GlobalAvgPool | LayerSpec::Flatten => {
                f.write_str(self.kind())
            }
            LayerSpec::Conv {
                channels,
                kernel,
                stride,
                activation,
            } => write!(
                f,
                "conv:{channels}:{kernel}:{stride}:{}",
                act_name(activation)
            ),
            LayerSpec::DwSep {
                channels,
                kernel,
                activation,
            } => write!(f, "dwsep:{channels}:{kernel}:{}", act_name(activation)),
            LayerSpec::MaxPool { size } => write!(f, "pool:{size}"),
            LayerSpec::Dense { units, activation } => {
                write!(f, "dense:{units}:{}", act_name(activation))
            }
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("unrecognized layer descriptor `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<usize> {
            parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad)
        };
        let act = |i: usize| -> Result<Option<ActivationKind>> {
            match parts.get(i) {
                None => Ok(None),
                Some(p) => parse_act(p).ok_or_else(bad),
            }
        };
        let spec = match parts[0] {
            "bn" if parts.len() == 1 => LayerSpec::BatchNorm,
            "gap" if parts.len() == 1 => LayerSpec::GlobalAvgPool,
            "flatten" if parts.len() == 1 => LayerSpec::Flatten,
            "conv" if (4..=5).contains(&parts.len()) => LayerSpec::Conv {
                channels: num(1)?,
                kernel: num(2)?,
                stride: num(3)?,
                activation: act(4)?,
            },
            "dwsep" if (3..=4).contains(&parts.len()) => LayerSpec::DwSep {
                channels: num(1)?,
                kernel: num(2)?,
                activation: act(3)?,
            },
            "pool" if parts.len() == 2 => LayerSpec::MaxPool { size: num(1)? },
            "dense" if (2..=3).contains(&parts.len()) => LayerSpec::Dense {
                units: num(1)?,
                activation: act(2)?,
            },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

/// Ordered layer list plus the input length.
///
/// Textual form: `input=4910;bn;conv:16:15:2:swish;pool:2;...;dense:7:linear`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub input_len: usize,
    pub layers: Vec<LayerSpec>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        use ActivationKind::{Relu, Swish};
        use LayerSpec::*;
        ArchConfig {
            input_len: INPUT_LEN,
            layers: vec![
                BatchNorm,
                Conv {
                    channels: 16,
                    kernel: 15,
                    stride: 2,
                    activation: Some(Swish),
                },
                MaxPool { size: 2 },
                DwSep {
                    channels: 32,
                    kernel: 9,
                    activation: Some(Swish),
                },
                MaxPool { size: 2 },
                DwSep {
                    channels: 64,
                    kernel: 9,
                    activation: Some(Swish),
                },
                MaxPool { size: 2 },
                DwSep {
                    channels: 64,
                    kernel: 7,
                    activation: Some(Swish),
                },
                MaxPool { size: 2 },
                DwSep {
                    channels: 128,
                    kernel: 5,
                    activation: Some(Swish),
                },
                GlobalAvgPool,
                Dense {
                    units: 1664,
                    activation: Some(Relu),
                },
                Dense {
                    units: 512,
                    activation: Some(Relu),
                },
                Dense {
                    units: TARGET_COUNT,
                    activation: None,
                },
            ],
        }
    }
}

impl fmt::Display for ArchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input={}", self.input_len)?;
        for l in &self.layers {
            write!(f, ";{l}")?;
        }
        Ok(())
    }
}

impl FromStr for ArchConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';').map(str::trim).filter(|p| !p.is_empty());
        let input_len = parts
            .next()
            .and_then(|p| p.strip_prefix("input="))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::param("architecture must start with `input=<len>`"))?;
        let layers = parts.map(str::parse).collect::<Result<Vec<_>>>()?;
        let arch = ArchConfig { input_len, layers };
        arch.validate()?;
        Ok(arch)
    }
}

impl ArchConfig {
    /// Per-layer output shapes for a batch of one, excluding the input.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let arch_err = |layer: usize, spec: &LayerSpec, reason: String| Error::Architecture {
            layer,
            kind: spec.to_string(),
            reason,
        };
        if self.input_len == 0 {
            return Err(Error::param("input length must be positive"));
        }
        let mut shape = vec![1, 1, self.input_len];
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let seq = shape.len() == 3;
            let need_seq = |shape: &[usize]| {
                if seq {
                    Ok(())
                } else {
                    Err(arch_err(
                        i,
                        spec,
                        format!("expects a sequence input, got {shape:?}"),
                    ))
                }
            };
            let shrink = |len: usize, k: usize, s: usize, p: usize| {
                crate::nn::ops::conv_out_len(len, k, s, p)
                    .filter(|&l| l > 0)
                    .ok_or_else(|| {
                        arch_err(
                            i,
                            spec,
                            format!("non-positive output length from input length {len}"),
                        )
                    })
            };
            let positive = |v: usize, what: &str| {
                if v == 0 {
                    Err(arch_err(i, spec, format!("{what} must be positive")))
                } else {
                    Ok(())
                }
            };
            shape = match *spec {
                LayerSpec::BatchNorm => {
                    need_seq(&shape)?;
                    shape
                }
                LayerSpec::Conv {
                    channels,
                    kernel,
                    stride,
                    ..
                } => {
                    need_seq(&shape)?;
                    positive(channels, "channels")?;
                    positive(kernel, "kernel")?;
                    positive(stride, "stride")?;
                    vec![1, channels, shrink(shape[2], kernel, stride, kernel / 2)?]
                }
                LayerSpec::DwSep {
                    channels, kernel, ..
                } => {
                    need_seq(&shape)?;
                    positive(channels, "channels")?;
                    positive(kernel, "kernel")?;
                    vec![1, channels, shrink(shape[2], kernel, 1, kernel / 2)?]
                }
                LayerSpec::MaxPool { size } => {
                    need_seq(&shape)?;
                    positive(size, "pool size")?;
                    vec![1, shape[1], shrink(shape[2], size, size, 0)?]
                }
                LayerSpec::GlobalAvgPool => {
                    need_seq(&shape)?;
                    vec![1, shape[1]]
                }
                LayerSpec::Flatten => {
                    need_seq(&shape)?;
                    vec![1, shape[1] * shape[2]]
                }
                LayerSpec::Dense { units, .. } => {
                    if seq {
                        return Err(arch_err(
                            i,
                            spec,
                            "dense needs gap or flatten before it".into(),
                        ));
                    }
                    positive(units, "units")?;
                    vec![1, units]
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        match self.layers.first() {
            Some(LayerSpec::BatchNorm) => {}
            Some(other) => {
                return Err(Error::Architecture {
                    layer: 0,
                    kind: other.to_string(),
                    reason: "the first layer must be batch normalization".into(),
                })
            }
            None => return Err(Error::param("architecture has no layers")),
        }
        let last = self.layers.len() - 1;
        match self.layers[last] {
            LayerSpec::Dense { units, .. } if units == TARGET_COUNT => {}
            other => {
                return Err(Error::Architecture {
                    layer: last,
                    kind: other.to_string(),
                    reason: format!("the last layer must be dense with {TARGET_COUNT} units"),
                })
            }
        }
        self.shapes().map(|_| ())
    }

    /// Trainable parameter count implied by the descriptor.
    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        let mut c_in = 1;
        let mut total = 0;
        for (spec, shape) in self.layers.iter().zip(&shapes) {
            total += match *spec {
                LayerSpec::BatchNorm => 2 * c_in,
                LayerSpec::Conv {
                    channels, kernel, ..
                } => c_in * channels * kernel + channels,
                LayerSpec::DwSep {
                    channels, kernel, ..
                } => c_in * kernel + c_in * channels + channels,
                LayerSpec::Dense { units, .. } => c_in * units + units,
                _ => 0,
            };
            c_in = shape[1];
        }
        Ok(total)
    }
}

/// A built network. `T` is `f32` for training and `f64` for gradient checks.
pub struct Model<T: Scalar = f32> {
    arch: ArchConfig,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> Model<T> {
    pub fn build(arch: &ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.shapes()?;
        let mut rng = seed::rng(seed, &[seed::INIT]);
        let mut layers: Vec<Box<dyn Layer<T>>> = Vec::new();
        let mut c_in = 1;
        for (spec, shape) in arch.layers.iter().zip(&shapes) {
            layers.push(match *spec {
                LayerSpec::BatchNorm => Box::new(BatchNorm1d::new(c_in)),
                LayerSpec::Conv {
                    channels,
                    kernel,
                    stride,
                    ..
                } => Box::new(Conv1d::new(
                    c_in,
                    channels,
                    kernel,
                    stride,
                    kernel / 2,
                    &mut rng,
                )),
                LayerSpec::DwSep {
                    channels, kernel, ..
                } => Box::new(DepthwiseSeparable::new(c_in, channels, kernel, &mut rng)),
                LayerSpec::MaxPool { size } => Box::new(MaxPool1d::new(size, size)),
                LayerSpec::GlobalAvgPool => Box::new(GlobalAvgPool::default()),
                LayerSpec::Flatten => Box::new(Flatten::default()),
                LayerSpec::Dense { units, .. } => Box::new(Dense::new(c_in, units, &mut rng)),
            });
            if let Some(a) = spec.activation() {
                layers.push(Box::new(Activation::new(a)));
            }
            c_in = shape[1];
        }
        Ok(Model {
            arch: arch.clone(),
            layers,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        match *x.shape() {
            [_, 1, l] if l == self.arch.input_len => Ok(()),
            _ => Err(Error::shape(
                "model input",
                x.shape(),
                &[0, 1, self.arch.input_len],
            )),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Eval-mode forward without touching layer caches.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Backpropagates from the output gradient after a train-mode forward;
    /// returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Trainable parameters in declaration order.
    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Parameters and buffers with stable names, in declaration order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for p in layer.params() {
                out.push((format!("{i}.{}.{}", layer.kind(), p.name), &p.value));
            }
            for (name, b) in layer.buffers() {
                out.push((format!("{i}.{}.{name}", layer.kind()), b));
            }
        }
        out
    }

    fn visit_tensors_mut(
        &mut self,
        mut f: impl FnMut(String, &mut Tensor<T>) -> Result<()>,
    ) -> Result<()> {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let kind = layer.kind();
            for p in layer.params_mut() {
                f(format!("{i}.{kind}.{}", p.name), &mut p.value)?;
            }
            for (name, b) in layer.buffers_mut() {
                f(format!("{i}.{kind}.{name}"), b)?;
            }
        }
        Ok(())
    }

    /// Converts every tensor to another precision, keeping the architecture.
    pub fn cast<U: Scalar>(&self) -> Result<Model<U>> {
        let mut m = Model::<U>::build(&self.arch, 0)?;
        let mut src = self.named_tensors().into_iter();
        m.visit_tensors_mut(|_, dst| {
            *dst = src.next().expect("same architecture").1.cast();
            Ok(())
        })?;
        Ok(m)
    }
}

impl<T: Scalar> Layer<T> for Model<T> {
    fn kind(&self) -> &'static str {
        "model"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        Model::forward(self, x, mode)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.predict(x)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        Model::backward(self, grad_out)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [b, 1, l] if l == self.arch.input_len => Ok(vec![b, TARGET_COUNT]),
            _ => Err(Error::shape(
                "model input",
                input,
                &[0, 1, self.arch.input_len],
            )),
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        Model::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Model::params_mut(self)
    }
}

/// Training metadata stored with the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: u32,
    pub best_metric: f64,
    pub seed: u64,
}

pub struct Checkpoint {
    pub model: Model<f32>,
    pub meta: CheckpointMeta,
    pub adam: Option<AdamState<f32>>,
}

const CKPT_MAGIC: &[u8; 4] = b"IBCK";
const CKPT_VERSION: u16 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self, len: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(len)?)
            .map_err(|_| Error::CorruptCheckpoint("invalid UTF-8".into()))
    }

    fn tensor(&mut self) -> Result<(String, Tensor<f32>)> {
        let name_len = self.u16()? as usize;
        let name = self.str(name_len)?.to_string();
        let ndim = self.u8()? as usize;
        let shape = (0..ndim)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let bytes = self
            .take(n.checked_mul(4).ok_or_else(|| {
                Error::CorruptCheckpoint(format!("tensor {name} is too large"))
            })?)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((name, Tensor::new(&shape, data)?))
    }
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(t.shape().len() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a model with its metadata and optional optimizer state.
pub fn encode_checkpoint(
    model: &Model<f32>,
    meta: &CheckpointMeta,
    adam: Option<&AdamState<f32>>,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    let arch = model.arch.to_string();
    out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    out.extend_from_slice(arch.as_bytes());
    out.extend_from_slice(&meta.epoch.to_le_bytes());
    out.extend_from_slice(&meta.best_metric.to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());

    let mut blobs = model.named_tensors();
    let param_names: Vec<String> = model
        .layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            l.params()
                .into_iter()
                .map(move |p| format!("{i}.{}.{}", l.kind(), p.name))
        })
        .collect();
    match adam {
        Some(adam) => {
            out.push(1);
            out.extend_from_slice(&adam.step.to_le_bytes());
            for (name, m) in param_names.iter().zip(&adam.m) {
                blobs.push((format!("adam.m.{name}"), m));
            }
            for (name, v) in param_names.iter().zip(&adam.v) {
                blobs.push((format!("adam.v.{name}"), v));
            }
        }
        None => out.push(0),
    }
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (name, t) in &blobs {
        put_tensor(&mut out, name, t);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(&self.model, &self.meta, self.adam.as_ref())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 10 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..4] != CKPT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u16()?;
        if version != CKPT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported version {version}"
            )));
        }
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(corrupt("checksum mismatch"));
        }
        let arch_len = r.u32()? as usize;
        let arch: ArchConfig = r
            .str(arch_len)?
            .parse()
            .map_err(|e| Error::CorruptCheckpoint(format!("architecture: {e}")))?;
        let meta = CheckpointMeta {
            epoch: r.u32()?,
            best_metric: f64::from_bits(r.u64()?),
            seed: r.u64()?,
        };
        let adam_step = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            _ => return Err(corrupt("bad optimizer flag")),
        };
        let n_blobs = r.u32()? as usize;
        let mut blobs = Vec::with_capacity(n_blobs.min(4096));
        for _ in 0..n_blobs {
            blobs.push(r.tensor()?);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }

        let mut model = Model::<f32>::build(&arch, 0)?;
        let mut blobs = blobs.into_iter();
        model.visit_tensors_mut(|name, dst| {
            let (got, t) = blobs
                .next()
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name}")))?;
            if got != name || t.shape() != dst.shape() {
                return Err(Error::CorruptCheckpoint(format!(
                    "expected {name} {:?}, found {got} {:?}",
                    dst.shape(),
                    t.shape()
                )));
            }
            *dst = t;
            Ok(())
        })?;
        let adam = match adam_step {
            None => None,
            Some(step) => {
                let rest: Vec<Tensor<f32>> = blobs.map(|(_, t)| t).collect();
                let n = model.params().len();
                if rest.len() != 2 * n {
                    return Err(corrupt("optimizer state does not match parameters"));
                }
                let mut rest = rest.into_iter();
                let m: Vec<_> = rest.by_ref().take(n).collect();
                let v: Vec<_> = rest.collect();
                for (p, (mi, vi)) in model.params().iter().zip(m.iter().zip(&v)) {
                    if p.value.shape() != mi.shape() || p.value.shape() != vi.shape() {
                        return Err(corrupt("optimizer state shape mismatch"));
                    }
                }
                Some(AdamState { step, m, v })
            }
        };
        Ok(Checkpoint { model, meta, adam })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
