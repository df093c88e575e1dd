//! Central finite-difference checks in 64-bit precision.

use rand::Rng;

use crate::error::Result;

use super::{Layer, Mode, Tensor};

pub const STEP: f64 = 1e-4;

/// Denominator floor so that near-zero gradients are compared absolutely.
pub const MAGNITUDE_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_gradient(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Name of the tensor holding the worst element.
    pub worst: String,
    pub checked: usize,
}

impl GradCheckReport {
    fn new() -> Self {
        GradCheckReport {
            max_relative_error: 0.0,
            worst: String::new(),
            checked: 0,
        }
    }

    fn absorb(&mut self, name: &str, analytic: &[f64], numeric: &[f64]) {
        for (&a, &n) in analytic.iter().zip(numeric) {
            let e = relative_error(a, n);
            if e > self.max_relative_error || self.worst.is_empty() {
                self.max_relative_error = self.max_relative_error.max(e);
                self.worst = name.to_string();
            }
        }
        self.checked += analytic.len();
    }
}

/// Checks input and parameter gradients of a layer against the scalar
/// objective `sum(forward(x) * r)` for a random projection `r`.
pub fn check_layer<R: Rng + ?Sized>(
    layer: &mut dyn Layer<f64>,
    x: &Tensor<f64>,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let out_shape = layer.output_shape(x.shape())?;
    let proj = Tensor::from_fn(&out_shape, |_| rng.gen_range(-1.0..1.0));
    let objective =
        |y: &Tensor<f64>| -> f64 { y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum() };

    for p in layer.params_mut() {
        p.zero_grad();
    }
    let y = layer.forward(x, Mode::Train)?;
    let dx = layer.backward(&proj)?;
    drop(y);

    let mut report = GradCheckReport::new();
    let numeric_dx = numeric_gradient(
        |probe| {
            let xt = Tensor::new(x.shape(), probe.to_vec())?;
            Ok(objective(&layer.forward(&xt, Mode::Train)?))
        },
        x.data(),
        STEP,
    )?;
    report.absorb("input", dx.data(), &numeric_dx);

    let n_params = layer.params().len();
    for pi in 0..n_params {
        let (name, value, analytic) = {
            let p = &layer.params()[pi];
            (p.name, p.value.data().to_vec(), p.grad.data().to_vec())
        };
        let numeric = numeric_gradient(
            |probe| {
                layer.params_mut()[pi]
                    .value
                    .data_mut()
                    .copy_from_slice(probe);
                Ok(objective(&layer.forward(x, Mode::Train)?))
            },
            &value,
            STEP,
        )?;
        layer.params_mut()[pi]
            .value
            .data_mut()
            .copy_from_slice(&value);
        report.absorb(name, &analytic, &numeric);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_passes(layer: &mut dyn Layer<f64>, shape: &[usize], rng: &mut ChaCha8Rng) {
        let x = Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0));
        let r = check_layer(layer, &x, rng).unwrap();
        assert!(
            r.max_relative_error < 1e-3,
            "{}: {} in {}",
            layer.kind(),
            r.max_relative_error,
            r.worst
        );
    }

    #[test]
    fn every_layer_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_passes(
            &mut Conv1d::new(3, 4, 5, 2, 2, &mut rng),
            &[2, 3, 13],
            &mut rng,
        );
        assert_passes(
            &mut Conv1d::new(3, 4, 1, 1, 0, &mut rng),
            &[2, 3, 6],
            &mut rng,
        );
        assert_passes(
            &mut DepthwiseSeparable::new(3, 5, 5, &mut rng),
            &[2, 3, 9],
            &mut rng,
        );
        assert_passes(&mut BatchNorm1d::new(3), &[4, 3, 5], &mut rng);
        assert_passes(&mut Dense::new(6, 4, &mut rng), &[3, 6], &mut rng);
        assert_passes(
            &mut Activation::new(ActivationKind::Swish),
            &[2, 3, 4],
            &mut rng,
        );
        assert_passes(&mut MaxPool1d::new(2, 2), &[2, 2, 8], &mut rng);
        assert_passes(&mut GlobalAvgPool::default(), &[2, 3, 7], &mut rng);
        assert_passes(&mut Flatten::default(), &[2, 3, 4], &mut rng);
    }

    #[test]
    fn batchnorm_input_gradient_sums_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut bn = BatchNorm1d::<f64>::new(2);
        let x = Tensor::from_fn(&[3, 2, 5], |_| rng.gen_range(-2.0..2.0));
        bn.forward(&x, Mode::Train).unwrap();
        let g = Tensor::from_fn(&[3, 2, 5], |_| rng.gen_range(-1.0..1.0));
        let dx = bn.backward(&g).unwrap();
        for c in 0..2 {
            let s: f64 = (0..3)
                .flat_map(|b| dx.data()[(b * 2 + c) * 5..(b * 2 + c + 1) * 5].to_vec())
                .sum();
            assert!(s.abs() < 1e-10);
        }
    }
}
