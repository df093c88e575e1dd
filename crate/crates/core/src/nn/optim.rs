//! Adam and the staged learning-rate schedule.

use crate::error::{Error, Result};

use super::{Param, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param<T>>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| {
                (
                    Tensor::zeros(p.value.shape()),
                    Tensor::zeros(p.value.shape()),
                )
            })
            .unzip();
        AdamState { step: 0, m, v }
    }
}

/// One bias-corrected Adam update over every parameter.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Param<T>],
    state: &mut AdamState<T>,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::param(format!(
            "adam: {} parameters but state for {}",
            params.len(),
            state.m.len()
        )));
    }
    for (p, m) in params.iter().zip(&state.m) {
        if p.value.shape() != m.shape() {
            return Err(Error::shape("adam", p.value.shape(), m.shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let step_size = T::from_f64_lossy(lr / c1);
    let inv_sqrt_c2 = T::from_f64_lossy(1.0 / c2.sqrt());
    let (b1, b2) = (
        T::from_f64_lossy(config.beta1),
        T::from_f64_lossy(config.beta2),
    );
    let eps = T::from_f64_lossy(config.eps);
    let one = T::one();
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let Param { value, grad, .. } = &mut **p;
        for (((w, &g), mi), vi) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (one - b1) * g;
            *vi = b2 * *vi + (one - b2) * g * g;
            *w -= step_size * *mi / (vi.sqrt() * inv_sqrt_c2 + eps);
        }
    }
    Ok(())
}

/// Piecewise-constant rates spread evenly over a run of `epochs`.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedSchedule {
    epochs: usize,
    rates: Vec<f64>,
}

impl StagedSchedule {
    pub const DEFAULT_RATES: [f64; 5] = [0.007, 0.0035, 0.0018, 7e-5, 7e-6];

    pub fn new(epochs: usize, rates: Vec<f64>) -> Result<Self> {
        if epochs == 0 || rates.is_empty() {
            return Err(Error::param(
                "schedule needs at least one epoch and one rate",
            ));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::param("learning rates must be positive"));
        }
        Ok(StagedSchedule { epochs, rates })
    }

    /// 200 epochs, 40 per stage.
    pub fn full() -> Self {
        Self::compressed(200).unwrap()
    }

    /// The default five stages squeezed into `epochs`.
    pub fn compressed(epochs: usize) -> Result<Self> {
        Self::new(epochs, Self::DEFAULT_RATES.to_vec())
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn rate(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.epochs {
            return Err(Error::param(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.epochs
            )));
        }
        let stage = (epoch * self.rates.len() / self.epochs).min(self.rates.len() - 1);
        Ok(self.rates[stage])
    }
}

/// Rate for `epoch` on the 200-epoch schedule.
pub fn lr_schedule(epoch: usize) -> Result<f64> {
    StagedSchedule::full().rate(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_boundaries() {
        assert_eq!(lr_schedule(0).unwrap(), 0.007);
        assert_eq!(lr_schedule(39).unwrap(), 0.007);
        assert_eq!(lr_schedule(40).unwrap(), 0.0035);
        assert_eq!(lr_schedule(85).unwrap(), 0.0018);
        assert_eq!(lr_schedule(125).unwrap(), 7e-5);
        assert_eq!(lr_schedule(199).unwrap(), 7e-6);
        assert!(lr_schedule(200).is_err());
    }

    #[test]
    fn compressed_has_six_epochs_per_stage() {
        let s = StagedSchedule::compressed(30).unwrap();
        let rates: Vec<f64> = (0..30).map(|e| s.rate(e).unwrap()).collect();
        for (i, chunk) in rates.chunks(6).enumerate() {
            assert!(chunk.iter().all(|&r| r == StagedSchedule::DEFAULT_RATES[i]));
        }
        assert_eq!(
            StagedSchedule::compressed(1).unwrap().rate(0).unwrap(),
            0.007
        );
    }

    fn scalar_param(v: f64, g: f64) -> Param<f64> {
        let mut p = Param::new("w", Tensor::full(&[1], v));
        p.grad = Tensor::full(&[1], g);
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_param(1.0, 1.0);
        let mut state = AdamState::new([&p]);
        adam_step(&mut [&mut p], &mut state, 0.1, &AdamConfig::default()).unwrap();
        assert!((p.value.data()[0] - 0.9).abs() < 1e-6);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar_param(0.3, 0.0);
        let mut state = AdamState::new([&p]);
        for _ in 0..5 {
            adam_step(&mut [&mut p], &mut state, 0.1, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p.value.data()[0], 0.3);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut p = scalar_param(0.0, 1.0);
        let mut state = AdamState::<f64>::new([]);
        assert!(adam_step(&mut [&mut p], &mut state, 0.1, &AdamConfig::default()).is_err());
    }
}
