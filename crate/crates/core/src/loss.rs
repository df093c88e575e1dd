//! Weighted training loss with its analytic gradient.

use crate::error::{Error, Result};
use crate::metrics::co_moments;
use crate::nn::{Scalar, Tensor};

/// Weights on `(1 - r^2)`, Huber, squared error and absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub correlation: f64,
    pub huber: f64,
    pub squared: f64,
    pub absolute: f64,
    pub huber_delta: f64,
    /// Drop the correlation term instead of failing on single-row batches.
    pub allow_single_row: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            correlation: 0.002,
            huber: 1.0032,
            squared: 0.0096,
            absolute: 0.002,
            huber_delta: 1.0,
            allow_single_row: false,
        }
    }
}

impl LossWeights {
    /// Only one term active, with unit weight.
    pub fn only(term: LossTerm) -> Self {
        let mut w = LossWeights {
            correlation: 0.0,
            huber: 0.0,
            squared: 0.0,
            absolute: 0.0,
            ..Self::default()
        };
        match term {
            LossTerm::Correlation => w.correlation = 1.0,
            LossTerm::Huber => w.huber = 1.0,
            LossTerm::Squared => w.squared = 1.0,
            LossTerm::Absolute => w.absolute = 1.0,
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.correlation, self.huber, self.squared, self.absolute];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("loss weights must be finite and nonnegative"));
        }
        if ws.iter().all(|&w| w == 0.0) {
            return Err(Error::param("at least one loss weight must be positive"));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::param("huber delta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Correlation,
    Huber,
    Squared,
    Absolute,
}

fn huber_elem(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

/// Mean Huber loss.
pub fn huber(pred: &[f64], target: &[f64], delta: f64) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::param(
            "huber: series must be non-empty and equal length",
        ));
    }
    let s: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| huber_elem(p - t, delta))
        .sum();
    Ok(s / pred.len() as f64)
}

/// Loss value and gradient with respect to `pred`, both `[batch, 7]`.
///
/// The correlation is taken over all flattened (prediction, target) pairs
/// of the batch. Constant predictions give `r = 0` with no gradient from
/// that term.
pub fn weighted_loss<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    w: &LossWeights,
) -> Result<(f64, Tensor<T>)> {
    w.validate()?;
    if pred.shape() != target.shape() {
        return Err(Error::shape("weighted_loss", pred.shape(), target.shape()));
    }
    let (batch, _) = pred.dims2("weighted_loss")?;
    let use_corr = w.correlation > 0.0 && !(batch < 2 && w.allow_single_row);
    if batch < 2 && !w.allow_single_row {
        return Err(Error::param(format!(
            "weighted_loss needs a batch of at least 2, got {batch}"
        )));
    }
    let p: Vec<f64> = pred.data().iter().map(|v| v.as_f64()).collect();
    let t: Vec<f64> = target.data().iter().map(|v| v.as_f64()).collect();
    let n = p.len() as f64;

    let (sxy, sxx, syy) = co_moments(&p, &t);
    if syy == 0.0 && use_corr {
        return Err(Error::DegenerateSeries(
            "targets are constant across the batch".into(),
        ));
    }

    let mut loss = 0.0;
    let mut grad = vec![0.0f64; p.len()];
    for (i, (&pi, &ti)) in p.iter().zip(&t).enumerate() {
        let e = pi - ti;
        loss +=
            (w.huber * huber_elem(e, w.huber_delta) + w.squared * e * e + w.absolute * e.abs()) / n;
        let dh = if e.abs() <= w.huber_delta {
            e
        } else {
            w.huber_delta * e.signum()
        };
        let sign = if e == 0.0 { 0.0 } else { e.signum() };
        grad[i] = (w.huber * dh + w.squared * 2.0 * e + w.absolute * sign) / n;
    }

    if use_corr {
        if sxx > 0.0 {
            let norm = (sxx * syy).sqrt();
            let r = sxy / norm;
            loss += w.correlation * (1.0 - r * r);
            let (mp, mt) = (p.iter().sum::<f64>() / n, t.iter().sum::<f64>() / n);
            for (g, (&pi, &ti)) in grad.iter_mut().zip(p.iter().zip(&t)) {
                let dr = (ti - mt) / norm - r * (pi - mp) / sxx;
                *g += -2.0 * w.correlation * r * dr;
            }
        } else {
            loss += w.correlation;
        }
    }

    let grad = grad.into_iter().map(T::from_f64_lossy).collect();
    Ok((loss, Tensor::new(pred.shape(), grad)?))
}
