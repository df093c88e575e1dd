//! Training loss terms and evaluation statistics on a toy batch.

use ibinet::loss::{weighted_loss, LossTerm, LossWeights};
use ibinet::metrics::{
    bland_altman, pearson_r, rmse, weighted_metric, AgreementUnit, MetricWeights,
};
use ibinet::nn::Tensor;

pub fn main() -> ibinet::Result<()> {
    let target: Vec<f64> = (0..14)
        .map(|i| 0.7 + 0.05 * (i as f64 * 0.9).sin())
        .collect();
    let pred: Vec<f64> = target
        .iter()
        .enumerate()
        .map(|(i, t)| t + 0.02 * ((i % 3) as f64 - 1.0))
        .collect();
    let (p, t) = (
        Tensor::new(&[2, 7], pred.clone())?,
        Tensor::new(&[2, 7], target.clone())?,
    );

    let (loss, grad) = weighted_loss(&p, &t, &LossWeights::default())?;
    println!(
        "weighted loss {loss:.6e}, gradient norm {:.3e}",
        grad.data().iter().map(|g| g * g).sum::<f64>().sqrt()
    );
    for term in [
        LossTerm::Correlation,
        LossTerm::Huber,
        LossTerm::Squared,
        LossTerm::Absolute,
    ] {
        let (v, _) = weighted_loss(&p, &t, &LossWeights::only(term))?;
        println!("  {term:?}: {v:.6e}");
    }

    println!("r = {:.4}", pearson_r(&pred, &target)?);
    println!("rmse = {:.2} ms", 1000.0 * rmse(&pred, &target)?);
    println!(
        "selection metric = {:.5}",
        weighted_metric(&pred, &target, &MetricWeights::default())?
    );
    let ba = bland_altman(&pred, &target, AgreementUnit::Bpm)?;
    println!(
        "Bland-Altman: bias {:+.2} bpm, limits [{:.2}, {:.2}] bpm over {} pairs",
        ba.mean_diff, ba.loa_low, ba.loa_high, ba.n
    );
    Ok(())
}
