//! Turns noisy overlapping window predictions into one smoothed IBI per beat
//! and shows how much each stage removes.

use ibinet::metrics::rmse;
use ibinet::postprocess::{median_filter, moving_average, rolling_average, WindowPredictions};
use ibinet::windowing::TARGET_COUNT;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn main() -> ibinet::Result<()> {
    let beats = 120;
    let truth: Vec<f64> = (0..beats)
        .map(|k| 0.75 + 0.08 * (k as f64 / 15.0).sin())
        .collect();
    let noise = Normal::new(0.0, 0.04).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let windows = (0..=beats - TARGET_COUNT)
        .map(|j| {
            let y = std::array::from_fn(|i| truth[j + i] + noise.sample(&mut rng));
            (j as u32, y)
        })
        .collect();
    let preds = WindowPredictions::new(windows)?;

    let flat_truth: Vec<f64> = preds
        .windows()
        .iter()
        .flat_map(|(j, _)| truth[*j as usize..*j as usize + TARGET_COUNT].to_vec())
        .collect();
    println!(
        "raw window slots   rmse {:5.1} ms",
        1000.0 * rmse(&preds.flat(), &flat_truth)?
    );

    let rolled = rolling_average(&preds);
    println!(
        "rolling average    rmse {:5.1} ms",
        1000.0 * rmse(&rolled.seconds, &truth)?
    );
    let median = median_filter(&rolled, 5)?;
    println!(
        "+ median(5)        rmse {:5.1} ms",
        1000.0 * rmse(&median.seconds, &truth)?
    );
    let smooth = moving_average(&median, 6)?;
    println!(
        "+ moving avg(6)    rmse {:5.1} ms",
        1000.0 * rmse(&smooth.seconds, &truth)?
    );
    Ok(())
}
