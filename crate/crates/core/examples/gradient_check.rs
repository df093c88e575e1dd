//! Compares every layer's backward pass against central differences in f64.

use ibinet::nn::gradcheck::check_layer;
use ibinet::nn::{
    Activation, ActivationKind, BatchNorm1d, Conv1d, Dense, DepthwiseSeparable, Flatten,
    GlobalAvgPool, Layer, MaxPool1d, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn main() -> ibinet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut cases: Vec<(Box<dyn Layer<f64>>, Vec<usize>)> = vec![
        (Box::new(BatchNorm1d::new(3)), vec![4, 3, 6]),
        (
            Box::new(Conv1d::new(2, 4, 5, 2, 2, &mut rng)),
            vec![2, 2, 11],
        ),
        (
            Box::new(DepthwiseSeparable::new(3, 4, 3, &mut rng)),
            vec![2, 3, 8],
        ),
        (
            Box::new(Activation::new(ActivationKind::Swish)),
            vec![2, 3, 5],
        ),
        (
            Box::new(Activation::new(ActivationKind::Relu)),
            vec![2, 3, 5],
        ),
        (Box::new(MaxPool1d::new(2, 2)), vec![2, 3, 8]),
        (Box::new(GlobalAvgPool::default()), vec![2, 3, 5]),
        (Box::new(Flatten::default()), vec![2, 3, 5]),
        (Box::new(Dense::new(6, 3, &mut rng)), vec![3, 6]),
    ];
    println!(
        "{:<10} {:>8} {:>12}  worst tensor",
        "layer", "entries", "max rel err"
    );
    for (layer, shape) in cases.iter_mut() {
        let x = Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0));
        let report = check_layer(layer.as_mut(), &x, &mut rng)?;
        println!(
            "{:<10} {:>8} {:>12.2e}  {}",
            layer.kind(),
            report.checked,
            report.max_relative_error,
            report.worst
        );
    }
    Ok(())
}
