//! Prints the default network layer by layer, then saves and reloads it.

use ibinet::model::{ArchConfig, Checkpoint, CheckpointMeta, Model};
use ibinet::nn::Tensor;

fn main() -> ibinet::Result<()> {
    let arch = ArchConfig::default();
    println!("{arch}\n");
    println!("{:<28} output shape", "layer");
    for (spec, shape) in arch.layers.iter().zip(arch.shapes()?) {
        println!("{:<28} {:?}", spec.to_string(), shape);
    }
    println!("\n{} parameters", arch.param_count()?);

    let model = Model::<f32>::build(&arch, 7)?;
    let meta = CheckpointMeta {
        epoch: 0,
        best_metric: f64::INFINITY,
        seed: 7,
    };
    let path = std::env::temp_dir().join("ibinet-example.ibck");
    Checkpoint {
        model,
        meta,
        adam: None,
    }
    .save(&path)?;
    let loaded = Checkpoint::load(&path)?;

    let x = Tensor::from_fn(&[2, 1, arch.input_len], |i| {
        ((i % 97) as f32 / 48.0 - 1.0).sin()
    });
    let y = loaded.model.predict(&x)?;
    println!(
        "reloaded {} bytes from {}; first prediction row {:?}",
        std::fs::metadata(&path)?.len(),
        path.display(),
        &y.data()[..7]
    );
    Ok(())
}
