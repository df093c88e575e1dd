//! Leave-one-subject-out training on the synthetic cohort, followed by
//! inference on the held-out recording.
//!
//! ```text
//! cargo run --release --example train_fold -- --fold 1 --epochs 30 --duration 300
//! cargo run --release --example train_fold -- --fold 3 --augment
//! ```
//!
//! Defaults are small so the example finishes in a couple of minutes.

use ibinet::dataset::{prepare, PrepareConfig};
use ibinet::metrics::METRIC_CSV_HEADER;
use ibinet::model::Checkpoint;
use ibinet::signalgen::{synthesize_subject, SubjectProfile};
use ibinet::train::{evaluate, infer_signal, train, TrainConfig};
use ibinet::windowing::{Partition, WindowConfig};

struct Args {
    fold: u32,
    epochs: usize,
    duration: f64,
    augment: bool,
    seed: u64,
}

fn parse_args() -> Args {
    let mut a = Args {
        fold: 1,
        epochs: 5,
        duration: 90.0,
        augment: false,
        seed: 0,
    };
    let mut it = std::env::args().skip(1);
    while let Some(flag) = it.next() {
        let mut value = || it.next().expect("flag needs a value");
        match flag.as_str() {
            "--fold" => a.fold = value().parse().expect("fold"),
            "--epochs" => a.epochs = value().parse().expect("epochs"),
            "--duration" => a.duration = value().parse().expect("duration"),
            "--seed" => a.seed = value().parse().expect("seed"),
            "--augment" => a.augment = true,
            other => panic!("unknown flag {other}"),
        }
    }
    a
}

fn main() -> ibinet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = parse_args();

    let signals = SubjectProfile::default_cohort(args.duration)
        .iter()
        .map(|p| synthesize_subject(p, 500, args.seed))
        .collect::<ibinet::Result<Vec<_>>>()?;
    let ds = prepare(
        &signals,
        &PrepareConfig::new(args.fold, args.augment, args.seed),
    )?;
    println!(
        "fold {}: {} train / {} val / {} test windows (train subjects {:?})",
        args.fold,
        ds.count(Partition::Train),
        ds.count(Partition::Val),
        ds.count(Partition::Test),
        ds.split.train
    );

    let config = TrainConfig {
        seed: args.seed,
        epochs: args.epochs,
        ..TrainConfig::default()
    };
    let outcome = train(&ds, &config)?;
    let best = Checkpoint::from_bytes(&outcome.checkpoint)?;
    println!(
        "best epoch {} (validation metric {:.5})",
        best.meta.epoch, best.meta.best_metric
    );

    let eval = evaluate(&best.model, &ds.partition(Partition::Test), args.fold)?;
    println!(
        "{METRIC_CSV_HEADER}\n{}\n{}",
        eval.raw.to_csv(),
        eval.postprocessed.to_csv()
    );

    // Inference sees only the waveform; the annotations are used for scoring.
    let test_signal = signals
        .iter()
        .find(|s| s.subject_id() == args.fold)
        .unwrap();
    let series = infer_signal(&best.model, test_signal, &WindowConfig::default())?;
    let truth = test_signal.ibis();
    println!("beat  predicted  truth");
    for (k, p) in series.beat_index.iter().zip(&series.seconds).take(10) {
        println!("{k:>4}  {p:>9.3}  {:>5.3}", truth[*k as usize]);
    }
    Ok(())
}
