//! File-level operations behind the `ibinet` subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::dataset::{prepare, PrepareConfig, PreparedDataset};
use crate::error::{Error, Result};
use crate::metrics::write_metric_csv;
use crate::model::Checkpoint;
use crate::postprocess::{postprocess_pipeline, read_window_csv, write_ibi_csv, IbiSeries};
use crate::sigfile::{list_signals, read_signal, read_signal_dir, signal_stem, write_signal};
use crate::signalgen::{synthesize_subject, SubjectProfile};
use crate::train::{evaluate, infer_signal, train, Evaluation, RunReport, TrainConfig};
use crate::windowing::{Partition, WindowConfig};

/// Process exit status for an error: 1 usage, 2 data, 3 numerical.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) | Error::Architecture { .. } => 1,
        Error::Numerical { .. } => 3,
        _ => 2,
    }
}

/// Writes one `.sig`/`.rpk` pair per profile; returns the `.sig` paths.
pub fn synth(
    profiles: &[(SubjectProfile, u32)],
    out_dir: &Path,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    profiles
        .iter()
        .map(|(profile, fs)| {
            let signal = synthesize_subject(profile, *fs, seed)?;
            info!(
                "subject {}: {} beats over {:.1} s",
                profile.subject_id,
                signal.r_peaks().len(),
                signal.duration()
            );
            write_signal(out_dir, &signal_stem(profile.subject_id), &signal)
        })
        .collect()
}

pub fn prepare_dir(
    signals_dir: &Path,
    config: &PrepareConfig,
    out: &Path,
) -> Result<PreparedDataset> {
    let signals = read_signal_dir(signals_dir)?;
    let ds = prepare(&signals, config)?;
    for p in [Partition::Train, Partition::Val, Partition::Test] {
        info!("{p:?}: {} windows", ds.count(p));
    }
    ds.write(out)?;
    Ok(ds)
}

/// Trains, writes the best checkpoint, scores it on the test partition when
/// that is non-empty, and writes the run report.
pub fn train_file(
    data: &Path,
    config: &TrainConfig,
    checkpoint_out: &Path,
    report_dir: &Path,
) -> Result<RunReport> {
    let ds = PreparedDataset::read(data)?;
    let mut config = config.clone();
    config.fold_id = Some(ds.split.fold_id);
    config.augment = !ds.augmented.is_empty();
    let outcome = train(&ds, &config)?;
    std::fs::write(checkpoint_out, &outcome.checkpoint)?;
    let mut report = outcome.report;
    let test = ds.partition(Partition::Test);
    if !test.is_empty() {
        let started = Instant::now();
        let best = Checkpoint::from_bytes(&outcome.checkpoint)?;
        let eval = evaluate(&best.model, &test, ds.split.fold_id)?;
        report.metrics = vec![eval.raw, eval.postprocessed];
        report
            .timings
            .push(("test_eval".into(), started.elapsed().as_secs_f64()));
    }
    report.write(report_dir)?;
    Ok(report)
}

/// Writes `metrics.csv`, `points.csv` and one IBI file per recording.
pub fn eval_file(
    checkpoint: &Path,
    data: &Path,
    partition: Partition,
    out_dir: &Path,
) -> Result<Evaluation> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let ds = PreparedDataset::read(data)?;
    if ckpt.model.arch().input_len != ds.window_len {
        return Err(Error::param(format!(
            "checkpoint expects {}-sample windows, dataset has {}",
            ckpt.model.arch().input_len,
            ds.window_len
        )));
    }
    let samples = ds.partition(partition);
    let eval = evaluate(&ckpt.model, &samples, ds.split.fold_id)?;
    std::fs::create_dir_all(out_dir)?;
    write_metric_csv(out_dir.join("metrics.csv"), &[eval.raw, eval.postprocessed])?;
    std::fs::write(out_dir.join("points.csv"), eval.points_csv())?;
    for r in &eval.recordings {
        write_ibi_csv(
            out_dir.join(format!("{}.csv", signal_stem(r.subject_id))),
            &r.predicted,
        )?;
    }
    Ok(eval)
}

/// Predicts every recording in `signals_dir`; recordings that cannot be
/// windowed are skipped with a warning.
pub fn infer_dir(checkpoint: &Path, signals_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let window = WindowConfig {
        window_len: ckpt.model.arch().input_len,
        max_segment: WindowConfig::default()
            .max_segment
            .min(ckpt.model.arch().input_len),
        ..WindowConfig::default()
    };
    let paths = list_signals(signals_dir)?;
    if paths.is_empty() {
        warn!("no .sig files in {}", signals_dir.display());
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for path in paths {
        let signal = read_signal(&path)?;
        match infer_signal(&ckpt.model, &signal, &window) {
            Ok(series) => {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                let out = out_dir.join(format!("{stem}.csv"));
                write_ibi_csv(&out, &series)?;
                written.push(out);
            }
            Err(Error::EmptyWindowSet(msg)) => warn!("{}: {msg}; skipped", path.display()),
            Err(e) => return Err(e),
        }
    }
    Ok(written)
}

/// Window predictions CSV in, smoothed IBI CSV out.
pub fn postprocess_file(input: &Path, output: &Path) -> Result<IbiSeries> {
    let series = postprocess_pipeline(&read_window_csv(input)?)?;
    write_ibi_csv(output, &series)?;
    Ok(series)
}
