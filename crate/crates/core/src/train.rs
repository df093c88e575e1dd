//! Training loop, evaluation and inference on prepared windows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::PreparedDataset;
use crate::error::{Error, Result};
use crate::loss::{weighted_loss, LossWeights};
use crate::metrics::{weighted_metric, MetricRow, MetricWeights, Stage};
use crate::model::{encode_checkpoint, ArchConfig, CheckpointMeta, Model};
use crate::nn::{adam_step, AdamConfig, AdamState, Mode, StagedSchedule, Tensor};
use crate::postprocess::{postprocess_pipeline, rolling_average, IbiSeries, WindowPredictions};
use crate::seed;
use crate::signalgen::{resample, AnnotatedSignal};
use crate::windowing::{
    extract_windows, repad, Partition, WindowConfig, WindowSample, TARGET_COUNT,
};

/// Windows per inference chunk.
const EVAL_CHUNK: usize = 128;

/// Pad placement seed used by [`infer_signal`].
pub const INFER_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stage rates, spread evenly over `epochs`.
    pub learning_rates: Vec<f64>,
    pub loss: LossWeights,
    pub metric: MetricWeights,
    pub adam: AdamConfig,
    pub arch: ArchConfig,
    pub repad_per_epoch: bool,
    /// Recorded for the report; augmentation itself happens in `prepare`.
    pub augment: bool,
    pub fold_id: Option<u32>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 30,
            seed: 0,
            learning_rates: StagedSchedule::DEFAULT_RATES.to_vec(),
            loss: LossWeights::default(),
            metric: MetricWeights::default(),
            adam: AdamConfig::default(),
            arch: ArchConfig::default(),
            repad_per_epoch: false,
            augment: false,
            fold_id: None,
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

impl TrainConfig {
    /// Batch 1024 for 200 epochs.
    pub fn paper_scale() -> Self {
        TrainConfig {
            batch_size: 1024,
            epochs: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::param("batch_size must be at least 2"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        self.loss.validate()?;
        self.arch.validate()?;
        StagedSchedule::new(self.epochs, self.learning_rates.clone())?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<StagedSchedule> {
        StagedSchedule::new(self.epochs, self.learning_rates.clone())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::param(format!("invalid value `{value}` for `{key}`"));
        let f = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad())?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "learning_rates" => {
                self.learning_rates = value
                    .split(',')
                    .map(|r| r.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            "loss_correlation" => self.loss.correlation = f()?,
            "loss_huber" => self.loss.huber = f()?,
            "loss_squared" => self.loss.squared = f()?,
            "loss_absolute" => self.loss.absolute = f()?,
            "huber_delta" => self.loss.huber_delta = f()?,
            "metric_correlation" => self.metric.correlation = f()?,
            "metric_squared" => self.metric.squared = f()?,
            "metric_absolute" => self.metric.absolute = f()?,
            "adam_beta1" => self.adam.beta1 = f()?,
            "adam_beta2" => self.adam.beta2 = f()?,
            "adam_eps" => self.adam.eps = f()?,
            "arch" => self.arch = value.parse()?,
            "repad_per_epoch" => self.repad_per_epoch = parse_bool(value).ok_or_else(bad)?,
            "augment" => self.augment = parse_bool(value).ok_or_else(bad)?,
            "fold_id" => {
                self.fold_id = match value {
                    "" | "none" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                }
            }
            _ => return Err(Error::param(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file body; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("line {}: expected key=value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::param(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>, base: TrainConfig) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = base;
        cfg.apply_text(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(cfg)
    }

    /// Full snapshot in the same `key=value` syntax.
    pub fn to_text(&self) -> String {
        let rates: Vec<String> = self.learning_rates.iter().map(f64::to_string).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("learning_rates", rates.join(","));
        kv("loss_correlation", self.loss.correlation.to_string());
        kv("loss_huber", self.loss.huber.to_string());
        kv("loss_squared", self.loss.squared.to_string());
        kv("loss_absolute", self.loss.absolute.to_string());
        kv("huber_delta", self.loss.huber_delta.to_string());
        kv("metric_correlation", self.metric.correlation.to_string());
        kv("metric_squared", self.metric.squared.to_string());
        kv("metric_absolute", self.metric.absolute.to_string());
        kv("adam_beta1", self.adam.beta1.to_string());
        kv("adam_beta2", self.adam.beta2.to_string());
        kv("adam_eps", self.adam.eps.to_string());
        kv("arch", self.arch.to_string());
        kv("repad_per_epoch", self.repad_per_epoch.to_string());
        kv("augment", self.augment.to_string());
        kv(
            "fold_id",
            self.fold_id
                .map_or_else(|| "none".to_string(), |f| f.to_string()),
        );
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: TrainConfig,
    pub curves: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub metrics: Vec<MetricRow>,
    /// Wall-clock seconds per phase; kept out of every other file.
    pub timings: Vec<(String, f64)>,
}

impl RunReport {
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_metric,lr\n");
        for c in &self.curves {
            writeln!(s, "{},{},{},{}", c.epoch, c.train_loss, c.val_metric, c.lr).unwrap();
        }
        s
    }

    /// Writes `config.txt`, `curves.csv`, `metrics.csv` and `timing.txt`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut config = self.config.to_text();
        writeln!(
            config,
            "# best_epoch={} best_val_metric={}",
            self.best_epoch, self.best_metric
        )
        .unwrap();
        std::fs::write(dir.join("config.txt"), config)?;
        std::fs::write(dir.join("curves.csv"), self.curves_csv())?;
        if !self.metrics.is_empty() {
            crate::metrics::write_metric_csv(dir.join("metrics.csv"), &self.metrics)?;
        }
        let mut timing = String::from("phase,seconds\n");
        for (k, v) in &self.timings {
            writeln!(timing, "{k},{v:.3}").unwrap();
        }
        std::fs::write(dir.join("timing.txt"), timing)?;
        Ok(())
    }
}

pub struct TrainOutcome {
    /// Encoded checkpoint of the epoch with the lowest validation metric.
    pub checkpoint: Vec<u8>,
    pub best: CheckpointMeta,
    pub final_model: Model<f32>,
    pub report: RunReport,
}

fn batch_tensors(
    samples: &[&WindowSample],
    window_len: usize,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let b = samples.len();
    let mut x = Vec::with_capacity(b * window_len);
    let mut y = Vec::with_capacity(b * TARGET_COUNT);
    for s in samples {
        if s.input.len() != window_len {
            return Err(Error::shape("batch", &[s.input.len()], &[window_len]));
        }
        x.extend_from_slice(&s.input);
        y.extend_from_slice(&s.targets);
    }
    Ok((
        Tensor::new(&[b, 1, window_len], x)?,
        Tensor::new(&[b, TARGET_COUNT], y)?,
    ))
}

/// Eval-mode predictions in seconds, in input order.
pub fn predict_windows(
    model: &Model<f32>,
    samples: &[&WindowSample],
) -> Result<Vec<[f64; TARGET_COUNT]>> {
    let window_len = model.arch().input_len;
    let chunks: Vec<Vec<[f64; TARGET_COUNT]>> = samples
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let (x, _) = batch_tensors(chunk, window_len)?;
            let y = model.predict(&x)?;
            Ok(y.data()
                .chunks_exact(TARGET_COUNT)
                .map(|row| std::array::from_fn(|i| f64::from(row[i])))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn flat_targets(samples: &[&WindowSample]) -> Vec<f64> {
    samples
        .iter()
        .flat_map(|s| s.targets.iter().map(|&t| f64::from(t)))
        .collect()
}

fn validation_metric(model: &Model<f32>, val: &[&WindowSample], w: &MetricWeights) -> Result<f64> {
    let preds: Vec<f64> = predict_windows(model, val)?.into_iter().flatten().collect();
    weighted_metric(&preds, &flat_targets(val), w)
}

/// Trains on the training partition, selecting the epoch with the lowest
/// validation metric on raw window predictions.
pub fn train(ds: &PreparedDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.arch.input_len != ds.window_len {
        return Err(Error::param(format!(
            "architecture expects {} samples, dataset windows have {}",
            cfg.arch.input_len, ds.window_len
        )));
    }
    let mut train_set: Vec<WindowSample> = ds
        .partition(Partition::Train)
        .into_iter()
        .cloned()
        .collect();
    let val = ds.partition(Partition::Val);
    if train_set.len() < 2 || val.is_empty() {
        return Err(Error::param(format!(
            "need training and validation windows, have {} and {}",
            train_set.len(),
            val.len()
        )));
    }
    let schedule = cfg.schedule()?;
    let mut model = Model::<f32>::build(&cfg.arch, cfg.seed)?;
    let mut adam = AdamState::new(model.params());
    let started = Instant::now();
    let mut curves = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(CheckpointMeta, Vec<u8>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = schedule.rate(epoch)?;
        if cfg.repad_per_epoch {
            let mut rng = seed::rng(cfg.seed, &[seed::REPAD, epoch as u64]);
            for s in &mut train_set {
                repad(s, &mut rng);
            }
        }
        order.sort_unstable();
        order.shuffle(&mut seed::rng(cfg.seed, &[seed::SHUFFLE, epoch as u64]));

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let refs: Vec<&WindowSample> = idx.iter().map(|&i| &train_set[i]).collect();
            let (x, y) = batch_tensors(&refs, ds.window_len)?;
            model.zero_grad();
            let pred = model.forward(&x, Mode::Train)?;
            let numerical = |reason: String| Error::Numerical {
                epoch,
                batch: bi,
                reason,
            };
            if !pred.all_finite() {
                return Err(numerical("non-finite prediction".into()));
            }
            let (loss, grad) = weighted_loss(&pred, &y, &cfg.loss)?;
            if !loss.is_finite() {
                return Err(numerical(format!("loss is {loss}")));
            }
            model.backward(&grad)?;
            adam_step(&mut model.params_mut(), &mut adam, lr, &cfg.adam)?;
            loss_sum += loss;
            batches += 1;
        }
        let val_metric = validation_metric(&model, &val, &cfg.metric)?;
        if !val_metric.is_finite() {
            return Err(Error::Numerical {
                epoch,
                batch: 0,
                reason: format!("validation metric is {val_metric}"),
            });
        }
        let train_loss = loss_sum / batches.max(1) as f64;
        info!(
            "epoch {epoch:>3}  lr {lr:.1e}  train loss {train_loss:.6}  val metric {val_metric:.6}  ({:.0} s)",
            started.elapsed().as_secs_f64()
        );
        curves.push(EpochRecord {
            epoch,
            train_loss,
            val_metric,
            lr,
        });
        if best
            .as_ref()
            .is_none_or(|(m, _)| val_metric < m.best_metric)
        {
            let meta = CheckpointMeta {
                epoch: epoch as u32,
                best_metric: val_metric,
                seed: cfg.seed,
            };
            best = Some((meta, encode_checkpoint(&model, &meta, Some(&adam))));
        }
    }
    let (meta, checkpoint) = best.expect("at least one epoch ran");
    let report = RunReport {
        config: cfg.clone(),
        curves,
        best_epoch: meta.epoch as usize,
        best_metric: meta.best_metric,
        metrics: Vec::new(),
        timings: vec![("train".into(), started.elapsed().as_secs_f64())],
    };
    Ok(TrainOutcome {
        checkpoint,
        best: meta,
        final_model: model,
        report,
    })
}

/// Post-processed and ground-truth series of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingResult {
    pub subject_id: u32,
    pub predicted: IbiSeries,
    pub truth: IbiSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub raw: MetricRow,
    pub postprocessed: MetricRow,
    pub recordings: Vec<RecordingResult>,
}

impl Evaluation {
    /// One row per post-processed IBI: `subject_id,beat_index,predicted,truth`.
    pub fn points_csv(&self) -> String {
        let mut s = String::from("subject_id,beat_index,predicted_seconds,truth_seconds\n");
        for r in &self.recordings {
            for ((k, p), t) in r
                .predicted
                .beat_index
                .iter()
                .zip(&r.predicted.seconds)
                .zip(&r.truth.seconds)
            {
                writeln!(s, "{},{k},{p:.6},{t:.6}", r.subject_id).unwrap();
            }
        }
        s
    }
}

/// Scores given window predictions: raw over every window slot, and
/// post-processed per recording then concatenated across recordings.
pub fn evaluate_predictions(
    fold_id: u32,
    samples: &[&WindowSample],
    preds: &[[f64; TARGET_COUNT]],
) -> Result<Evaluation> {
    if samples.len() != preds.len() {
        return Err(Error::param("one prediction per window is required"));
    }
    if samples.is_empty() {
        return Err(Error::EmptyWindowSet("nothing to evaluate".into()));
    }
    let raw_pred: Vec<f64> = preds.iter().flatten().copied().collect();
    let raw = MetricRow::compute(fold_id, Stage::Raw, &raw_pred, &flat_targets(samples))?;

    type Row = (u32, [f64; TARGET_COUNT], [f64; TARGET_COUNT]);
    let mut groups: BTreeMap<u32, Vec<Row>> = BTreeMap::new();
    for (s, p) in samples.iter().zip(preds) {
        let t = std::array::from_fn(|i| f64::from(s.targets[i]));
        groups
            .entry(s.subject_id)
            .or_default()
            .push((s.first_beat_index, *p, t));
    }
    let mut recordings = Vec::with_capacity(groups.len());
    let (mut all_pred, mut all_true) = (Vec::new(), Vec::new());
    for (subject_id, mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        let predicted = postprocess_pipeline(&WindowPredictions::new(
            rows.iter().map(|r| (r.0, r.1)).collect(),
        )?)?;
        let truth = rolling_average(&WindowPredictions::new(
            rows.iter().map(|r| (r.0, r.2)).collect(),
        )?);
        all_pred.extend_from_slice(&predicted.seconds);
        all_true.extend_from_slice(&truth.seconds);
        recordings.push(RecordingResult {
            subject_id,
            predicted,
            truth,
        });
    }
    let postprocessed = MetricRow::compute(fold_id, Stage::Postprocessed, &all_pred, &all_true)?;
    Ok(Evaluation {
        raw,
        postprocessed,
        recordings,
    })
}

pub fn evaluate(model: &Model<f32>, samples: &[&WindowSample], fold_id: u32) -> Result<Evaluation> {
    let preds = predict_windows(model, samples)?;
    evaluate_predictions(fold_id, samples, &preds)
}

/// Windows one recording with a fixed pad seed, predicts, and
/// post-processes.
pub fn infer_signal(
    model: &Model<f32>,
    signal: &AnnotatedSignal,
    window: &WindowConfig,
) -> Result<IbiSeries> {
    let resampled;
    let signal = if signal.fs() == window.fs {
        signal
    } else {
        resampled = resample(signal, window.fs)?;
        &resampled
    };
    let windows = extract_windows(signal, window, INFER_SEED)?;
    if windows.is_empty() {
        return Err(Error::EmptyWindowSet(format!(
            "subject {}: every window was discarded",
            signal.subject_id()
        )));
    }
    let refs: Vec<&WindowSample> = windows.iter().collect();
    let preds = predict_windows(model, &refs)?;
    let wp = WindowPredictions::new(
        windows
            .iter()
            .zip(preds)
            .map(|(w, p)| (w.first_beat_index, p))
            .collect(),
    )?;
    postprocess_pipeline(&wp)
}
