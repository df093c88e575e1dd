//! Rolling-window sample extraction and subject-disjoint folds.
//!
//! A window spans eight consecutive R-peaks and carries the seven IBIs
//! between them as regression targets. Successive windows advance by one
//! R-peak, so every IBI away from the recording edges is covered by seven
//! windows. Segment boundaries are drawn at random between neighbouring
//! peaks, the segment is zero-padded at a random offset to a fixed input
//! length, and the signal region is z-scored.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::signalgen::AnnotatedSignal;

/// IBIs predicted per window.
pub const TARGET_COUNT: usize = 7;
/// R-peaks spanned by one window.
pub const PEAKS_PER_WINDOW: usize = TARGET_COUNT + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Padded input length.
    pub window_len: usize,
    /// Segments longer than this are discarded.
    pub max_segment: usize,
    /// Required sampling rate of source signals.
    pub fs: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 4910,
            max_segment: 4885,
            fs: 500,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_segment == 0 || self.max_segment > self.window_len {
            return Err(Error::param(format!(
                "max_segment {} must lie in 1..={}",
                self.max_segment, self.window_len
            )));
        }
        if self.window_len > usize::from(u16::MAX) {
            return Err(Error::param("window_len must fit the u16 pad offset"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub input: Vec<f32>,
    /// Seconds.
    pub targets: [f32; TARGET_COUNT],
    pub subject_id: u32,
    /// Index of the first of the window's eight R-peaks in its recording.
    pub first_beat_index: u32,
    pub pad_left: u16,
}

/// One window per R-peak stride.
///
/// Oversize segments are dropped with a warning, so the result can have
/// gaps in `first_beat_index`.
pub fn extract_windows(
    signal: &AnnotatedSignal,
    config: &WindowConfig,
    seed: u64,
) -> Result<Vec<WindowSample>> {
    config.validate()?;
    if signal.fs() != config.fs {
        return Err(Error::param(format!(
            "signal sampled at {} Hz, windowing expects {} Hz",
            signal.fs(),
            config.fs
        )));
    }
    let peaks = signal.r_peaks();
    if peaks.len() < PEAKS_PER_WINDOW {
        return Err(Error::EmptyWindowSet(format!(
            "subject {} has {} R-peaks, a window needs {PEAKS_PER_WINDOW}",
            signal.subject_id(),
            peaks.len()
        )));
    }
    let mut rng = seed::rng(seed, &[seed::WINDOWS, u64::from(signal.subject_id())]);
    let samples = signal.samples();
    let last_sample = samples.len() - 1;
    let fs = f64::from(signal.fs());
    let count = peaks.len() - PEAKS_PER_WINDOW + 1;
    let mut out = Vec::with_capacity(count);
    let mut dropped = 0usize;

    for j in 0..count {
        let first = peaks[j];
        let last = peaks[j + TARGET_COUNT];
        let left = if j == 0 {
            rng.gen_range(0..=first)
        } else {
            draw_between(&mut rng, peaks[j - 1], first, first)
        };
        let right = match peaks.get(j + PEAKS_PER_WINDOW) {
            Some(&next) => draw_between(&mut rng, last, next, last),
            None if last < last_sample => rng.gen_range(last + 1..=last_sample),
            None => last,
        };
        let segment = &samples[left..=right];
        // Drawn even for dropped windows so the stream stays aligned.
        let slack = config.window_len.saturating_sub(segment.len());
        let pad_left = rng.gen_range(0..=slack);
        if segment.len() > config.max_segment {
            dropped += 1;
            continue;
        }
        let mut input = vec![0.0f32; config.window_len];
        input[pad_left..pad_left + segment.len()].copy_from_slice(segment);
        normalize_region(&mut input[pad_left..pad_left + segment.len()]);

        let mut targets = [0.0f32; TARGET_COUNT];
        for (s, t) in targets.iter_mut().enumerate() {
            *t = ((peaks[j + s + 1] - peaks[j + s]) as f64 / fs) as f32;
        }
        out.push(WindowSample {
            input,
            targets,
            subject_id: signal.subject_id(),
            first_beat_index: j as u32,
            pad_left: pad_left as u16,
        });
    }
    if dropped > 0 {
        warn!(
            "subject {}: dropped {dropped} of {count} windows longer than {} samples",
            signal.subject_id(),
            config.max_segment
        );
    }
    Ok(out)
}

/// Uniform sample strictly between `lo` and `hi`, or `fallback` when they
/// are adjacent.
fn draw_between<R: Rng>(rng: &mut R, lo: usize, hi: usize, fallback: usize) -> usize {
    if hi > lo + 1 {
        rng.gen_range(lo + 1..hi)
    } else {
        fallback
    }
}

/// Places `segment` at a uniformly random offset in a zero vector of
/// `window_len`; returns the padded vector and the offset.
pub fn pad_window(segment: &[f32], window_len: usize, seed: u64) -> Result<(Vec<f32>, usize)> {
    let mut rng = seed::rng(seed, &[seed::REPAD]);
    pad_window_with(segment, window_len, &mut rng)
}

pub fn pad_window_with<R: Rng>(
    segment: &[f32],
    window_len: usize,
    rng: &mut R,
) -> Result<(Vec<f32>, usize)> {
    if segment.len() > window_len {
        return Err(Error::OversizeWindow {
            len: segment.len(),
            max: window_len,
        });
    }
    let pad_left = rng.gen_range(0..=window_len - segment.len());
    let mut padded = vec![0.0f32; window_len];
    padded[pad_left..pad_left + segment.len()].copy_from_slice(segment);
    Ok((padded, pad_left))
}

/// Index range from the first to the last nonzero sample.
pub fn signal_extent(window: &[f32]) -> Option<std::ops::Range<usize>> {
    let start = window.iter().position(|&v| v != 0.0)?;
    let end = window.iter().rposition(|&v| v != 0.0)? + 1;
    Some(start..end)
}

/// Z-scores the signal region of a padded window, leaving the padding at
/// exactly zero. The region is the span between the first and last nonzero
/// samples.
pub fn normalize(window: &[f32]) -> Vec<f32> {
    let mut out = window.to_vec();
    if let Some(r) = signal_extent(window) {
        normalize_region(&mut out[r]);
    }
    out
}

/// In-place z-score; a region with std below 1e-8 becomes zero.
pub fn normalize_region(region: &mut [f32]) {
    if region.is_empty() {
        return;
    }
    let n = region.len() as f64;
    let mean = region.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = region
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std < 1e-8 {
        region.fill(0.0);
    } else {
        for v in region.iter_mut() {
            *v = ((f64::from(*v) - mean) / std) as f32;
        }
    }
}

/// Re-draws the pad offset of an already padded window, keeping its signal
/// region intact.
pub fn repad<R: Rng>(sample: &mut WindowSample, rng: &mut R) {
    let len = sample.input.len();
    let Some(region) = signal_extent(&sample.input) else {
        return;
    };
    // Leading exact zeros inside the region are indistinguishable from
    // padding; anchor at the recorded offset instead.
    let start = usize::from(sample.pad_left).min(region.start);
    let segment = sample.input[start..region.end].to_vec();
    let (padded, pad_left) =
        pad_window_with(&segment, len, rng).expect("segment came from a window of this length");
    sample.input = padded;
    sample.pad_left = pad_left as u16;
}

/// Subject-disjoint train/validation/test partition for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_id: u32,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "val" | "validation" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(Error::param(format!("unknown partition {other:?}"))),
        }
    }
}

impl FoldSplit {
    pub fn partition_of(&self, subject_id: u32) -> Option<Partition> {
        if self.test.contains(&subject_id) {
            Some(Partition::Test)
        } else if self.val.contains(&subject_id) {
            Some(Partition::Val)
        } else if self.train.contains(&subject_id) {
            Some(Partition::Train)
        } else {
            None
        }
    }

    pub fn subjects(&self, partition: Partition) -> &[u32] {
        match partition {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }
}

/// Leave-one-subject-out split: `fold_id` is the test subject and roughly a
/// fifth of the rest (at least one) is held out for validation, chosen
/// pseudo-randomly from `(seed, fold_id)`. Eleven subjects give 8/2/1.
pub fn make_folds(subject_ids: &[u32], fold_id: u32, seed: u64) -> Result<FoldSplit> {
    let mut ids = subject_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if !ids.contains(&fold_id) {
        return Err(Error::param(format!("fold {fold_id} is not a subject id")));
    }
    let mut rest: Vec<u32> = ids.into_iter().filter(|&s| s != fold_id).collect();
    let n_val = if rest.is_empty() {
        0
    } else {
        ((rest.len() as f64 * 0.2).round() as usize).max(1)
    };
    let mut rng = seed::rng(seed, &[seed::FOLDS, u64::from(fold_id)]);
    rest.shuffle(&mut rng);
    let mut val = rest[..n_val].to_vec();
    let mut train = rest[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok(FoldSplit {
        fold_id,
        train,
        val,
        test: vec![fold_id],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::{synthesize_subject, SubjectProfile};

    fn constant_signal(ibi: f64, peaks: usize) -> AnnotatedSignal {
        let step = (ibi * 500.0).round() as usize;
        let len = step * (peaks - 1) + 40;
        let r: Vec<usize> = (0..peaks).map(|k| k * step).collect();
        let mut x = vec![0.1f32; len];
        for &p in &r {
            x[p] = 1.0;
        }
        AnnotatedSignal::new(x, 500, r, 2).unwrap()
    }

    #[test]
    fn window_count_and_constant_targets() {
        let s = constant_signal(0.7, 15);
        let w = extract_windows(&s, &WindowConfig::default(), 1).unwrap();
        assert_eq!(w.len(), 8);
        for (j, win) in w.iter().enumerate() {
            assert_eq!(win.first_beat_index, j as u32);
            assert_eq!(win.input.len(), 4910);
            assert!(win.targets.iter().all(|&t| t == 0.7f32));
        }
    }

    #[test]
    fn too_few_peaks() {
        let s = constant_signal(0.7, 7);
        assert!(matches!(
            extract_windows(&s, &WindowConfig::default(), 1),
            Err(Error::EmptyWindowSet(_))
        ));
    }

    #[test]
    fn wrong_rate_rejected() {
        let s = AnnotatedSignal::new(vec![0.0; 4000], 250, (0..9).map(|k| k * 400).collect(), 1)
            .unwrap();
        assert!(extract_windows(&s, &WindowConfig::default(), 1).is_err());
    }

    #[test]
    fn overlapping_targets_shift_by_one() {
        let p = SubjectProfile {
            duration: 40.0,
            ..SubjectProfile::default()
        };
        let s = synthesize_subject(&p, 500, 11).unwrap();
        let ibis = s.ibis();
        let w = extract_windows(&s, &WindowConfig::default(), 4).unwrap();
        assert_eq!(w.len(), s.r_peaks().len() - 7);
        for pair in w.windows(2) {
            assert_eq!(pair[0].targets[1..], pair[1].targets[..6]);
        }
        for win in &w {
            let j = win.first_beat_index as usize;
            for s in 0..TARGET_COUNT {
                assert_eq!(win.targets[s], ibis[j + s] as f32);
            }
        }
    }

    #[test]
    fn segment_contains_exactly_the_eight_peaks() {
        let s = constant_signal(0.6, 20);
        let w = extract_windows(&s, &WindowConfig::default(), 8).unwrap();
        for win in &w {
            let region = signal_extent(&win.input).unwrap();
            let len = region.len();
            // 7 IBIs of 300 samples plus at most one IBI of margin per side
            assert!((2100..=2100 + 2 * 299 + 1).contains(&len), "len {len}");
            assert!(len <= 4885);
        }
    }

    #[test]
    fn oversize_segments_are_dropped() {
        let cfg = WindowConfig {
            max_segment: 1350,
            ..WindowConfig::default()
        };
        let s = constant_signal(0.3, 30);
        let w = extract_windows(&s, &cfg, 3).unwrap();
        assert_eq!(w.len(), 23);
        let s = constant_signal(0.4, 30);
        let w = extract_windows(&s, &cfg, 3).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn pad_full_length_and_empty() {
        let seg: Vec<f32> = (0..4910).map(|i| i as f32).collect();
        let (p, left) = pad_window(&seg, 4910, 0).unwrap();
        assert_eq!(left, 0);
        assert_eq!(p, seg);
        let (p, _) = pad_window(&[], 4910, 0).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
        assert!(matches!(
            pad_window(&vec![1.0; 4911], 4910, 0),
            Err(Error::OversizeWindow {
                len: 4911,
                max: 4910
            })
        ));
    }

    #[test]
    fn pad_preserves_sum_and_adds_slack_zeros() {
        let seg: Vec<f32> = (0..4000).map(|i| 1.0 + (i % 7) as f32).collect();
        let (p, left) = pad_window(&seg, 4910, 3).unwrap();
        let sum_seg: f64 = seg.iter().map(|&v| f64::from(v)).sum();
        let sum_pad: f64 = p.iter().map(|&v| f64::from(v)).sum();
        assert_eq!(sum_seg, sum_pad);
        assert_eq!(p.iter().filter(|&&v| v == 0.0).count(), 910);
        assert_eq!(&p[left..left + 4000], &seg[..]);
    }

    #[test]
    fn normalize_constant_region_vanishes() {
        let mut w = vec![0.0f32; 100];
        w[10..60].fill(3.0);
        assert!(normalize(&w).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_statistics() {
        let mut w = vec![0.0f32; 4910];
        for (i, v) in w[300..4000].iter_mut().enumerate() {
            *v = 5.0 + (i as f32 * 0.37).sin() * 2.0 + (i % 13) as f32 * 0.1;
        }
        let n = normalize(&w);
        assert!(n[..300].iter().all(|&v| v == 0.0));
        assert!(n[4000..].iter().all(|&v| v == 0.0));
        let r = &n[300..4000];
        let mean = r.iter().map(|&v| f64::from(v)).sum::<f64>() / r.len() as f64;
        let std = (r
            .iter()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / r.len() as f64)
            .sqrt();
        assert!(mean.abs() < 1e-6);
        assert!((std - 1.0).abs() < 1e-5);
        // idempotent on normalized input
        let again = normalize(&n);
        for (a, b) in again.iter().zip(&n) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn repad_keeps_region() {
        let s = constant_signal(0.7, 12);
        let mut w = extract_windows(&s, &WindowConfig::default(), 1).unwrap();
        let before = w[0].clone();
        let region = signal_extent(&before.input).unwrap();
        let mut rng = seed::rng(5, &[]);
        repad(&mut w[0], &mut rng);
        let after = signal_extent(&w[0].input).unwrap();
        assert_eq!(region.len(), after.len());
        assert_eq!(&before.input[region], &w[0].input[after]);
    }

    #[test]
    fn eleven_subject_fold() {
        let ids: Vec<u32> = (1..=11).collect();
        let f = make_folds(&ids, 1, 0).unwrap();
        assert_eq!(f.test, vec![1]);
        assert_eq!(f.val.len(), 2);
        assert_eq!(f.train.len(), 8);
        let mut all: Vec<u32> = f
            .train
            .iter()
            .chain(&f.val)
            .chain(&f.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, ids);
        assert_eq!(make_folds(&ids, 1, 0).unwrap(), f);
    }

    #[test]
    fn small_population_fold() {
        let f = make_folds(&[1, 2, 3], 2, 9).unwrap();
        assert_eq!(f.test, vec![2]);
        assert_eq!(f.val.len(), 1);
        assert_eq!(f.train.len(), 1);
        assert!(make_folds(&[1, 2, 3], 4, 9).is_err());
    }
}
