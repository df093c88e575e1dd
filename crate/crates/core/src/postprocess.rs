//! Turns overlapping per-window IBI predictions into one smoothed series
//! per recording.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::windowing::TARGET_COUNT;

pub const MEDIAN_LEN: usize = 5;
pub const MOVING_AVERAGE_LEN: usize = 6;

/// Predictions of one recording, keyed by the index of each window's first
/// IBI. Window `j`, slot `s` estimates IBI `j + s`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowPredictions {
    windows: Vec<(u32, [f64; TARGET_COUNT])>,
}

impl WindowPredictions {
    /// Indices must be strictly increasing; jumps mark discarded windows.
    pub fn new(windows: Vec<(u32, [f64; TARGET_COUNT])>) -> Result<Self> {
        if windows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param(
                "window indices must be strictly increasing within a recording",
            ));
        }
        Ok(WindowPredictions { windows })
    }

    pub fn windows(&self) -> &[(u32, [f64; TARGET_COUNT])] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Every slot value, window by window.
    pub fn flat(&self) -> Vec<f64> {
        self.windows
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }
}

/// Per-beat IBI values in seconds, ordered by beat index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IbiSeries {
    pub beat_index: Vec<u32>,
    pub seconds: Vec<f64>,
}

impl IbiSeries {
    pub fn new(beat_index: Vec<u32>, seconds: Vec<f64>) -> Result<Self> {
        if beat_index.len() != seconds.len() {
            return Err(Error::param("beat index and value counts differ"));
        }
        if beat_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("beat indices must be strictly increasing"));
        }
        if seconds.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("IBI values must be finite"));
        }
        Ok(IbiSeries {
            beat_index,
            seconds,
        })
    }

    /// Consecutive-index series starting at `first`.
    pub fn contiguous(first: u32, seconds: Vec<f64>) -> Self {
        let beat_index = (first..).take(seconds.len()).collect();
        IbiSeries {
            beat_index,
            seconds,
        }
    }

    pub fn len(&self) -> usize {
        self.seconds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seconds.is_empty()
    }

    /// Index ranges of maximal runs of consecutive beat indices.
    pub fn runs(&self) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.beat_index[i] != self.beat_index[i - 1] + 1 {
                runs.push(start..i);
                start = i;
            }
        }
        runs
    }

    fn map_runs(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> IbiSeries {
        let mut seconds = Vec::with_capacity(self.len());
        for r in self.runs() {
            seconds.extend(f(&self.seconds[r]));
        }
        IbiSeries {
            beat_index: self.beat_index.clone(),
            seconds,
        }
    }
}

/// Mean of every (window, slot) estimate of each beat.
pub fn rolling_average(preds: &WindowPredictions) -> IbiSeries {
    let mut acc: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    for (first, slots) in &preds.windows {
        for (s, &v) in slots.iter().enumerate() {
            let e = acc.entry(first + s as u32).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let (beat_index, seconds) = acc
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / f64::from(n)))
        .unzip();
    IbiSeries {
        beat_index,
        seconds,
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_run(x: &[f64], len: usize) -> Vec<f64> {
    let half = len / 2;
    let mut buf = Vec::with_capacity(len);
    (0..x.len())
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&x[i.saturating_sub(half)..(i + half + 1).min(x.len())]);
            buf.sort_by(f64::total_cmp);
            median_sorted(&buf)
        })
        .collect()
}

/// Centered median; near the ends the window is cut off at the series
/// boundary. Each run of consecutive beats is filtered on its own.
pub fn median_filter(series: &IbiSeries, len: usize) -> Result<IbiSeries> {
    if len % 2 == 0 {
        return Err(Error::param(format!(
            "median filter length must be odd, got {len}"
        )));
    }
    Ok(series.map_runs(|x| median_run(x, len)))
}

fn moving_average_run(x: &[f64], len: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let n = (i + 1).min(len);
            x[i + 1 - n..=i].iter().sum::<f64>() / n as f64
        })
        .collect()
}

/// Trailing mean over up to `len` samples.
pub fn moving_average(series: &IbiSeries, len: usize) -> Result<IbiSeries> {
    if len == 0 {
        return Err(Error::param("moving average length must be positive"));
    }
    Ok(series.map_runs(|x| moving_average_run(x, len)))
}

/// Overlap averaging, then the median filter, then the moving average.
pub fn postprocess_pipeline(preds: &WindowPredictions) -> Result<IbiSeries> {
    let z = rolling_average(preds);
    let m = median_filter(&z, MEDIAN_LEN)?;
    moving_average(&m, MOVING_AVERAGE_LEN)
}

pub const IBI_CSV_HEADER: &str = "beat_index,ibi_seconds";

pub fn write_ibi_csv(path: impl AsRef<Path>, series: &IbiSeries) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{IBI_CSV_HEADER}")?;
    for (k, v) in series.beat_index.iter().zip(&series.seconds) {
        writeln!(out, "{k},{v:.6}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ibi_csv(path: impl AsRef<Path>) -> Result<IbiSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == IBI_CSV_HEADER => {}
        _ => {
            return Err(Error::format(
                path,
                format!("expected header `{IBI_CSV_HEADER}`"),
            ))
        }
    }
    let mut beat_index = Vec::new();
    let mut seconds = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(k, v)| Some((k.trim().parse().ok()?, v.trim().parse().ok()?)));
        let (k, v): (u32, f64) =
            parsed.ok_or_else(|| Error::format(path, format!("line {}: `{line}`", n + 1)))?;
        beat_index.push(k);
        seconds.push(v);
    }
    IbiSeries::new(beat_index, seconds).map_err(|e| Error::format(path, e.to_string()))
}

pub const WINDOW_CSV_HEADER: &str = "first_beat_index,ibi_0,ibi_1,ibi_2,ibi_3,ibi_4,ibi_5,ibi_6";

/// One row per window: its first IBI index and seven predictions.
pub fn write_window_csv(path: impl AsRef<Path>, preds: &WindowPredictions) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{WINDOW_CSV_HEADER}")?;
    for (j, slots) in &preds.windows {
        write!(out, "{j}")?;
        for v in slots {
            write!(out, ",{v:.6}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_window_csv(path: impl AsRef<Path>) -> Result<WindowPredictions> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == WINDOW_CSV_HEADER => {}
        _ => {
            return Err(Error::format(
                path,
                format!("expected header `{WINDOW_CSV_HEADER}`"),
            ))
        }
    }
    let mut windows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(path, format!("line {}: `{line}`", n + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != TARGET_COUNT + 1 {
            return Err(bad());
        }
        let j: u32 = fields[0].parse().map_err(|_| bad())?;
        let mut slots = [0.0; TARGET_COUNT];
        for (slot, f) in slots.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| bad())?;
        }
        windows.push((j, slots));
    }
    WindowPredictions::new(windows).map_err(|e| Error::format(path, e.to_string()))
}
