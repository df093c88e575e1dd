//! Evaluation statistics: Pearson r, RMSE, the checkpoint-selection metric,
//! Bland-Altman agreement and report rows.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

fn check_pair(op: &str, x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::param(format!(
            "{op}: series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_len {
        return Err(Error::param(format!(
            "{op}: needs at least {min_len} values, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Centered sums `(sxy, sxx, syy)`.
pub(crate) fn co_moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let mut s = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        s.0 += dx * dy;
        s.1 += dx * dx;
        s.2 += dy * dy;
    }
    s
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("pearson_r", x, y, 2)?;
    let (sxy, sxx, syy) = co_moments(x, y);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSeries(format!(
            "pearson_r over {} values with zero variance",
            x.len()
        )));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("rmse", x, y, 1)?;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

pub fn mae(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("mae", x, y, 1)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeights {
    pub correlation: f64,
    pub squared: f64,
    pub absolute: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        MetricWeights {
            correlation: 10.0,
            squared: 0.1,
            absolute: 0.1,
        }
    }
}

/// `a1 (1 - r^2) + a2 mean(e^2) + a3 mean(|e|)`; lower is better.
pub fn weighted_metric(pred: &[f64], target: &[f64], w: &MetricWeights) -> Result<f64> {
    let r = pearson_r(pred, target)?;
    let e2 = rmse(pred, target)?.powi(2);
    let e1 = mae(pred, target)?;
    Ok(w.correlation * (1.0 - r * r) + w.squared * e2 + w.absolute * e1)
}

pub fn ibi_to_bpm(ibi_seconds: f64) -> Result<f64> {
    if !(ibi_seconds > 0.0) {
        return Err(Error::param(format!(
            "IBI must be positive, got {ibi_seconds}"
        )));
    }
    Ok(60.0 / ibi_seconds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgreementUnit {
    #[default]
    Seconds,
    Bpm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlandAltmanStats {
    pub mean_diff: f64,
    pub std_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub n: usize,
}

/// Differences `pred - target`; limits at `mean ± 1.96 * sample std`.
pub fn bland_altman(pred: &[f64], target: &[f64], unit: AgreementUnit) -> Result<BlandAltmanStats> {
    check_pair("bland_altman", pred, target, 2)?;
    let diffs = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| match unit {
            AgreementUnit::Seconds => Ok(p - t),
            AgreementUnit::Bpm => Ok(ibi_to_bpm(p)? - ibi_to_bpm(t)?),
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = mean(&diffs);
    let var = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    let sd = var.sqrt();
    Ok(BlandAltmanStats {
        mean_diff: m,
        std_diff: sd,
        loa_low: m - 1.96 * sd,
        loa_high: m + 1.96 * sd,
        n: diffs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Postprocessed,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Raw => "raw",
            Stage::Postprocessed => "postprocessed",
        })
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Stage::Raw),
            "postprocessed" => Ok(Stage::Postprocessed),
            _ => Err(Error::param(format!("unknown stage `{s}`"))),
        }
    }
}

/// One line of the metric report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub fold_id: u32,
    pub stage: Stage,
    pub r_percent: f64,
    pub rmse_ms: f64,
    pub ba_mean_ms: f64,
    pub ba_loa_low_ms: f64,
    pub ba_loa_high_ms: f64,
    pub n_ibis: usize,
}

pub const METRIC_CSV_HEADER: &str =
    "fold_id,stage,r_percent,rmse_ms,ba_mean_ms,ba_loa_low_ms,ba_loa_high_ms,n_ibis";

impl MetricRow {
    /// Scores concatenated IBI series given in seconds.
    pub fn compute(fold_id: u32, stage: Stage, pred: &[f64], target: &[f64]) -> Result<Self> {
        let r = pearson_r(pred, target)?;
        let ba = bland_altman(pred, target, AgreementUnit::Seconds)?;
        Ok(MetricRow {
            fold_id,
            stage,
            r_percent: 100.0 * r,
            rmse_ms: 1000.0 * rmse(pred, target)?,
            ba_mean_ms: 1000.0 * ba.mean_diff,
            ba_loa_low_ms: 1000.0 * ba.loa_low,
            ba_loa_high_ms: 1000.0 * ba.loa_high,
            n_ibis: pred.len(),
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            self.fold_id,
            self.stage,
            self.r_percent,
            self.rmse_ms,
            self.ba_mean_ms,
            self.ba_loa_low_ms,
            self.ba_loa_high_ms,
            self.n_ibis
        )
    }

    pub fn parse_csv(line: &str) -> Result<Self> {
        let bad = || Error::param(format!("malformed metric row `{line}`"));
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 8 {
            return Err(bad());
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        Ok(MetricRow {
            fold_id: f[0].parse().map_err(|_| bad())?,
            stage: f[1].parse()?,
            r_percent: num(2)?,
            rmse_ms: num(3)?,
            ba_mean_ms: num(4)?,
            ba_loa_low_ms: num(5)?,
            ba_loa_high_ms: num(6)?,
            n_ibis: f[7].parse().map_err(|_| bad())?,
        })
    }
}

pub fn write_metric_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{METRIC_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metric_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(METRIC_CSV_HEADER) {
        return Err(Error::format(path, "missing metric header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| MetricRow::parse_csv(l).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}
