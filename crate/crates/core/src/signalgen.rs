//! Synthetic annotated pulse trains.
//!
//! A [`SubjectProfile`] describes the IBI statistics of one synthetic subject.
//! [`generate_ibi_sequence`] draws the beat-to-beat intervals and
//! [`render_pulse_train`] places a pulse template at every beat, recording the
//! exact R-peak sample indices as ground truth. [`superpose_augment`] builds
//! low-IBI training signals by adding a signal to a left-shifted copy of
//! itself.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;

/// Shortest physiologically plausible IBI in seconds.
pub const MIN_IBI_SECONDS: f64 = 0.2;

/// Lowest sampling rate accepted anywhere in the pipeline.
pub const MIN_SAMPLE_RATE: u32 = 100;

/// Median-IBI range (seconds) a signal must fall in to be superposed.
pub const AUGMENT_SOURCE_RANGE: (f64, f64) = (0.9, 1.1);

/// Range of the superposition shift in seconds.
pub const AUGMENT_SHIFT_RANGE: (f64, f64) = (0.450, 0.550);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseTemplate {
    /// First derivative of a Gaussian, aligned so its positive lobe peaks on
    /// the beat.
    #[default]
    GaussianDerivative,
    DampedSinusoid,
    /// Ricker wavelet.
    Biphasic,
}

impl PulseTemplate {
    /// Template value at `t` seconds from the beat, for a pulse of `width`
    /// seconds. The maximum is exactly 1.0 at `t = 0`.
    pub fn value(self, t: f64, width: f64) -> f64 {
        match self {
            PulseTemplate::GaussianDerivative => {
                let sigma = width / 4.0;
                let u = t / sigma - 1.0;
                if u.abs() > 4.0 {
                    return 0.0;
                }
                -u * (0.5 - 0.5 * u * u).exp()
            }
            PulseTemplate::DampedSinusoid => {
                let tau = width / 3.0;
                if t.abs() > 5.0 * tau {
                    return 0.0;
                }
                (-t.abs() / tau).exp() * (2.0 * std::f64::consts::PI * t / width).cos()
            }
            PulseTemplate::Biphasic => {
                let sigma = width / 4.0;
                let u = t / sigma;
                if u.abs() > 5.0 {
                    return 0.0;
                }
                (1.0 - u * u) * (-0.5 * u * u).exp()
            }
        }
    }

    /// Offsets (seconds) outside `[-before, after]` evaluate to zero.
    fn support(self, width: f64) -> (f64, f64) {
        match self {
            PulseTemplate::GaussianDerivative => (0.75 * width, 1.25 * width),
            PulseTemplate::DampedSinusoid => (5.0 * width / 3.0, 5.0 * width / 3.0),
            PulseTemplate::Biphasic => (1.25 * width, 1.25 * width),
        }
    }

    /// Sampled template over its support: `(first offset in samples, values)`.
    pub fn sampled(self, width: f64, fs: u32) -> (isize, Vec<f64>) {
        let fs = f64::from(fs);
        let (before, after) = self.support(width);
        let lo = -((before * fs).ceil() as isize);
        let hi = (after * fs).ceil() as isize;
        let values = (lo..=hi)
            .map(|k| self.value(k as f64 / fs, width))
            .collect();
        (lo, values)
    }
}

impl fmt::Display for PulseTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseTemplate::GaussianDerivative => "gaussian-derivative",
            PulseTemplate::DampedSinusoid => "damped-sinusoid",
            PulseTemplate::Biphasic => "biphasic",
        })
    }
}

impl FromStr for PulseTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian-derivative" => Ok(PulseTemplate::GaussianDerivative),
            "damped-sinusoid" => Ok(PulseTemplate::DampedSinusoid),
            "biphasic" => Ok(PulseTemplate::Biphasic),
            other => Err(Error::param(format!("unknown pulse template {other:?}"))),
        }
    }
}

/// IBI statistics and rendering parameters for one synthetic subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: u32,
    /// Seconds.
    pub ibi_mean: f64,
    pub ibi_std: f64,
    pub ibi_min: f64,
    pub ibi_max: f64,
    /// Lag-one correlation of successive IBIs. Zero gives i.i.d. draws.
    pub ibi_autocorr: f64,
    pub template: PulseTemplate,
    /// Pulse width in seconds.
    pub pulse_width: f64,
    /// Noise standard deviation as a fraction of the template peak.
    pub noise_std: f64,
    /// Minimum recording duration in seconds.
    pub duration: f64,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        Self {
            subject_id: 1,
            ibi_mean: 0.7,
            ibi_std: 0.07,
            ibi_min: 0.35,
            ibi_max: 1.4,
            ibi_autocorr: 0.98,
            template: PulseTemplate::GaussianDerivative,
            pulse_width: 0.06,
            noise_std: 0.1,
            duration: 300.0,
        }
    }
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.ibi_mean,
            self.ibi_std,
            self.ibi_min,
            self.ibi_max,
            self.ibi_autocorr,
            self.pulse_width,
            self.noise_std,
            self.duration,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("profile contains a non-finite value"));
        }
        if !(0.0 < self.ibi_min && self.ibi_min <= self.ibi_mean && self.ibi_mean <= self.ibi_max) {
            return Err(Error::param(format!(
                "profile {} needs 0 < ibi_min <= ibi_mean <= ibi_max, got {} / {} / {}",
                self.subject_id, self.ibi_min, self.ibi_mean, self.ibi_max
            )));
        }
        if self.ibi_std < 0.0 || self.noise_std < 0.0 {
            return Err(Error::param("ibi_std and noise_std must be non-negative"));
        }
        if self.duration <= 0.0 || self.pulse_width <= 0.0 {
            return Err(Error::param("duration and pulse_width must be positive"));
        }
        if !(0.0..1.0).contains(&self.ibi_autocorr) {
            return Err(Error::param("ibi_autocorr must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Eleven subjects whose IBI medians spread like a small clinical cohort:
    /// two low-IBI subjects (3 and 10), three high ones and the rest in the
    /// 0.65-0.75 s band. Subject 5 sits high enough to seed superposition
    /// augmentation.
    pub fn default_cohort(duration: f64) -> Vec<SubjectProfile> {
        const MEANS: [(f64, f64); 11] = [
            (0.70, 0.075),
            (0.74, 0.070),
            (0.53, 0.050),
            (0.68, 0.070),
            (0.96, 0.060),
            (0.66, 0.065),
            (0.72, 0.070),
            (0.84, 0.070),
            (0.75, 0.075),
            (0.60, 0.055),
            (0.88, 0.070),
        ];
        MEANS
            .iter()
            .enumerate()
            .map(|(i, &(mean, std))| SubjectProfile {
                subject_id: i as u32 + 1,
                ibi_mean: mean,
                ibi_std: std,
                duration,
                ..SubjectProfile::default()
            })
            .collect()
    }
}

/// A sampled waveform with ground-truth R-peak indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSignal {
    samples: Vec<f32>,
    fs: u32,
    r_peaks: Vec<usize>,
    subject_id: u32,
}

impl AnnotatedSignal {
    /// Validates that peaks are strictly increasing, in range, and at least
    /// [`MIN_IBI_SECONDS`] apart.
    pub fn new(samples: Vec<f32>, fs: u32, r_peaks: Vec<usize>, subject_id: u32) -> Result<Self> {
        if fs == 0 {
            return Err(Error::InvalidSignal("sampling rate is zero".into()));
        }
        if let Some(&last) = r_peaks.last() {
            if last >= samples.len() {
                return Err(Error::InvalidSignal(format!(
                    "R-peak {last} outside a {}-sample signal",
                    samples.len()
                )));
            }
        }
        let floor = MIN_IBI_SECONDS * f64::from(fs);
        for (k, pair) in r_peaks.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidSignal(format!(
                    "R-peaks not strictly increasing at position {}",
                    k + 1
                )));
            }
            if ((pair[1] - pair[0]) as f64) < floor {
                return Err(Error::InvalidSignal(format!(
                    "IBI between peaks {} and {} is below {MIN_IBI_SECONDS} s",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self {
            samples,
            fs,
            r_peaks,
            subject_id,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn r_peaks(&self) -> &[usize] {
        &self.r_peaks
    }

    pub fn subject_id(&self) -> u32 {
        self.subject_id
    }

    pub fn with_subject_id(mut self, subject_id: u32) -> Self {
        self.subject_id = subject_id;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.fs)
    }

    pub fn ibis(&self) -> Vec<f64> {
        ibis_from_peaks(&self.r_peaks, self.fs)
    }

    pub fn median_ibi(&self) -> Option<f64> {
        median(&self.ibis())
    }

    pub fn into_parts(self) -> (Vec<f32>, u32, Vec<usize>, u32) {
        (self.samples, self.fs, self.r_peaks, self.subject_id)
    }
}

pub fn ibis_from_peaks(r_peaks: &[usize], fs: u32) -> Vec<f64> {
    let fs = f64::from(fs);
    r_peaks
        .windows(2)
        .map(|p| (p[1] - p[0]) as f64 / fs)
        .collect()
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Draws IBIs until they cover `profile.duration`.
///
/// Each value is `clamp(mean + std * s_k, min, max)` where `s_k` is a
/// stationary unit-variance AR(1) process with lag-one correlation
/// `ibi_autocorr`, so the marginal is a clamped normal. With
/// `ibi_autocorr = 0` the draws are i.i.d.
pub fn generate_ibi_sequence(profile: &SubjectProfile, seed: u64) -> Result<Vec<f64>> {
    profile.validate()?;
    let mut rng = seed::rng(seed, &[seed::IBI, u64::from(profile.subject_id)]);
    let phi = profile.ibi_autocorr;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut state: f64 = rng.sample(StandardNormal);
    let mut ibis = Vec::new();
    let mut total = 0.0;
    // Tolerance keeps exact multiples (3 x 0.7 s for 2.1 s) from drawing an
    // extra beat because of rounding in the running sum.
    while total < profile.duration - 1e-9 {
        let ibi =
            (profile.ibi_mean + profile.ibi_std * state).clamp(profile.ibi_min, profile.ibi_max);
        ibis.push(ibi);
        total += ibi;
        let z: f64 = rng.sample(StandardNormal);
        state = phi * state + innovation * z;
    }
    Ok(ibis)
}

/// Places one pulse per beat and adds white Gaussian noise.
///
/// Peak `k` lands on sample `round(fs * sum(ibis[..k]))`; the first peak is
/// sample 0. The signal extends past the last peak by the template's
/// trailing support.
pub fn render_pulse_train(
    ibis: &[f64],
    profile: &SubjectProfile,
    fs: u32,
    seed: u64,
) -> Result<AnnotatedSignal> {
    if fs < MIN_SAMPLE_RATE {
        return Err(Error::param(format!(
            "sampling rate {fs} below {MIN_SAMPLE_RATE} Hz"
        )));
    }
    if ibis.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::param("all IBIs must be positive and finite"));
    }
    let fs_f = f64::from(fs);
    let mut peaks = Vec::with_capacity(ibis.len() + 1);
    let mut t = 0.0;
    peaks.push(0usize);
    for &ibi in ibis {
        t += ibi;
        peaks.push((fs_f * t).round() as usize);
    }

    let (offset, template) = profile.template.sampled(profile.pulse_width, fs);
    let tail = (template.len() as isize + offset).max(1) as usize;
    let len = peaks.last().copied().unwrap_or(0) + tail;

    let min_ibi = ibis.iter().copied().fold(f64::INFINITY, f64::min);
    let support = template.len() as f64 / fs_f;
    if support > min_ibi {
        warn!(
            "subject {}: pulse support {:.3} s exceeds smallest IBI {:.3} s, pulses overlap",
            profile.subject_id, support, min_ibi
        );
    }

    let mut acc = vec![0.0f64; len];
    for &p in &peaks {
        for (j, &v) in template.iter().enumerate() {
            let idx = p as isize + offset + j as isize;
            if (0..len as isize).contains(&idx) {
                acc[idx as usize] += v;
            }
        }
    }
    if profile.noise_std > 0.0 {
        let mut rng = seed::rng(seed, &[seed::NOISE, u64::from(profile.subject_id)]);
        // Template peak amplitude is 1.
        for v in acc.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += profile.noise_std * z;
        }
    }
    let samples = acc.into_iter().map(|v| v as f32).collect();
    AnnotatedSignal::new(samples, fs, peaks, profile.subject_id)
}

/// Generates and renders one subject.
pub fn synthesize_subject(profile: &SubjectProfile, fs: u32, seed: u64) -> Result<AnnotatedSignal> {
    let ibis = generate_ibi_sequence(profile, seed)?;
    render_pulse_train(&ibis, profile, fs, seed)
}

/// `x_aug(t) = x(t) + x(t + alpha)` with `alpha ~ U(0.45, 0.55)` seconds.
///
/// Only signals whose median IBI lies in [`AUGMENT_SOURCE_RANGE`] qualify.
pub fn superpose_augment(signal: &AnnotatedSignal, seed: u64) -> Result<AnnotatedSignal> {
    check_augment_source(signal)?;
    let mut rng = seed::rng(seed, &[seed::AUGMENT, u64::from(signal.subject_id)]);
    let alpha: f64 = rng.gen_range(AUGMENT_SHIFT_RANGE.0..AUGMENT_SHIFT_RANGE.1);
    let shift = (alpha * f64::from(signal.fs)).round() as usize;
    superpose_with_shift(signal, shift)
}

fn check_augment_source(signal: &AnnotatedSignal) -> Result<()> {
    if signal.r_peaks.len() < 2 {
        return Err(Error::InvalidSignal(format!(
            "superposition needs at least 2 R-peaks, got {}",
            signal.r_peaks.len()
        )));
    }
    let med = signal.median_ibi().unwrap_or(0.0);
    let (lo, hi) = AUGMENT_SOURCE_RANGE;
    if !(lo..=hi).contains(&med) {
        return Err(Error::AugmentationNotApplicable(format!(
            "median IBI {med:.3} s outside [{lo}, {hi}] s"
        )));
    }
    Ok(())
}

/// Superposition with an explicit shift in samples. The trailing `shift`
/// samples, where the shifted copy has no data, are dropped. Peaks of the
/// copy that land on an original peak are merged.
pub fn superpose_with_shift(signal: &AnnotatedSignal, shift: usize) -> Result<AnnotatedSignal> {
    if signal.r_peaks.len() < 2 {
        return Err(Error::InvalidSignal(format!(
            "superposition needs at least 2 R-peaks, got {}",
            signal.r_peaks.len()
        )));
    }
    if shift == 0 || shift >= signal.len() {
        return Err(Error::param(format!(
            "shift of {shift} samples invalid for a {}-sample signal",
            signal.len()
        )));
    }
    let n = signal.len() - shift;
    let x = &signal.samples;
    let samples: Vec<f32> = x[..n].iter().zip(&x[shift..]).map(|(a, b)| a + b).collect();

    let original = signal.r_peaks.iter().copied().filter(|&p| p < n);
    let shifted = signal
        .r_peaks
        .iter()
        .filter(|&&p| p >= shift && p - shift < n)
        .map(|&p| p - shift);
    let mut peaks: Vec<usize> = original.chain(shifted).collect();
    peaks.sort_unstable();
    peaks.dedup();

    AnnotatedSignal::new(samples, signal.fs, peaks, signal.subject_id)
        .map_err(|e| Error::AugmentationNotApplicable(format!("superposed peaks invalid: {e}")))
}

/// Linear-interpolation resampling to `target_fs`.
pub fn resample(signal: &AnnotatedSignal, target_fs: u32) -> Result<AnnotatedSignal> {
    if target_fs < MIN_SAMPLE_RATE {
        return Err(Error::param(format!(
            "target rate {target_fs} below {MIN_SAMPLE_RATE} Hz"
        )));
    }
    if target_fs == signal.fs {
        return Ok(signal.clone());
    }
    let ratio = f64::from(target_fs) / f64::from(signal.fs);
    let x = &signal.samples;
    let samples: Vec<f32> = if x.is_empty() {
        Vec::new()
    } else {
        let out_len = (((x.len() - 1) as f64) * ratio).floor() as usize + 1;
        (0..out_len)
            .map(|k| {
                let pos = k as f64 / ratio;
                let i = pos.floor() as usize;
                if i + 1 >= x.len() {
                    x[x.len() - 1]
                } else {
                    let frac = pos - i as f64;
                    (f64::from(x[i]) * (1.0 - frac) + f64::from(x[i + 1]) * frac) as f32
                }
            })
            .collect()
    };
    let last = samples.len().saturating_sub(1);
    let mut peaks: Vec<usize> = signal
        .r_peaks
        .iter()
        .map(|&p| ((p as f64 * ratio).round() as usize).min(last))
        .collect();
    peaks.dedup();
    AnnotatedSignal::new(samples, target_fs, peaks, signal.subject_id)
}
