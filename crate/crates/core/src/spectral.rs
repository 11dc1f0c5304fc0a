//! STFT analysis, power spectra, log-power features and normalization.
//!
//! All matrices are laid out bins × frames (K rows, L columns).

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::Utterance;
use crate::error::{Error, Result};

/// 16 ms at 16 kHz.
pub const FRAME_LEN: usize = 256;
/// 8 ms at 16 kHz.
pub const HOP: usize = 128;
pub const NUM_BINS: usize = FRAME_LEN / 2 + 1;
pub const LOG_FLOOR: f64 = 1e-10;
pub const STD_FLOOR: f64 = 1e-8;

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidLength(n));
    }
    Ok((0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect())
}

/// Number of full frames; the trailing partial frame is dropped.
pub fn num_frames(num_samples: usize, frame_len: usize, hop: usize) -> usize {
    if num_samples < frame_len {
        0
    } else {
        1 + (num_samples - frame_len) / hop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub values: Array2<Complex64>,
    pub frame_len: usize,
    pub hop: usize,
}

impl ComplexSpectrogram {
    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }
}

pub fn stft(u: &Utterance, frame_len: usize, hop: usize) -> Result<ComplexSpectrogram> {
    stft_samples(&u.samples, frame_len, hop)
}

pub fn stft_samples(x: &[f64], frame_len: usize, hop: usize) -> Result<ComplexSpectrogram> {
    let window = hann_window(frame_len)?;
    if hop == 0 {
        return Err(Error::InvalidConfig("hop must be positive".into()));
    }
    if x.len() < frame_len {
        return Err(Error::TooShort {
            samples: x.len(),
            needed: frame_len,
        });
    }
    let frames = num_frames(x.len(), frame_len, hop);
    let bins = frame_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_len);
    let mut values = Array2::<Complex64>::zeros((bins, frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for l in 0..frames {
        let frame = &x[l * hop..l * hop + frame_len];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..bins {
            values[[k, l]] = buf[k];
        }
    }
    Ok(ComplexSpectrogram {
        values,
        frame_len,
        hop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerRole {
    Noisy,
    Clean,
    Noise,
    SmoothedNoise,
}

/// Non-negative K×L power matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub values: Array2<f64>,
    pub role: PowerRole,
}

impl PowerSpectrogram {
    pub fn new(values: Array2<f64>, role: PowerRole) -> Self {
        debug_assert!(values.iter().all(|&v| v >= 0.0));
        Self { values, role }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

pub fn power_spec(s: &ComplexSpectrogram, role: PowerRole) -> PowerSpectrogram {
    PowerSpectrogram {
        values: s.values.mapv(|z| z.norm_sqr()),
        role,
    }
}

/// Log-power features in nepers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }
}

pub fn log_power(p: &PowerSpectrogram, eps_floor: f64) -> FeatureMatrix {
    FeatureMatrix {
        values: p.values.mapv(|v| v.max(eps_floor).ln()),
    }
}

/// Per-bin normalization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(bins: usize) -> Self {
        Self {
            mean: vec![0.0; bins],
            std: vec![1.0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.mean.len()
    }
}

/// Pooled per-bin mean and population standard deviation over all frames of
/// all matrices.
pub fn compute_norm_stats<'a, I>(features: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a FeatureMatrix>,
    I::IntoIter: Clone,
{
    let iter = features.into_iter();
    let mut bins = None;
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for f in iter.clone() {
        let k = *bins.get_or_insert(f.bins());
        if f.bins() != k {
            return Err(Error::BinCountMismatch {
                expected: k,
                actual: f.bins(),
            });
        }
        if sum.is_empty() {
            sum = vec![0.0; k];
        }
        for (s, row) in sum.iter_mut().zip(f.values.axis_iter(Axis(0))) {
            *s += row.sum();
        }
        count += f.frames();
    }
    let Some(bins) = bins else {
        return Err(Error::EmptyInput("feature matrices"));
    };
    if count == 0 {
        return Err(Error::EmptyInput("frames"));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; bins];
    for f in iter {
        for ((acc, row), m) in sq.iter_mut().zip(f.values.axis_iter(Axis(0))).zip(&mean) {
            *acc += row.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
    }
    let std = sq
        .iter()
        .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

fn check_bins(f: &FeatureMatrix, s: &NormStats) -> Result<()> {
    if f.bins() != s.bins() {
        return Err(Error::BinCountMismatch {
            expected: s.bins(),
            actual: f.bins(),
        });
    }
    Ok(())
}

pub fn normalize(f: &FeatureMatrix, s: &NormStats) -> Result<FeatureMatrix> {
    check_bins(f, s)?;
    let mut values = f.values.clone();
    for ((mut row, m), sd) in values.axis_iter_mut(Axis(0)).zip(&s.mean).zip(&s.std) {
        row.mapv_inplace(|v| (v - m) / sd);
    }
    Ok(FeatureMatrix { values })
}

pub fn denormalize(f: &FeatureMatrix, s: &NormStats) -> Result<FeatureMatrix> {
    check_bins(f, s)?;
    let mut values = f.values.clone();
    for ((mut row, m), sd) in values.axis_iter_mut(Axis(0)).zip(&s.mean).zip(&s.std) {
        row.mapv_inplace(|v| v * sd + m);
    }
    Ok(FeatureMatrix { values })
}

/// Noisy-signal front end: STFT → |Y|² → log power (not normalized).
pub fn features_of(u: &Utterance) -> Result<(PowerSpectrogram, FeatureMatrix)> {
    let power = power_spec(&stft(u, FRAME_LEN, HOP)?, PowerRole::Noisy);
    let feats = log_power(&power, LOG_FLOOR);
    Ok((power, feats))
}
