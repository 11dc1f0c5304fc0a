//! Training targets (a-posteriori SPP from oracle noise) and binary
//! ground-truth labels from clean speech.

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{PowerRole, PowerSpectrogram};

/// Denominator floor applied to the noise PSD.
pub const PSD_FLOOR: f64 = 1e-12;

/// 15 dB fixed a-priori SNR under speech presence.
pub fn default_xi_h1() -> f64 {
    10f64.powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    /// p(H0) / p(H1).
    pub prior_ratio: f64,
    /// Linear a-priori SNR assumed under speech presence.
    pub xi_h1: f64,
    /// Recursive smoothing constant for the oracle noise PSD.
    pub noise_smoothing: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            prior_ratio: 1.0,
            xi_h1: default_xi_h1(),
            noise_smoothing: 0.8,
        }
    }
}

impl TargetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_ratio > 0.0) || !(self.xi_h1 > 0.0) {
            return Err(Error::InvalidConfig(
                "prior_ratio and xi_h1 must be positive".into(),
            ));
        }
        if !(self.noise_smoothing > 0.0 && self.noise_smoothing < 1.0) {
            return Err(Error::InvalidConfig(
                "noise_smoothing must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// K×L matrix of probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SppMatrix {
    pub values: Array2<f64>,
}

impl SppMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// K×L binary matrix; 1 marks a speech-dominated bin.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub values: Array2<u8>,
}

impl LabelMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// First-order recursive smoothing along time, per bin.
pub fn smooth_noise_psd(noise_power: &PowerSpectrogram, alpha: f64) -> PowerSpectrogram {
    let mut values = noise_power.values.clone();
    for mut row in values.axis_iter_mut(Axis(0)) {
        let mut prev = None;
        for v in row.iter_mut() {
            let s = match prev {
                None => *v,
                Some(p) => alpha * p + (1.0 - alpha) * *v,
            };
            *v = s;
            prev = Some(s);
        }
    }
    PowerSpectrogram::new(values, PowerRole::SmoothedNoise)
}

/// Posterior speech presence probability for one bin given the a-posteriori
/// SNR `|Y|² / φ_D`.
pub fn posterior_spp(posterior_snr: f64, prior_ratio: f64, xi: f64) -> f64 {
    1.0 / (1.0 + prior_ratio * (1.0 + xi) * (-posterior_snr * xi / (1.0 + xi)).exp())
}

/// Value of [`posterior_spp`] when the observed power is zero.
pub fn spp_floor(prior_ratio: f64, xi: f64) -> f64 {
    1.0 / (1.0 + prior_ratio * (1.0 + xi))
}

pub fn oracle_spp(
    noisy_power: &PowerSpectrogram,
    noise_psd: &PowerSpectrogram,
    cfg: &TargetConfig,
) -> Result<SppMatrix> {
    if noisy_power.shape() != noise_psd.shape() {
        return Err(Error::ShapeMismatch {
            expected: noisy_power.shape(),
            actual: noise_psd.shape(),
        });
    }
    let values = Zip::from(&noisy_power.values)
        .and(&noise_psd.values)
        .map_collect(|&y, &d| posterior_spp(y / d.max(PSD_FLOOR), cfg.prior_ratio, cfg.xi_h1));
    Ok(SppMatrix { values })
}

/// Labels bins within `threshold_db` of the loudest clean bin as speech.
/// The comparison is strict and zero-power bins are always non-speech.
pub fn ground_truth_labels(
    clean_power: &PowerSpectrogram,
    threshold_db: f64,
) -> Result<LabelMatrix> {
    let max = clean_power.values.iter().fold(0.0_f64, |m, &v| m.max(v));
    if !(max > 0.0) {
        return Err(Error::AllSilent);
    }
    let cut = 10.0 * max.log10() - threshold_db;
    let values = clean_power
        .values
        .mapv(|v| u8::from(v > 0.0 && 10.0 * v.log10() > cut));
    Ok(LabelMatrix { values })
}
