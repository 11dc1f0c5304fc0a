//! Blind SPP baseline: fixed-prior posterior SPP driving a recursive noise
//! PSD tracker, with a stagnation guard against locking onto speech.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{PowerRole, PowerSpectrogram};
use crate::target::{default_xi_h1, posterior_spp, SppMatrix, PSD_FLOOR};

/// Frames averaged to seed the noise PSD.
pub const INIT_FRAMES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub xi_h1: f64,
    pub prior_ratio: f64,
    pub psd_smoothing: f64,
    pub spp_time_smoothing: f64,
    /// Cap applied to the SPP when its time average exceeds this value.
    /// Set to 1.0 or more to disable.
    pub stuck_guard: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            xi_h1: default_xi_h1(),
            prior_ratio: 1.0,
            psd_smoothing: 0.8,
            spp_time_smoothing: 0.9,
            stuck_guard: 0.99,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.xi_h1 > 0.0) || !(self.prior_ratio > 0.0) {
            return Err(Error::InvalidConfig(
                "xi_h1 and prior_ratio must be positive".into(),
            ));
        }
        if !unit(self.psd_smoothing) || !unit(self.spp_time_smoothing) {
            return Err(Error::InvalidConfig(
                "smoothing constants must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

pub fn unbiased_mmse_spp(
    noisy_power: &PowerSpectrogram,
    cfg: &BaselineConfig,
) -> Result<(SppMatrix, PowerSpectrogram)> {
    cfg.validate()?;
    let (bins, frames) = noisy_power.shape();
    if frames == 0 {
        return Err(Error::EmptyInput("frames"));
    }
    let y = &noisy_power.values;
    let mut spp = Array2::zeros((bins, frames));
    let mut psd = Array2::zeros((bins, frames));
    let init = INIT_FRAMES.min(frames);
    let (a_psd, a_spp) = (cfg.psd_smoothing, cfg.spp_time_smoothing);
    for k in 0..bins {
        let mut phi = ((0..init).map(|l| y[[k, l]]).sum::<f64>() / init as f64).max(PSD_FLOOR);
        let mut smoothed = 0.0;
        for l in 0..frames {
            let p_obs = y[[k, l]];
            let mut p = posterior_spp(p_obs / phi, cfg.prior_ratio, cfg.xi_h1);
            smoothed = a_spp * smoothed + (1.0 - a_spp) * p;
            if smoothed > cfg.stuck_guard {
                p = p.min(cfg.stuck_guard);
            }
            phi = a_psd * phi + (1.0 - a_psd) * ((1.0 - p) * p_obs + p * phi);
            phi = phi.max(PSD_FLOOR);
            spp[[k, l]] = p;
            psd[[k, l]] = phi;
        }
    }
    Ok((
        SppMatrix { values: spp },
        PowerSpectrogram::new(psd, PowerRole::SmoothedNoise),
    ))
}
