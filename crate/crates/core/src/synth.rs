//! Synthetic tone-burst "speech" and white noise, for smoke tests and
//! desk-scale experiments.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::{Utterance, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::spectral::{FRAME_LEN, NUM_BINS};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub utterances: usize,
    pub seconds: f64,
    pub tones_per_utterance: usize,
    /// Inclusive range of bins the tones are drawn from.
    pub tone_bins: (usize, usize),
    /// Uniform ranges, in seconds, for burst length, gap length and the
    /// silent lead-in before the first burst.
    pub burst_seconds: (f64, f64),
    pub gap_seconds: (f64, f64),
    pub lead_in_seconds: (f64, f64),
    /// Peak amplitude of each tone.
    pub tone_amplitude: f64,
    pub snr_min: f64,
    pub snr_max: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            utterances: 20,
            seconds: 10.0,
            tones_per_utterance: 3,
            tone_bins: (6, 64),
            burst_seconds: (0.5, 2.5),
            gap_seconds: (0.2, 1.0),
            lead_in_seconds: (0.1, 0.8),
            tone_amplitude: 0.05,
            snr_min: -5.0,
            snr_max: 25.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthItem {
    pub clean: Utterance,
    pub noise: Utterance,
    pub snr_db: f64,
    pub seed: u64,
    pub tone_bins: Vec<usize>,
}

/// Gaussian white noise with the given RMS.
pub fn white_noise(id: &str, len: usize, rms: f64, seed: u64) -> Result<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..len)
        .map(|_| rms * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Utterance::new(id, s)
}

/// Timing of the on/off pattern of each tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstTiming {
    pub burst_seconds: (f64, f64),
    pub gap_seconds: (f64, f64),
    pub lead_in_seconds: (f64, f64),
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// On/off envelope with 10 ms raised-cosine edges.
fn burst_envelope(len: usize, timing: &BurstTiming, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sr = f64::from(SAMPLE_RATE);
    let ramp = (0.01 * sr) as usize;
    let mut env = vec![0.0; len];
    let mut pos = (draw(rng, timing.lead_in_seconds) * sr) as usize;
    while pos < len {
        let dur = ((draw(rng, timing.burst_seconds) * sr) as usize).max(1);
        let end = (pos + dur).min(len);
        for (i, e) in env[pos..end].iter_mut().enumerate() {
            let from_end = end - pos - 1 - i;
            let edge = i.min(from_end);
            *e = if edge < ramp {
                0.5 * (1.0 - (PI * edge as f64 / ramp as f64).cos())
            } else {
                1.0
            };
        }
        pos = end + (draw(rng, timing.gap_seconds) * sr) as usize;
    }
    env
}

/// Clean signal made of bursts of bin-centered tones at distinct random bins.
pub fn tone_bursts(
    id: &str,
    len: usize,
    tones: usize,
    band: (usize, usize),
    timing: &BurstTiming,
    amplitude: f64,
    seed: u64,
) -> Result<(Utterance, Vec<usize>)> {
    let (lo, hi) = band;
    if lo == 0 || hi >= NUM_BINS - 1 || hi < lo || (hi - lo) / 4 + 1 < tones {
        return Err(Error::InvalidConfig(format!(
            "cannot place {tones} separated tones in bins {lo}..={hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins: Vec<usize> = Vec::with_capacity(tones);
    while bins.len() < tones {
        let b = rng.gen_range(lo..=hi);
        if bins.iter().all(|&o| o.abs_diff(b) > 3) {
            bins.push(b);
        }
    }
    let mut x = vec![0.0; len];
    for &b in &bins {
        let env = burst_envelope(len, timing, &mut rng);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let w = 2.0 * PI * b as f64 / FRAME_LEN as f64;
        for (i, (s, e)) in x.iter_mut().zip(&env).enumerate() {
            *s += amplitude * e * (w * i as f64 + phase).cos();
        }
    }
    Ok((Utterance::new(id, x)?, bins))
}

/// Clean tone-burst utterances paired with independent white-noise
/// recordings (one second longer, so mixing crops) and uniform SNRs.
pub fn tone_burst_corpus(cfg: &SynthConfig) -> Result<Vec<SynthItem>> {
    let len = (cfg.seconds * f64::from(SAMPLE_RATE)) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let timing = BurstTiming {
        burst_seconds: cfg.burst_seconds,
        gap_seconds: cfg.gap_seconds,
        lead_in_seconds: cfg.lead_in_seconds,
    };
    (0..cfg.utterances)
        .map(|i| {
            let s = derive_seed(cfg.seed, i as u64);
            let (clean, tone_bins) = tone_bursts(
                &format!("tone{i:03}"),
                len,
                cfg.tones_per_utterance,
                cfg.tone_bins,
                &timing,
                cfg.tone_amplitude,
                s,
            )?;
            let noise = white_noise(
                &format!("white{i:03}"),
                len + SAMPLE_RATE as usize,
                0.1,
                derive_seed(s, 1),
            )?;
            Ok(SynthItem {
                clean,
                noise,
                snr_db: rng.gen_range(cfg.snr_min..=cfg.snr_max),
                seed: derive_seed(s, 2),
                tone_bins,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        let cfg = SynthConfig {
            utterances: 3,
            seconds: 1.0,
            ..Default::default()
        };
        let a = tone_burst_corpus(&cfg).unwrap();
        let b = tone_burst_corpus(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.clean, y.clean);
            assert_eq!(x.noise, y.noise);
            assert_eq!(x.snr_db, y.snr_db);
            assert_eq!(x.tone_bins.len(), 3);
            assert!((-5.0..=25.0).contains(&x.snr_db));
        }
        assert!(a[0].clean.peak() <= 3.0 * cfg.tone_amplitude);
    }

    #[test]
    fn noise_rms() {
        let n = white_noise("n", 100_000, 0.1, 3).unwrap();
        assert!((n.mean_power().sqrt() - 0.1).abs() < 0.002);
    }
}
