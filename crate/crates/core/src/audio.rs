//! PCM audio I/O, SNR-controlled mixing and dataset manifests.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const SAMPLE_RATE: u32 = 16_000;

/// A mono 16 kHz signal with amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Utterance {
    pub fn new(id: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("utterance samples"));
        }
        Ok(Self {
            id: id.into(),
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

fn mean_power(x: &[f64]) -> f64 {
    x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Utterance> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let unsupported = |reason: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => unsupported(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE
        || spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(unsupported(format!(
            "{} Hz, {} channel(s), {}-bit {:?}; expected 16000 Hz mono 16-bit PCM",
            spec.sample_rate, spec.channels, spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| unsupported(e.to_string()))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Utterance::new(id, samples).map_err(|_| unsupported("no samples".into()))
}

/// Writes 16-bit PCM. Amplitudes are rounded to the nearest step of 1/32768
/// and saturated to the representable range.
pub fn write_wav(path: impl AsRef<Path>, u: &Utterance) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(other.to_string())),
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(to_io)?;
    for &s in &u.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}

/// Result of mixing clean speech with noise.
///
/// `clean` is returned as well because joint peak normalization may rescale
/// it; `noisy == clean + scaled_noise` always holds up to rounding.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub clean: Utterance,
    pub noisy: Utterance,
    pub scaled_noise: Utterance,
    pub gain: f64,
}

/// Crops (seeded offset) or tiles `noise` to `len` samples.
fn align_noise(noise: &[f64], len: usize, seed: u64) -> Vec<f64> {
    if noise.len() >= len {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset = rng.gen_range(0..=noise.len() - len);
        noise[offset..offset + len].to_vec()
    } else {
        noise.iter().copied().cycle().take(len).collect()
    }
}

pub fn mix_at_snr(clean: &Utterance, noise: &Utterance, snr_db: f64, seed: u64) -> Result<Mixture> {
    let p_clean = clean.mean_power();
    if p_clean <= 0.0 {
        return Err(Error::SilentInput("clean"));
    }
    if noise.mean_power() <= 0.0 {
        return Err(Error::SilentInput("noise"));
    }
    let aligned = align_noise(&noise.samples, clean.len(), seed);
    let p_noise = mean_power(&aligned);
    if p_noise <= 0.0 {
        return Err(Error::SilentInput("noise"));
    }
    let mut gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();

    let mut clean_out = clean.samples.clone();
    let mut scaled: Vec<f64> = aligned.iter().map(|d| gain * d).collect();
    let mut noisy: Vec<f64> = clean_out.iter().zip(&scaled).map(|(x, d)| x + d).collect();

    let peak = noisy.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak > 1.0 {
        let k = 1.0 / peak;
        for v in clean_out
            .iter_mut()
            .chain(scaled.iter_mut())
            .chain(noisy.iter_mut())
        {
            *v *= k;
        }
        gain *= k;
    }

    Ok(Mixture {
        clean: Utterance::new(clean.id.clone(), clean_out)?,
        noisy: Utterance::new(format!("{}_noisy", clean.id), noisy)?,
        scaled_noise: Utterance::new(format!("{}_noise", clean.id), scaled)?,
        gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// One manifest line. `noisy` and `scaled_noise` are filled in once the
/// mixture has been rendered to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub clean: PathBuf,
    pub noise: PathBuf,
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_noise: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn clean_id(&self) -> String {
        file_id(&self.clean)
    }

    pub fn noise_id(&self) -> String {
        file_id(&self.noise)
    }

    /// Loads the mixture, from the rendered files when present, otherwise by
    /// mixing the sources on the fly.
    pub fn load_mixture(&self) -> Result<Mixture> {
        let clean = read_wav(&self.clean)?;
        match (&self.noisy, &self.scaled_noise) {
            (Some(noisy), Some(noise)) => {
                let noisy = read_wav(noisy)?;
                let scaled_noise = read_wav(noise)?;
                if noisy.len() != clean.len() || scaled_noise.len() != clean.len() {
                    return Err(Error::LengthMismatch(noisy.len(), clean.len()));
                }
                Ok(Mixture {
                    clean,
                    noisy,
                    scaled_noise,
                    gain: f64::NAN,
                })
            }
            _ => {
                let noise = read_wav(&self.noise)?;
                mix_at_snr(&clean, &noise, self.snr_db, self.seed)
            }
        }
    }
}

fn file_id(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub split: Split,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The on-disk form is a bare JSON array of entries.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn from_json(s: &str, split: Split) -> Result<Self> {
        Ok(Self {
            split,
            entries: serde_json::from_str(s)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Self::from_json(&fs::read_to_string(path)?, split)
    }
}

/// Sorted list of `*.wav` files directly inside `dir`.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(files)
}

pub fn build_manifest(
    clean_dir: &Path,
    noise_dir: &Path,
    snr_min: f64,
    snr_max: f64,
    seed: u64,
) -> Result<Manifest> {
    if !(snr_min <= snr_max) {
        return Err(Error::InvalidConfig(format!(
            "snr_min {snr_min} > snr_max {snr_max}"
        )));
    }
    let cleans = list_wavs(clean_dir)?;
    let noises = list_wavs(noise_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = cleans
        .into_iter()
        .enumerate()
        .map(|(i, clean)| {
            let noise = noises[rng.gen_range(0..noises.len())].clone();
            let snr_db = if snr_min == snr_max {
                snr_min
            } else {
                rng.gen_range(snr_min..=snr_max)
            };
            ManifestEntry {
                clean,
                noise,
                snr_db,
                seed: derive_seed(seed, i as u64),
                noisy: None,
                scaled_noise: None,
            }
        })
        .collect();
    Ok(Manifest {
        split: Split::Train,
        entries,
    })
}
