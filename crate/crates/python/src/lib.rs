//! Python bindings. Matrices cross the boundary as lists of rows (bins × frames).

use std::path::PathBuf;

use binspp::audio::{self, Manifest, Split, Utterance};
use binspp::baseline::{self, BaselineConfig};
use binspp::eval::{self, RocCurve};
use binspp::gru;
use binspp::model::{self, ModelBundle, ModelConfig, ModelKind};
use binspp::spectral::{self, NormStats, PowerRole, PowerSpectrogram, FRAME_LEN, HOP, LOG_FLOOR};
use binspp::target::{self, TargetConfig};
use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;

pub type Matrix = Vec<Vec<f64>>;

/// Maps core errors onto the closest Python exception type.
pub fn to_py_err(e: binspp::Error) -> PyErr {
    match e {
        binspp::Error::NotFound(_) => PyFileNotFoundError::new_err(e.to_string()),
        _ => match e.exit_code() {
            1 => PyOSError::new_err(e.to_string()),
            3 => PyArithmeticError::new_err(e.to_string()),
            _ => PyValueError::new_err(e.to_string()),
        },
    }
}

fn core<T>(r: binspp::Result<T>) -> PyResult<T> {
    r.map_err(to_py_err)
}

pub fn to_rows(a: &Array2<f64>) -> Matrix {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Array2<f64>, String> {
    let k = rows.len();
    let l = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != l) {
        return Err("rows have unequal lengths".into());
    }
    Array2::from_shape_vec((k, l), rows.concat()).map_err(|e| e.to_string())
}

fn power(rows: &[Vec<f64>], role: PowerRole) -> PyResult<PowerSpectrogram> {
    let values = from_rows(rows).map_err(PyValueError::new_err)?;
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(PyValueError::new_err(
            "power values must be finite and non-negative",
        ));
    }
    Ok(PowerSpectrogram::new(values, role))
}

/// Parses an optional JSON config section; absent fields take defaults.
pub fn parse_config<T: DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        None => Ok(T::default()),
        Some(s) => {
            serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("config: {e}")))
        }
    }
}

fn utterance(samples: Vec<f64>) -> PyResult<Utterance> {
    core(Utterance::new("python", samples))
}

#[pyfunction]
fn hann_window(n: usize) -> PyResult<Vec<f64>> {
    core(spectral::hann_window(n))
}

/// Mono 16 kHz PCM samples scaled to [-1, 1].
#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<Vec<f64>> {
    Ok(core(audio::read_wav(path))?.samples)
}

#[pyfunction]
fn write_wav(path: PathBuf, samples: Vec<f64>) -> PyResult<()> {
    core(audio::write_wav(path, &utterance(samples)?))
}

/// Returns `(noisy, scaled_noise, gain)`.
#[pyfunction]
fn mix_at_snr(
    clean: Vec<f64>,
    noise: Vec<f64>,
    snr_db: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let m = core(audio::mix_at_snr(
        &core(Utterance::new("clean", clean))?,
        &core(Utterance::new("noise", noise))?,
        snr_db,
        seed,
    ))?;
    Ok((m.noisy.samples, m.scaled_noise.samples, m.gain))
}

/// |STFT|² with the fixed 256-sample frame and 128-sample hop.
#[pyfunction]
fn power_spectrogram(samples: Vec<f64>) -> PyResult<Matrix> {
    let s = core(spectral::stft_samples(&samples, FRAME_LEN, HOP))?;
    Ok(to_rows(&spectral::power_spec(&s, PowerRole::Noisy).values))
}

#[pyfunction]
#[pyo3(signature = (power, floor = LOG_FLOOR))]
fn log_power(power: Matrix, floor: f64) -> PyResult<Matrix> {
    let p = self::power(&power, PowerRole::Noisy)?;
    Ok(to_rows(&spectral::log_power(&p, floor).values))
}

/// Training target from the noisy power and the raw noise power; the noise
/// PSD is smoothed first, as in training.
#[pyfunction]
#[pyo3(signature = (noisy_power, noise_power, config = None))]
fn oracle_spp(noisy_power: Matrix, noise_power: Matrix, config: Option<&str>) -> PyResult<Matrix> {
    let cfg: TargetConfig = parse_config(config)?;
    core(cfg.validate())?;
    let noisy = power(&noisy_power, PowerRole::Noisy)?;
    let psd =
        target::smooth_noise_psd(&power(&noise_power, PowerRole::Noise)?, cfg.noise_smoothing);
    Ok(to_rows(
        &core(target::oracle_spp(&noisy, &psd, &cfg))?.values,
    ))
}

#[pyfunction]
#[pyo3(signature = (clean_power, threshold_db = 60.0))]
fn labels(clean_power: Matrix, threshold_db: f64) -> PyResult<Vec<Vec<u32>>> {
    let l = core(target::ground_truth_labels(
        &power(&clean_power, PowerRole::Clean)?,
        threshold_db,
    ))?;
    Ok(l.values
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| u32::from(v)).collect())
        .collect())
}

/// Blind baseline; returns `(spp, noise_psd)`.
#[pyfunction]
#[pyo3(signature = (noisy_power, config = None))]
fn unbiased_mmse_spp(noisy_power: Matrix, config: Option<&str>) -> PyResult<(Matrix, Matrix)> {
    let cfg: BaselineConfig = parse_config(config)?;
    core(cfg.validate())?;
    let (spp, psd) = core(baseline::unbiased_mmse_spp(
        &power(&noisy_power, PowerRole::Noisy)?,
        &cfg,
    ))?;
    Ok((to_rows(&spp.values), to_rows(&psd.values)))
}

fn roc(scores: &[f64], labels: &[u8]) -> PyResult<RocCurve> {
    core(eval::roc_curve(scores, labels))
}

/// `(p_fa, p_d)` operating points from (0, 0) to (1, 1).
#[pyfunction]
fn roc_curve(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<Vec<(f64, f64)>> {
    Ok(roc(&scores, &labels)?
        .points
        .iter()
        .map(|p| (p.p_fa, p.p_d))
        .collect())
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    Ok(eval::auc(&roc(&scores, &labels)?))
}

#[pyfunction]
#[pyo3(signature = (scores, labels, pfa = 0.05))]
fn pd_at_pfa(scores: Vec<f64>, labels: Vec<u8>, pfa: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&pfa) {
        return Err(PyValueError::new_err("pfa must lie in [0, 1]"));
    }
    Ok(eval::pd_at_pfa(&roc(&scores, &labels)?, pfa))
}

#[pyfunction]
fn gru_param_count(n: usize, h: usize) -> usize {
    gru::param_count(n, h)
}

#[pyfunction]
fn gru_macs_per_step(n: usize, h: usize) -> usize {
    gru::macs_per_step(n, h)
}

/// A trained (or untrained) estimator ensemble.
#[pyclass(name = "Bundle", module = "binspp_py")]
pub struct PyBundle {
    pub inner: ModelBundle,
}

#[pymethods]
impl PyBundle {
    /// Fresh weights with identity normalization. `config` is a JSON model
    /// section; the default is the bin-wise model without neighbours.
    #[staticmethod]
    #[pyo3(signature = (config = None))]
    fn untrained(config: Option<&str>) -> PyResult<Self> {
        let cfg: ModelConfig = parse_config(config)?;
        core(cfg.validate())?;
        let inner = core(ModelBundle::untrained(&cfg, NormStats::identity(cfg.bins)))?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core(ModelBundle::load(path))?,
        })
    }

    /// Trains on a manifest written by `binspp mix`; returns the bundle and
    /// the mean loss per epoch.
    #[staticmethod]
    #[pyo3(signature = (manifest, config = None, target_config = None))]
    fn train(
        py: Python<'_>,
        manifest: PathBuf,
        config: Option<&str>,
        target_config: Option<&str>,
    ) -> PyResult<(Self, Vec<f64>)> {
        let cfg: ModelConfig = parse_config(config)?;
        let tcfg: TargetConfig = parse_config(target_config)?;
        core(cfg.validate())?;
        core(tcfg.validate())?;
        let m = core(Manifest::load(manifest, Split::Train))?;
        let (inner, log) = py
            .detach(|| match cfg.kind {
                ModelKind::Binwise => model::train_binwise(&m, &cfg, &tcfg),
                ModelKind::Typical => model::train_typical(&m, &cfg, &tcfg),
            })
            .map_err(to_py_err)?;
        Ok((Self { inner }, log.epochs.iter().map(|e| e.loss).collect()))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        core(self.inner.save(path))
    }

    fn to_json(&self) -> PyResult<String> {
        core(self.inner.to_json())
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core(ModelBundle::from_json(s))?,
        })
    }

    /// K×L SPP matrix for a mono 16 kHz signal.
    fn infer(&self, py: Python<'_>, samples: Vec<f64>) -> PyResult<Matrix> {
        let u = utterance(samples)?;
        let spp = py.detach(|| self.inner.infer(&u)).map_err(to_py_err)?;
        Ok(to_rows(&spp.values))
    }

    fn count_params(&self) -> usize {
        self.inner.count_params()
    }

    fn count_macs(&self) -> usize {
        self.inner.count_macs_per_frame()
    }

    #[getter]
    fn num_models(&self) -> usize {
        self.inner.models.len()
    }

    #[getter]
    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.config).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.config.fingerprint()
    }

    fn __repr__(&self) -> String {
        format!(
            "Bundle(models={}, params={}, macs_per_frame={})",
            self.inner.models.len(),
            self.inner.count_params(),
            self.inner.count_macs_per_frame()
        )
    }
}

#[pymodule]
pub fn binspp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FRAME_LEN", FRAME_LEN)?;
    m.add("HOP", HOP)?;
    m.add_function(wrap_pyfunction!(hann_window, m)?)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(mix_at_snr, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrogram, m)?)?;
    m.add_function(wrap_pyfunction!(log_power, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_spp, m)?)?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add_function(wrap_pyfunction!(unbiased_mmse_spp, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(pd_at_pfa, m)?)?;
    m.add_function(wrap_pyfunction!(gru_param_count, m)?)?;
    m.add_function(wrap_pyfunction!(gru_macs_per_step, m)?)?;
    m.add_class::<PyBundle>()?;
    Ok(())
}
