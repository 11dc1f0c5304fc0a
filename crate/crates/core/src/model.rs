//! Bin-wise GRU ensemble and the all-bins "typical" model: training,
//! inference, bundle files and complexity accounting.

use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{Manifest, Mixture, Utterance};
use crate::error::{Error, Result};
use crate::gru::{
    self, adam_step, backward_into, gru_forward, init_gru, softplus_head, AdamState, GruParams,
    HeadConfig,
};
use crate::seed::derive_seed;
use crate::spectral::{
    compute_norm_stats, features_of, normalize, power_spec, stft, FeatureMatrix, NormStats,
    PowerRole, FRAME_LEN, HOP, NUM_BINS,
};
use crate::target::{oracle_spp, smooth_noise_psd, SppMatrix, TargetConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Seed stream used for the per-epoch data order.
const ORDER_STREAM: u64 = 0x006f_7264_6572;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Binwise,
    Typical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Number of frequency bins K.
    pub bins: usize,
    /// Neighbor radius I (bin-wise only).
    pub neighbors: usize,
    pub hidden: usize,
    pub head: HeadConfig,
    pub lr: f64,
    pub weight_decay: f64,
    /// Zero-based epochs at which the learning rate is multiplied by
    /// `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub batch_utterances: usize,
    /// Longest stretch of frames backpropagated at once; the state is carried
    /// across chunk boundaries but the gradient is not.
    pub bptt_chunk: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Binwise,
            bins: NUM_BINS,
            neighbors: 0,
            hidden: 1,
            head: HeadConfig::default(),
            lr: 1e-3,
            weight_decay: 1e-5,
            lr_decay_epochs: vec![50, 100],
            lr_decay_factor: 0.1,
            epochs: 120,
            batch_utterances: 8,
            bptt_chunk: 1000,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn binwise(neighbors: usize) -> Self {
        Self {
            neighbors,
            ..Self::default()
        }
    }

    pub fn typical() -> Self {
        Self {
            kind: ModelKind::Typical,
            hidden: NUM_BINS,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.bins == 0 {
            return bad("bins must be >= 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be positive");
        }
        if !(self.head.beta > 0.0) {
            return bad("head.beta must be positive");
        }
        if self.batch_utterances == 0 || self.bptt_chunk == 0 {
            return bad("batch_utterances and bptt_chunk must be >= 1");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return bad("lr_decay_factor must lie in (0, 1]");
        }
        if self.weight_decay < 0.0 {
            return bad("weight_decay must be >= 0");
        }
        if self.kind == ModelKind::Typical && self.hidden != self.bins {
            return bad("typical model requires hidden == bins");
        }
        Ok(())
    }

    /// Learning rate in effect during zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_decay_epochs.iter().filter(|&&d| epoch >= d).count();
        self.lr * self.lr_decay_factor.powi(drops as i32)
    }

    pub fn fingerprint(&self) -> String {
        config_fingerprint(self)
    }
}

/// Short hex digest of the canonical JSON form of any configuration.
pub fn config_fingerprint<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

/// Bins feeding the estimator of bin `k`, truncated at the spectrum edges.
pub fn neighbor_range(k: usize, bins: usize, radius: usize) -> Range<usize> {
    k.saturating_sub(radius)..(k + radius + 1).min(bins)
}

/// `L × n` input sequence for bin `k`: frames as rows, neighboring bins in
/// ascending order as columns.
pub fn assemble_neighborhood(f: &FeatureMatrix, k: usize, radius: usize) -> Result<Array2<f64>> {
    let flat = neighborhood_flat(&f.values, k, radius)?;
    let n = neighbor_range(k, f.bins(), radius).len();
    Ok(Array2::from_shape_vec((f.frames(), n), flat).expect("consistent shape"))
}

fn neighborhood_flat(values: &Array2<f64>, k: usize, radius: usize) -> Result<Vec<f64>> {
    let (bins, frames) = values.dim();
    if k >= bins {
        return Err(Error::BinOutOfRange { bin: k, bins });
    }
    let range = neighbor_range(k, bins, radius);
    let mut out = Vec::with_capacity(frames * range.len());
    for l in 0..frames {
        out.extend(range.clone().map(|b| values[[b, l]]));
    }
    Ok(out)
}

/// Transposes a K×L matrix into a frame-major flat `L × K` sequence.
fn frames_major(values: &Array2<f64>) -> Vec<f64> {
    values.t().iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config: ModelConfig,
    pub norm: NormStats,
    pub models: Vec<GruParams>,
}

impl ModelBundle {
    /// Freshly initialized (untrained) bundle for `cfg`.
    pub fn untrained(cfg: &ModelConfig, norm: NormStats) -> Result<Self> {
        cfg.validate()?;
        if norm.bins() != cfg.bins {
            return Err(Error::BinCountMismatch {
                expected: cfg.bins,
                actual: norm.bins(),
            });
        }
        let models = match cfg.kind {
            ModelKind::Binwise => (0..cfg.bins)
                .map(|k| {
                    let n = neighbor_range(k, cfg.bins, cfg.neighbors).len();
                    init_gru(n, cfg.hidden, derive_seed(cfg.seed, k as u64))
                })
                .collect::<Result<Vec<_>>>()?,
            ModelKind::Typical => vec![init_gru(cfg.bins, cfg.hidden, derive_seed(cfg.seed, 0))?],
        };
        Ok(Self {
            format_version: FORMAT_VERSION,
            config: cfg.clone(),
            norm,
            models,
        })
    }

    pub fn count_params(&self) -> usize {
        self.models.iter().map(|m| gru::param_count(m.n, m.h)).sum()
    }

    pub fn count_macs_per_frame(&self) -> usize {
        self.models
            .iter()
            .map(|m| gru::macs_per_step(m.n, m.h))
            .sum()
    }

    /// Checks the structural invariants tying `models` to `config`.
    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        cfg.validate()?;
        let corrupt = |m: String| Err(Error::CorruptFile(m));
        if self.norm.bins() != cfg.bins || self.norm.std.len() != cfg.bins {
            return corrupt("normalization stats do not match bin count".into());
        }
        match cfg.kind {
            ModelKind::Binwise => {
                if self.models.len() != cfg.bins {
                    return corrupt(format!(
                        "expected {} models, found {}",
                        cfg.bins,
                        self.models.len()
                    ));
                }
                for (k, m) in self.models.iter().enumerate() {
                    let n = neighbor_range(k, cfg.bins, cfg.neighbors).len();
                    if m.n != n || m.h != cfg.hidden {
                        return corrupt(format!(
                            "model {k} has shape ({}, {}), expected ({n}, {})",
                            m.n, m.h, cfg.hidden
                        ));
                    }
                }
            }
            ModelKind::Typical => {
                if self.models.len() != 1
                    || self.models[0].n != cfg.bins
                    || self.models[0].h != cfg.bins
                {
                    return corrupt("typical bundle must hold one K×K model".into());
                }
            }
        }
        Ok(())
    }

    /// SPP for already-normalized features.
    pub fn infer_normalized(&self, f: &FeatureMatrix) -> Result<SppMatrix> {
        let cfg = &self.config;
        if f.bins() != cfg.bins {
            return Err(Error::BinCountMismatch {
                expected: cfg.bins,
                actual: f.bins(),
            });
        }
        let frames = f.frames();
        match cfg.kind {
            ModelKind::Binwise => {
                let rows = self
                    .models
                    .par_iter()
                    .enumerate()
                    .map(|(k, m)| {
                        let x = neighborhood_flat(&f.values, k, cfg.neighbors)?;
                        let (hs, _) = gru_forward(m, &x, None)?;
                        // h may exceed 1 only for custom configs; read unit 0.
                        Ok(hs
                            .chunks(m.h)
                            .map(|s| gru::softplus(s[0], &cfg.head).0)
                            .collect::<Vec<_>>())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Ok(SppMatrix {
                    values: Array2::from_shape_vec((cfg.bins, frames), flat)
                        .expect("consistent shape"),
                })
            }
            ModelKind::Typical => {
                let x = frames_major(&f.values);
                let (hs, _) = gru_forward(&self.models[0], &x, None)?;
                let y = softplus_head(&hs, &cfg.head);
                let lk = Array2::from_shape_vec((frames, cfg.bins), y).expect("consistent shape");
                Ok(SppMatrix {
                    values: lk.reversed_axes().as_standard_layout().into_owned(),
                })
            }
        }
    }

    /// Full front end (STFT, log power, stored normalization) then the
    /// recurrent estimators, frame by frame.
    pub fn infer(&self, u: &Utterance) -> Result<SppMatrix> {
        let (_, feats) = features_of(u)?;
        self.infer_normalized(&normalize(&feats, &self.norm)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = BundleFile {
            format_version: self.format_version,
            config: self.config.clone(),
            norm: self.norm.clone(),
            models: self.models.iter().map(ModelRecord::from).collect(),
            checksum: checksum(&self.norm, &self.models),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| Error::CorruptFile(format!("invalid JSON: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptFile("missing format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let file: BundleFile =
            serde_json::from_value(value).map_err(|e| Error::CorruptFile(e.to_string()))?;
        let models = file
            .models
            .into_iter()
            .map(GruParams::try_from)
            .collect::<Result<Vec<_>>>()?;
        if checksum(&file.norm, &models) != file.checksum {
            return Err(Error::CorruptFile("checksum mismatch".into()));
        }
        let bundle = Self {
            format_version: file.format_version,
            config: file.config,
            norm: file.norm,
            models,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    format_version: u32,
    config: ModelConfig,
    norm: NormStats,
    models: Vec<ModelRecord>,
    checksum: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    n: usize,
    h: usize,
    w_input: Vec<Vec<f64>>,
    w_recurrent: Vec<Vec<f64>>,
    bias_input: Vec<f64>,
    bias_recurrent: Vec<f64>,
}

impl From<&GruParams> for ModelRecord {
    fn from(p: &GruParams) -> Self {
        Self {
            n: p.n,
            h: p.h,
            w_input: p.w_input.chunks(p.n).map(<[f64]>::to_vec).collect(),
            w_recurrent: p.w_recurrent.chunks(p.h).map(<[f64]>::to_vec).collect(),
            bias_input: p.bias_input.clone(),
            bias_recurrent: p.bias_recurrent.clone(),
        }
    }
}

impl TryFrom<ModelRecord> for GruParams {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let (n, h) = (r.n, r.h);
        let rows_ok = |m: &Vec<Vec<f64>>, cols: usize| {
            m.len() == 3 * h && m.iter().all(|row| row.len() == cols)
        };
        if n == 0
            || h == 0
            || !rows_ok(&r.w_input, n)
            || !rows_ok(&r.w_recurrent, h)
            || r.bias_input.len() != 3 * h
            || r.bias_recurrent.len() != 3 * h
        {
            return Err(Error::CorruptFile(format!(
                "model arrays inconsistent with n={n}, h={h}"
            )));
        }
        Ok(GruParams {
            n,
            h,
            w_input: r.w_input.concat(),
            w_recurrent: r.w_recurrent.concat(),
            bias_input: r.bias_input,
            bias_recurrent: r.bias_recurrent,
        })
    }
}

/// SHA-256 over the little-endian bit patterns of every stored number:
/// norm mean, norm std, then per model w_input, w_recurrent, bias_input,
/// bias_recurrent (row-major).
fn checksum(norm: &NormStats, models: &[GruParams]) -> String {
    let mut h = Sha256::new();
    let mut feed = |xs: &[f64]| {
        for x in xs {
            h.update(x.to_le_bytes());
        }
    };
    feed(&norm.mean);
    feed(&norm.std);
    for m in models {
        for t in m.tensors() {
            feed(t);
        }
    }
    hex::encode(h.finalize())
}

/// Features and oracle target for one training utterance.
#[derive(Debug, Clone)]
pub struct PreparedUtterance {
    pub id: String,
    /// Raw (unnormalized) log-power features.
    pub features: FeatureMatrix,
    pub target: SppMatrix,
}

impl PreparedUtterance {
    pub fn from_mixture(m: &Mixture, tcfg: &TargetConfig) -> Result<Self> {
        let (noisy_power, features) = features_of(&m.noisy)?;
        let noise_power = power_spec(&stft(&m.scaled_noise, FRAME_LEN, HOP)?, PowerRole::Noise);
        let psd = smooth_noise_psd(&noise_power, tcfg.noise_smoothing);
        let target = oracle_spp(&noisy_power, &psd, tcfg)?;
        Ok(Self {
            id: m.clean.id.clone(),
            features,
            target,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

/// One training sequence: flat `L × n` input and `L × h` target.
struct Sequence {
    input: Vec<f64>,
    target: Vec<f64>,
    frames: usize,
}

/// Trains one GRU; returns the parameters and the mean training loss per
/// epoch (averaged over utterances, measured before each update).
fn fit(
    mut params: GruParams,
    data: &[Sequence],
    cfg: &ModelConfig,
    bin: Option<usize>,
) -> Result<(GruParams, Vec<f64>)> {
    let (n, h) = (params.n, params.h);
    let mut adam = AdamState::new(&params, cfg.lr, cfg.weight_decay);
    let mut grads = GruParams::zeros(n, h)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        adam.lr = cfg.lr_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed ^ ORDER_STREAM,
            epoch as u64,
        )));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_utterances) {
            grads.scale(0.0);
            for &i in batch {
                let seq = &data[i];
                let norm = (seq.frames * h) as f64;
                let scale = 1.0 / (norm * batch.len() as f64);
                let mut carry: Option<Vec<f64>> = None;
                let mut sse = 0.0;
                for start in (0..seq.frames).step_by(cfg.bptt_chunk) {
                    let end = (start + cfg.bptt_chunk).min(seq.frames);
                    let x = &seq.input[start * n..end * n];
                    let t = &seq.target[start * h..end * h];
                    let (_, cache) = gru_forward(&params, x, carry.as_deref())?;
                    sse += backward_into(&params, &cache, &cfg.head, t, scale, &mut grads)?;
                    carry = Some(cache.last_state().to_vec());
                }
                epoch_loss += sse / norm;
            }
            if !grads.is_finite() {
                return Err(Error::DivergedLoss { epoch, bin });
            }
            adam_step(&mut params, &grads, &mut adam)?;
        }
        let loss = epoch_loss / data.len() as f64;
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::DivergedLoss { epoch, bin });
        }
        history.push(loss);
    }
    Ok((params, history))
}

/// Trains a bundle of `cfg.kind` on prepared utterances. Normalization
/// statistics are computed once over all supplied utterances.
pub fn train_prepared(
    data: &[PreparedUtterance],
    cfg: &ModelConfig,
) -> Result<(ModelBundle, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyManifest);
    }
    for d in data {
        if d.features.bins() != cfg.bins {
            return Err(Error::BinCountMismatch {
                expected: cfg.bins,
                actual: d.features.bins(),
            });
        }
        if d.target.shape() != d.features.values.dim() {
            return Err(Error::ShapeMismatch {
                expected: d.features.values.dim(),
                actual: d.target.shape(),
            });
        }
    }
    let norm = compute_norm_stats(data.iter().map(|d| &d.features))?;
    let normalized = data
        .iter()
        .map(|d| normalize(&d.features, &norm))
        .collect::<Result<Vec<_>>>()?;
    let mut bundle = ModelBundle::untrained(cfg, norm)?;

    let histories: Vec<Vec<f64>> = match cfg.kind {
        ModelKind::Binwise => {
            if cfg.hidden != 1 {
                return Err(Error::InvalidConfig(
                    "bin-wise models use hidden = 1".into(),
                ));
            }
            let init = std::mem::take(&mut bundle.models);
            let trained = init
                .into_par_iter()
                .enumerate()
                .map(|(k, p)| {
                    let seqs = normalized
                        .iter()
                        .zip(data)
                        .map(|(f, d)| {
                            Ok(Sequence {
                                input: neighborhood_flat(&f.values, k, cfg.neighbors)?,
                                target: d.target.values.row(k).to_vec(),
                                frames: f.frames(),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    fit(p, &seqs, cfg, Some(k))
                })
                .collect::<Result<Vec<_>>>()?;
            let (models, hist): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
            bundle.models = models;
            hist
        }
        ModelKind::Typical => {
            let seqs: Vec<Sequence> = normalized
                .iter()
                .zip(data)
                .map(|(f, d)| Sequence {
                    input: frames_major(&f.values),
                    target: frames_major(&d.target.values),
                    frames: f.frames(),
                })
                .collect();
            let p = bundle.models.pop().expect("one model");
            let (p, hist) = fit(p, &seqs, cfg, None)?;
            bundle.models = vec![p];
            vec![hist]
        }
    };

    let epochs = (0..cfg.epochs)
        .map(|e| EpochStats {
            epoch: e,
            lr: cfg.lr_at(e),
            loss: histories.iter().map(|h| h[e]).sum::<f64>() / histories.len() as f64,
        })
        .collect();
    Ok((bundle, TrainingLog { epochs }))
}

/// Loads every manifest entry and prepares features and oracle targets.
pub fn prepare_manifest(
    manifest: &Manifest,
    tcfg: &TargetConfig,
) -> Result<Vec<PreparedUtterance>> {
    tcfg.validate()?;
    manifest
        .entries
        .par_iter()
        .map(|e| PreparedUtterance::from_mixture(&e.load_mixture()?, tcfg))
        .collect()
}

fn train_manifest(
    manifest: &Manifest,
    cfg: &ModelConfig,
    tcfg: &TargetConfig,
    kind: ModelKind,
) -> Result<(ModelBundle, TrainingLog)> {
    if cfg.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "config kind is {:?}, expected {:?}",
            cfg.kind, kind
        )));
    }
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    cfg.validate()?;
    train_prepared(&prepare_manifest(manifest, tcfg)?, cfg)
}

pub fn train_binwise(
    manifest: &Manifest,
    cfg: &ModelConfig,
    tcfg: &TargetConfig,
) -> Result<(ModelBundle, TrainingLog)> {
    train_manifest(manifest, cfg, tcfg, ModelKind::Binwise)
}

pub fn train_typical(
    manifest: &Manifest,
    cfg: &ModelConfig,
    tcfg: &TargetConfig,
) -> Result<(ModelBundle, TrainingLog)> {
    train_manifest(manifest, cfg, tcfg, ModelKind::Typical)
}

pub fn infer(b: &ModelBundle, u: &Utterance) -> Result<SppMatrix> {
    b.infer(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn neighborhoods() {
        let f = FeatureMatrix {
            values: Array2::from_shape_fn((5, 3), |(k, l)| (10 * k + l) as f64),
        };
        let x = assemble_neighborhood(&f, 2, 1).unwrap();
        assert_eq!(
            x,
            array![[10.0, 20.0, 30.0], [11.0, 21.0, 31.0], [12.0, 22.0, 32.0]]
        );
        let x = assemble_neighborhood(&f, 0, 1).unwrap();
        assert_eq!(x.ncols(), 2);
        assert_eq!(x.column(0).to_vec(), vec![0.0, 1.0, 2.0]);
        let x = assemble_neighborhood(&f, 4, 0).unwrap();
        assert_eq!(x.column(0).to_vec(), f.values.row(4).to_vec());
        assert!(matches!(
            assemble_neighborhood(&f, 5, 0),
            Err(Error::BinOutOfRange { bin: 5, bins: 5 })
        ));
    }

    #[test]
    fn complexity_counts() {
        let b = ModelBundle::untrained(&ModelConfig::binwise(0), NormStats::identity(129)).unwrap();
        assert_eq!(b.count_params(), 1548);
        assert_eq!(b.count_macs_per_frame(), 774);
        let b1 =
            ModelBundle::untrained(&ModelConfig::binwise(1), NormStats::identity(129)).unwrap();
        assert_eq!(b1.count_params(), 127 * 18 + 2 * 15);
        let b2 =
            ModelBundle::untrained(&ModelConfig::binwise(2), NormStats::identity(129)).unwrap();
        assert_eq!(b2.count_params(), 125 * 24 + 2 * 18 + 2 * 21);
        let t = ModelBundle::untrained(&ModelConfig::typical(), NormStats::identity(129)).unwrap();
        assert_eq!(t.count_params(), 100_620);
        assert_eq!(t.count_macs_per_frame(), 99_846);
        for b in [&b, &b1, &b2, &t] {
            let stored: usize = b.models.iter().map(GruParams::num_params).sum();
            assert_eq!(stored, b.count_params());
        }
    }

    #[test]
    fn lr_schedule() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.lr_at(0), 1e-3);
        assert_eq!(cfg.lr_at(49), 1e-3);
        assert!((cfg.lr_at(50) - 1e-4).abs() < 1e-18);
        assert!((cfg.lr_at(100) - 1e-5).abs() < 1e-18);
        let lrs: Vec<f64> = (0..120).map(|e| cfg.lr_at(e)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig::typical().validate().is_ok());
        let bad = ModelConfig {
            lr: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            hidden: 5,
            ..ModelConfig::typical()
        };
        assert!(bad.validate().is_err());
        let json = r#"{"kind":"binwise","bogus":1}"#;
        assert!(serde_json::from_str::<ModelConfig>(json).is_err());
        let json = r#"{"kind":"typical","hidden":129,"epochs":3}"#;
        let cfg: ModelConfig = serde_json::from_str(json).unwrap();
        assert_eq!(
            (cfg.kind, cfg.epochs, cfg.lr),
            (ModelKind::Typical, 3, 1e-3)
        );
    }
}
