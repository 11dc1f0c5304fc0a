use std::fs;
use std::path::{Path, PathBuf};

use binspp::audio::{build_manifest, read_wav, write_wav, Manifest, Mixture, Split};
use binspp::baseline::unbiased_mmse_spp;
use binspp::eval::{evaluate, EstimatorInfo, MetricsReport};
use binspp::model::{
    config_fingerprint, train_binwise, train_typical, ModelBundle, ModelKind, PreparedUtterance,
};
use binspp::spectral::{features_of, power_spec, stft, PowerRole, FRAME_LEN, HOP};
use binspp::synth::{tone_burst_corpus, SynthConfig};
use binspp::target::{ground_truth_labels, LabelMatrix, SppMatrix};
use ndarray::Array2;

use crate::config::RunConfig;
use crate::{CliError, EstimatorArg, KindArg, SplitArg};

/// Label threshold below the loudest clean bin, in dB.
const LABEL_THRESHOLD_DB: f64 = 60.0;

pub enum Estimator {
    Bundle(Box<ModelBundle>),
    Unbiased,
    Oracle,
}

impl Estimator {
    pub fn resolve(bundle: Option<&Path>, arg: Option<EstimatorArg>) -> Result<Self, CliError> {
        match (bundle, arg) {
            (Some(p), None) => Ok(Estimator::Bundle(Box::new(ModelBundle::load(p)?))),
            (None, Some(EstimatorArg::Unbiased)) => Ok(Estimator::Unbiased),
            (None, Some(EstimatorArg::Oracle)) => Ok(Estimator::Oracle),
            _ => Err(CliError::Invalid(
                "give exactly one of --bundle or --estimator".into(),
            )),
        }
    }

    fn default_name(&self) -> String {
        match self {
            Estimator::Bundle(b) => match b.config.kind {
                ModelKind::Binwise => format!("binwise-I{}", b.config.neighbors),
                ModelKind::Typical => "typical".into(),
            },
            Estimator::Unbiased => "unbiased".into(),
            Estimator::Oracle => "oracle".into(),
        }
    }

    fn info(&self, cfg: &RunConfig, name: String, dataset: String) -> EstimatorInfo {
        let (config_fingerprint, params, macs_per_frame) = match self {
            Estimator::Bundle(b) => (
                b.config.fingerprint(),
                b.count_params(),
                b.count_macs_per_frame(),
            ),
            Estimator::Unbiased => (config_fingerprint(&cfg.baseline), 0, 0),
            Estimator::Oracle => (config_fingerprint(&cfg.target), 0, 0),
        };
        EstimatorInfo {
            estimator: name,
            dataset,
            config_fingerprint,
            params,
            macs_per_frame,
        }
    }

    fn score(&self, cfg: &RunConfig, m: &Mixture) -> Result<SppMatrix, CliError> {
        Ok(match self {
            Estimator::Bundle(b) => b.infer(&m.noisy)?,
            Estimator::Unbiased => unbiased_mmse_spp(&features_of(&m.noisy)?.0, &cfg.baseline)?.0,
            Estimator::Oracle => PreparedUtterance::from_mixture(m, &cfg.target)?.target,
        })
    }
}

pub fn synth(cfg: &RunConfig, out: &Path, utterances: usize, seconds: f64) -> Result<(), CliError> {
    if utterances == 0 || !(seconds > 0.0) {
        return Err(CliError::Invalid(
            "--utterances and --seconds must be positive".into(),
        ));
    }
    let scfg = SynthConfig {
        utterances,
        seconds,
        snr_min: cfg.mix.snr_min,
        snr_max: cfg.mix.snr_max,
        seed: cfg.mix.seed,
        ..SynthConfig::default()
    };
    let (clean_dir, noise_dir) = (out.join("clean"), out.join("noise"));
    fs::create_dir_all(&clean_dir)?;
    fs::create_dir_all(&noise_dir)?;
    for item in tone_burst_corpus(&scfg)? {
        write_wav(
            clean_dir.join(format!("{}.wav", item.clean.id)),
            &item.clean,
        )?;
        write_wav(
            noise_dir.join(format!("{}.wav", item.noise.id)),
            &item.noise,
        )?;
    }
    println!(
        "wrote {utterances} clean and {utterances} noise files under {}",
        out.display()
    );
    Ok(())
}

pub fn mix(
    cfg: &RunConfig,
    out: &Path,
    clean_dir: &Path,
    noise_dir: &Path,
    split: SplitArg,
) -> Result<(), CliError> {
    let (split, tag) = match split {
        SplitArg::Train => (Split::Train, "train"),
        SplitArg::Test => (Split::Test, "test"),
    };
    let mut manifest = build_manifest(
        clean_dir,
        noise_dir,
        cfg.mix.snr_min,
        cfg.mix.snr_max,
        cfg.mix.seed,
    )?;
    manifest.split = split;
    let dir = out.join("mixtures").join(tag);
    fs::create_dir_all(&dir)?;
    for entry in &mut manifest.entries {
        let m = entry.load_mixture()?;
        let id = entry.clean_id();
        let noisy = dir.join(format!("{id}_noisy.wav"));
        let noise = dir.join(format!("{id}_noise.wav"));
        write_wav(&noisy, &m.noisy)?;
        write_wav(&noise, &m.scaled_noise)?;
        entry.noisy = Some(noisy);
        entry.scaled_noise = Some(noise);
    }
    let path = out.join(format!("manifest_{tag}.json"));
    manifest.save(&path)?;
    println!("{} entries -> {}", manifest.len(), path.display());
    Ok(())
}

pub fn train(
    mut cfg: RunConfig,
    out: &Path,
    manifest: &Path,
    kind: Option<KindArg>,
    neighbors: Option<usize>,
    epochs: Option<usize>,
) -> Result<(), CliError> {
    match kind {
        Some(KindArg::Binwise) => {
            cfg.model.kind = ModelKind::Binwise;
            cfg.model.hidden = 1;
        }
        Some(KindArg::Typical) => {
            cfg.model.kind = ModelKind::Typical;
            cfg.model.hidden = cfg.model.bins;
        }
        None => {}
    }
    if let Some(n) = neighbors {
        cfg.model.neighbors = n;
    }
    if let Some(e) = epochs {
        cfg.model.epochs = e;
    }
    cfg.model.validate()?;
    let manifest = Manifest::load(manifest, Split::Train)?;
    let (bundle, log) = match cfg.model.kind {
        ModelKind::Binwise => train_binwise(&manifest, &cfg.model, &cfg.target)?,
        ModelKind::Typical => train_typical(&manifest, &cfg.model, &cfg.target)?,
    };
    bundle.save(out.join("bundle.json"))?;
    let mut w = csv::Writer::from_path(out.join("loss.csv"))?;
    w.write_record(["epoch", "lr", "loss"])?;
    for e in &log.epochs {
        w.write_record([e.epoch.to_string(), e.lr.to_string(), e.loss.to_string()])?;
    }
    w.flush()?;
    let last = log.epochs.last().map_or(f64::NAN, |e| e.loss);
    println!(
        "trained {} models ({} params, {} MACs/frame), final loss {last:.6}",
        bundle.models.len(),
        bundle.count_params(),
        bundle.count_macs_per_frame()
    );
    Ok(())
}

fn labels_for(entry_clean: &Path, shape: (usize, usize)) -> Result<LabelMatrix, CliError> {
    let clean = read_wav(entry_clean)?;
    let power = power_spec(&stft(&clean, FRAME_LEN, HOP)?, PowerRole::Clean);
    match ground_truth_labels(&power, LABEL_THRESHOLD_DB) {
        Ok(l) => Ok(l),
        Err(binspp::Error::AllSilent) => Ok(LabelMatrix {
            values: Array2::zeros(shape),
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn eval(
    cfg: &RunConfig,
    out: &Path,
    manifest_path: &Path,
    est: &Estimator,
    name: Option<String>,
    dataset: Option<String>,
    dump: bool,
) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest_path, Split::Test)?;
    if manifest.is_empty() {
        return Err(binspp::Error::EmptyManifest.into());
    }
    let name = name.unwrap_or_else(|| est.default_name());
    let dataset = dataset.unwrap_or_else(|| {
        manifest_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let dump_dir = out.join(format!("dump_{name}"));
    if dump {
        fs::create_dir_all(&dump_dir)?;
    }
    let mut outputs = Vec::with_capacity(manifest.len());
    let mut labels = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let m = entry.load_mixture()?;
        let spp = est.score(cfg, &m)?;
        let l = labels_for(&entry.clean, spp.shape())?;
        if dump {
            let id = entry.clean_id();
            write_matrix(&dump_dir.join(format!("{id}_spp.csv")), &spp.values)?;
            write_matrix(
                &dump_dir.join(format!("{id}_labels.csv")),
                &l.values.mapv(f64::from),
            )?;
        }
        outputs.push(spp);
        labels.push(l);
    }
    let mut e = evaluate(&outputs, &labels, &est.info(cfg, name.clone(), dataset))?;
    let roc_name = format!("roc_{name}.csv");
    fs::write(out.join(&roc_name), e.roc.to_csv())?;
    e.report.roc_csv = Some(roc_name);
    let report_path = out.join(format!("report_{name}.json"));
    fs::write(
        &report_path,
        serde_json::to_string_pretty(&e.report).map_err(binspp::Error::from)? + "\n",
    )?;
    println!(
        "{name}: AUC {:.4}, Pd@Pfa=0.05 {:.4} over {} bins -> {}",
        e.report.auc,
        e.report.pd_at_pfa05,
        e.report.bins_pooled,
        report_path.display()
    );
    Ok(())
}

pub fn infer(
    cfg: &RunConfig,
    out: &Path,
    wav: &Path,
    est: &Estimator,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let u = read_wav(wav)?;
    let spp = match est {
        Estimator::Bundle(b) => b.infer(&u)?,
        Estimator::Unbiased => unbiased_mmse_spp(&features_of(&u)?.0, &cfg.baseline)?.0,
        Estimator::Oracle => {
            return Err(CliError::Invalid(
                "the oracle estimator needs the noise component; use `eval` with a manifest".into(),
            ))
        }
    };
    let path = output.unwrap_or_else(|| out.join(format!("{}_spp.csv", u.id)));
    write_matrix(&path, &spp.values)?;
    println!(
        "{} x {} SPP matrix -> {}",
        spp.shape().0,
        spp.shape().1,
        path.display()
    );
    Ok(())
}

/// Rows are bins, columns are frames `f0..f{L-1}`.
fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.ncols()).map(|l| format!("f{l}")))?;
    for row in m.rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

fn load_report(path: &Path) -> Result<MetricsReport, CliError> {
    if !path.exists() {
        return Err(binspp::Error::NotFound(path.to_path_buf()).into());
    }
    serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| CliError::Invalid(format!("malformed report {}: {e}", path.display())))
}

pub fn report(out: &Path, paths: &[PathBuf]) -> Result<(), CliError> {
    let mut rows = paths
        .iter()
        .map(|p| {
            let r = load_report(p)?;
            let roc = r.roc_csv.as_ref().map(|f| {
                let full = p.parent().unwrap_or(Path::new(".")).join(f);
                full.canonicalize().unwrap_or(full)
            });
            Ok((r, roc))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    rows.sort_by(|a, b| {
        b.0.auc
            .total_cmp(&a.0.auc)
            .then_with(|| a.0.estimator.cmp(&b.0.estimator))
    });

    let mut w = csv::Writer::from_path(out.join("report.csv"))?;
    w.write_record([
        "estimator",
        "pd_at_pfa05",
        "auc",
        "params",
        "macs_per_frame",
    ])?;
    for (r, _) in &rows {
        w.write_record([
            r.estimator.clone(),
            r.pd_at_pfa05.to_string(),
            r.auc.to_string(),
            r.params.to_string(),
            r.macs_per_frame.to_string(),
        ])?;
    }
    w.flush()?;

    let curves: Vec<String> = rows
        .iter()
        .filter_map(|(r, roc)| {
            roc.as_ref().map(|p| {
                format!(
                    "'{}' every ::1 using 2:3 with lines title '{} (AUC {:.3})'",
                    p.display(),
                    r.estimator,
                    r.auc
                )
            })
        })
        .collect();
    let mut script = String::from(
        "set datafile separator ','\nset xlabel 'P_fa'\nset ylabel 'P_d'\nset xrange [0:1]\nset yrange [0:1]\nset key bottom right\n",
    );
    if curves.is_empty() {
        script.push_str("# no ROC files referenced by the reports\n");
    } else {
        script.push_str("plot ");
        script.push_str(&curves.join(", \\\n     "));
        script.push('\n');
    }
    fs::write(out.join("roc.gp"), script)?;

    println!(
        "{:<16} {:>11} {:>8} {:>8} {:>10}",
        "estimator", "pd_at_pfa05", "auc", "params", "macs"
    );
    for (r, _) in &rows {
        println!(
            "{:<16} {:>11.4} {:>8.4} {:>8} {:>10}",
            r.estimator, r.pd_at_pfa05, r.auc, r.params, r.macs_per_frame
        );
    }
    let learned: Vec<&MetricsReport> = rows
        .iter()
        .map(|(r, _)| r)
        .filter(|r| r.macs_per_frame > 0)
        .collect();
    let smallest = learned.iter().min_by_key(|r| r.macs_per_frame);
    let largest = learned.iter().max_by_key(|r| r.macs_per_frame);
    if let (Some(s), Some(l)) = (smallest, largest) {
        if s.macs_per_frame < l.macs_per_frame {
            println!(
                "MAC ratio {}/{}: {:.5}",
                s.estimator,
                l.estimator,
                s.macs_per_frame as f64 / l.macs_per_frame as f64
            );
        }
    }
    Ok(())
}
