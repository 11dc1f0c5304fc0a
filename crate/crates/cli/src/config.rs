use std::path::Path;

use binspp::baseline::BaselineConfig;
use binspp::model::ModelConfig;
use binspp::target::TargetConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixConfig {
    pub snr_min: f64,
    pub snr_max: f64,
    pub seed: u64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self {
            snr_min: -5.0,
            snr_max: 25.0,
            seed: 0,
        }
    }
}

/// Everything a run can be configured with, loaded from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub target: TargetConfig,
    pub baseline: BaselineConfig,
    pub mix: MixConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                if !p.exists() {
                    return Err(binspp::Error::NotFound(p.to_path_buf()).into());
                }
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.model.seed = s;
            cfg.mix.seed = s;
        }
        cfg.model.validate()?;
        cfg.target.validate()?;
        cfg.baseline.validate()?;
        if !(cfg.mix.snr_min <= cfg.mix.snr_max) {
            return Err(CliError::Invalid(
                "mix.snr_min must not exceed mix.snr_max".into(),
            ));
        }
        Ok(cfg)
    }
}
