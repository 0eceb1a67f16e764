//! Flat `key = value` run configuration. Files set keys in order, later
//! assignments win, and the echo emitted with every run parses back to
//! the identical configuration.

use std::fs;
use std::path::Path;

use crate::encoders::NscMeasure;
use crate::error::{CasoError, Result};
use crate::model::{RecomputeMode, TrainingConfig};

/// Training knobs plus the split fractions around them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainingConfig,
    /// Fraction of memberships kept out of the test split.
    pub train_frac: f64,
    /// Fraction of the kept memberships diverted to validation.
    pub valid_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainingConfig::default(),
            train_frac: 0.8,
            valid_frac: 0.125,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.train_frac > 0.0 && self.train_frac <= 1.0) {
            return Err(CasoError::invalid(
                "train_frac",
                format!("{} outside (0, 1]", self.train_frac),
            ));
        }
        if !(0.0..1.0).contains(&self.valid_frac) {
            return Err(CasoError::invalid(
                "valid_frac",
                format!("{} outside [0, 1)", self.valid_frac),
            ));
        }
        Ok(())
    }

    /// Sets one key. Unknown keys and unparseable values error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                CasoError::Config(format!("key {key}: cannot parse '{value}'"))
            })
        }
        let t = &mut self.train;
        match key {
            "alpha" => t.alpha = num(key, value)?,
            "beta" => t.beta = num(key, value)?,
            "gamma" => t.gamma = num(key, value)?,
            "lambda" => t.lambda = num(key, value)?,
            "theta" => t.theta = num(key, value)?,
            "zeta" => t.zeta = num(key, value)?,
            "T" => t.t = num(key, value)?,
            "dim" => t.dim = num(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "max_epochs" => t.max_epochs = num(key, value)?,
            "patience" => t.patience = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "measure" => t.measure = NscMeasure::parse(value)?,
            "fme_iterations" => t.fme_iterations = num(key, value)?,
            "fme_stop_gradient" => t.fme_stop_gradient = num(key, value)?,
            "recompute" => {
                t.recompute = match value {
                    "per_step" => RecomputeMode::PerStep,
                    "per_epoch" => RecomputeMode::PerEpoch,
                    other => {
                        return Err(CasoError::Config(format!(
                            "key recompute: expected per_step or per_epoch, got '{other}'"
                        )))
                    }
                }
            }
            "no_smm" => t.ablations.no_smm = num(key, value)?,
            "no_sca" => t.ablations.no_sca = num(key, value)?,
            "no_uce" => t.ablations.no_uce = num(key, value)?,
            "no_fme" => t.ablations.no_fme = num(key, value)?,
            "no_kl" => t.ablations.no_kl = num(key, value)?,
            "train_frac" => self.train_frac = num(key, value)?,
            "valid_frac" => self.valid_frac = num(key, value)?,
            other => {
                return Err(CasoError::Config(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }
}

/// Applies `key = value` lines to `cfg`. `#` comments and blank lines
/// are skipped; errors carry the 1-based line number.
pub fn apply_config_text(cfg: &mut RunConfig, label: &str, text: &str) -> Result<()> {
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CasoError::parse(
                label,
                idx + 1,
                format!("expected 'key = value', got '{line}'"),
            ));
        };
        cfg.apply(key.trim(), value.trim())
            .map_err(|e| CasoError::parse(label, idx + 1, e.to_string()))?;
    }
    Ok(())
}

pub fn load_config_file(cfg: &mut RunConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)?;
    apply_config_text(cfg, &path.display().to_string(), &text)
}

/// The fully resolved configuration in a fixed key order. Parsing the
/// echo back reproduces the configuration exactly (floats print with
/// shortest round-trip representation).
pub fn config_echo(cfg: &RunConfig) -> String {
    let t = &cfg.train;
    let recompute = match t.recompute {
        RecomputeMode::PerStep => "per_step",
        RecomputeMode::PerEpoch => "per_epoch",
    };
    let entries: Vec<(&str, String)> = vec![
        ("alpha", t.alpha.to_string()),
        ("beta", t.beta.to_string()),
        ("gamma", t.gamma.to_string()),
        ("lambda", t.lambda.to_string()),
        ("theta", t.theta.to_string()),
        ("zeta", t.zeta.to_string()),
        ("T", t.t.to_string()),
        ("dim", t.dim.to_string()),
        ("measure", t.measure.name().to_string()),
        ("learning_rate", t.learning_rate.to_string()),
        ("batch_size", t.batch_size.to_string()),
        ("max_epochs", t.max_epochs.to_string()),
        ("patience", t.patience.to_string()),
        ("seed", t.seed.to_string()),
        ("fme_iterations", t.fme_iterations.to_string()),
        ("fme_stop_gradient", t.fme_stop_gradient.to_string()),
        ("recompute", recompute.to_string()),
        ("no_smm", t.ablations.no_smm.to_string()),
        ("no_sca", t.ablations.no_sca.to_string()),
        ("no_uce", t.ablations.no_uce.to_string()),
        ("no_fme", t.ablations.no_fme.to_string()),
        ("no_kl", t.ablations.no_kl.to_string()),
        ("train_frac", cfg.train_frac.to_string()),
        ("valid_frac", cfg.valid_frac.to_string()),
    ];
    entries
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
