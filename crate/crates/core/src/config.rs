//! Training configuration shared by the networks, trainer and CLI.

use serde::{Deserialize, Serialize};

use crate::data::NormalizeMode;
use crate::networks::Activation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

/// How fake samples are paired with each view's discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// One other view per epoch, rotating through the others.
    Cyclic,
    /// Every other view, every epoch.
    AllPairs,
}

/// Layer widths of every network. Input and output widths are implied by the
/// data and by `dz`/`dc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    /// Hidden widths of each view-specific encoder; the last entry is the width of `H`.
    pub encoder_hidden: Vec<usize>,
    /// Output width of each view's input adapter into the shared trunk.
    pub adapter_width: usize,
    /// Widths of the shared trunk after the adapter; the last entry is the width of `Hbar`.
    pub trunk_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            encoder_hidden: vec![512, 256],
            adapter_width: 512,
            trunk_hidden: vec![256],
            decoder_hidden: vec![256, 512],
            discriminator_hidden: vec![128],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Width of each view-specific representation `Z^v`.
    pub dz: usize,
    /// Width of each view-common representation `C^v`.
    pub dc: usize,
    /// Weight of the correlation and adversarial terms.
    pub alpha: f64,
    /// Weight of the neighbor cross-entropy term.
    pub beta: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Number of clusters; taken from the labels when absent.
    pub k: Option<usize>,
    /// Positives per sample in the neighbor cross-entropy.
    pub n_omega: usize,
    /// Fraction of samples given hidden views before training.
    pub missing_ratio: f64,
    pub architecture: Architecture,
    pub pairing: Pairing,
    /// Neighbor sets are rebuilt every this many epochs.
    pub neighbor_refresh: usize,
    /// `None` trains full batch.
    pub batch_size: Option<usize>,
    pub normalization: NormalizeMode,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dz: 64,
            dc: 64,
            alpha: 0.01,
            beta: 0.01,
            epochs: 500,
            learning_rate: 1e-3,
            seed: 42,
            k: None,
            n_omega: 5,
            missing_ratio: 0.0,
            architecture: Architecture::default(),
            pairing: Pairing::Cyclic,
            neighbor_refresh: 10,
            batch_size: None,
            normalization: NormalizeMode::MinMax,
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that does not depend on the dataset.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dz == 0 {
            return Err(invalid("dz", "must be at least 1"));
        }
        if self.dc == 0 {
            return Err(invalid("dc", "must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("must be finite and non-negative, got {}", self.alpha),
            ));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid(
                "beta",
                format!("must be finite and non-negative, got {}", self.beta),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be finite and non-negative"));
        }
        if self.n_omega == 0 {
            return Err(invalid("n_omega", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.missing_ratio) {
            return Err(invalid("missing_ratio", "must lie in [0, 1)"));
        }
        if self.neighbor_refresh == 0 {
            return Err(invalid("neighbor_refresh", "must be at least 1"));
        }
        if let Some(b) = self.batch_size {
            if b <= self.n_omega + 1 {
                return Err(invalid("batch_size", "must exceed n_omega + 1"));
            }
        }
        if self.k == Some(0) {
            return Err(invalid("k", "must be at least 1"));
        }
        if self.kmeans_restarts == 0 {
            return Err(invalid("kmeans_restarts", "must be at least 1"));
        }
        let arch = &self.architecture;
        let widths = arch
            .encoder_hidden
            .iter()
            .chain(&arch.trunk_hidden)
            .chain(&arch.decoder_hidden)
            .chain(&arch.discriminator_hidden)
            .chain(std::iter::once(&arch.adapter_width));
        if widths.clone().any(|w| *w == 0) {
            return Err(invalid("architecture", "zero-width layer"));
        }
        if arch.encoder_hidden.is_empty() {
            return Err(invalid(
                "architecture.encoder_hidden",
                "needs at least one layer",
            ));
        }
        Ok(())
    }

    /// Checks the constraints that involve the sample count.
    pub fn validate_for_samples(&self, n: usize) -> Result<(), ConfigError> {
        if self.n_omega + 1 >= n {
            return Err(invalid(
                "n_omega",
                format!(
                    "{} positives leave no negatives among {n} samples",
                    self.n_omega
                ),
            ));
        }
        if let Some(k) = self.k {
            if k > n {
                return Err(invalid("k", format!("{k} clusters for {n} samples")));
            }
        }
        Ok(())
    }
}
