use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::SimError;

/// Network family. TERL and its two ablations share the entity pipeline;
/// the pooled variants replace it with per-category averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Terl,
    TerlNoRe,
    TerlNoTs,
    IqnAvgpool,
    DqnAvgpool,
    MeanEmbedding,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Terl,
        Variant::TerlNoRe,
        Variant::TerlNoTs,
        Variant::IqnAvgpool,
        Variant::DqnAvgpool,
        Variant::MeanEmbedding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Terl => "terl",
            Variant::TerlNoRe => "terl_no_re",
            Variant::TerlNoTs => "terl_no_ts",
            Variant::IqnAvgpool => "iqn_avgpool",
            Variant::DqnAvgpool => "dqn_avgpool",
            Variant::MeanEmbedding => "mean_embedding",
        }
    }

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Variant::Terl => "terl",
            Variant::TerlNoRe => "terl-no-re",
            Variant::TerlNoTs => "terl-no-ts",
            Variant::IqnAvgpool => "iqn",
            Variant::DqnAvgpool => "dqn",
            Variant::MeanEmbedding => "mean",
        }
    }

    pub fn uses_relation_extraction(self) -> bool {
        matches!(self, Variant::Terl | Variant::TerlNoTs)
    }

    pub fn uses_target_selection(self) -> bool {
        matches!(self, Variant::Terl | Variant::TerlNoRe)
    }

    pub fn is_distributional(self) -> bool {
        self != Variant::DqnAvgpool
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = SimError;

    /// Accepts both the canonical and the command-line spelling.
    fn from_str(s: &str) -> Result<Self, SimError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s || v.cli_name() == s)
            .ok_or_else(|| SimError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub variant: Variant,
    pub latent_dim: usize,
    pub heads: usize,
    pub relation_layers: usize,
    pub residual: bool,
    pub selection_heads: usize,
    pub quantile_embedding: usize,
    pub online_quantiles: usize,
    pub target_quantiles: usize,
    pub eval_quantiles: usize,
    pub huber_kappa: f64,
    pub actions: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Terl,
            latent_dim: 64,
            heads: 4,
            relation_layers: 2,
            residual: true,
            selection_heads: 1,
            quantile_embedding: 64,
            online_quantiles: 8,
            target_quantiles: 8,
            eval_quantiles: 32,
            huber_kappa: 1.0,
            actions: 9,
        }
    }
}

impl PolicyConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.latent_dim == 0 || self.actions == 0 || self.quantile_embedding == 0 {
            return bad("latent_dim, actions and quantile_embedding must be positive");
        }
        if self.heads == 0 || self.latent_dim % self.heads != 0 {
            return bad("latent_dim must be divisible by heads");
        }
        if self.selection_heads == 0 || self.latent_dim % self.selection_heads != 0 {
            return bad("latent_dim must be divisible by selection_heads");
        }
        if self.online_quantiles == 0 || self.target_quantiles == 0 || self.eval_quantiles == 0 {
            return bad("quantile counts must be positive");
        }
        if !(self.huber_kappa > 0.0) {
            return bad("huber_kappa must be positive");
        }
        Ok(())
    }

    /// Width of the representation handed to the action head.
    pub fn head_input_dim(&self) -> usize {
        let f = self.latent_dim;
        match self.variant {
            Variant::Terl | Variant::TerlNoRe | Variant::TerlNoTs => 2 * f,
            Variant::IqnAvgpool | Variant::DqnAvgpool => 4 * f,
            Variant::MeanEmbedding => f,
        }
    }
}

/// Mid-point grid `(i + 0.5)/n`, used for deterministic evaluation.
pub fn tau_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}
