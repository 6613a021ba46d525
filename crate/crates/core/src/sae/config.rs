use serde::{Deserialize, Serialize};

use crate::optim::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaeVariant {
    Relu,
    #[serde(rename = "topk")]
    TopK,
    #[serde(rename = "batch_topk")]
    BatchTopK,
    Matryoshka,
}

impl SaeVariant {
    pub fn uses_k(self) -> bool {
        !matches!(self, SaeVariant::Relu)
    }
}

/// Sparse autoencoder (or transcoder) hyperparameters.
///
/// The latent width is `input_dim * expansion_factor`. `output_dim` differs
/// from `input_dim` only for transcoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeConfig {
    pub input_dim: usize,
    pub output_dim: Option<usize>,
    pub expansion_factor: usize,
    pub variant: SaeVariant,
    pub k: usize,
    pub l1_coeff: f64,
    pub aux_coeff: f64,
    /// Defaults to `2 * k`; always capped by the number of dead latents.
    pub aux_k: Option<usize>,
    /// Defaults to `1000 * batch_size` tokens.
    pub dead_threshold_tokens: Option<u64>,
    pub batch_size: usize,
    pub matryoshka_prefixes: Vec<usize>,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for SaeConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            output_dim: None,
            expansion_factor: 4,
            variant: SaeVariant::TopK,
            k: 32,
            l1_coeff: 0.0,
            aux_coeff: 1.0 / 32.0,
            aux_k: None,
            dead_threshold_tokens: None,
            batch_size: 256,
            matryoshka_prefixes: Vec::new(),
            optimizer: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl SaeConfig {
    pub fn new(input_dim: usize, expansion_factor: usize, variant: SaeVariant, k: usize) -> Self {
        Self {
            input_dim,
            expansion_factor,
            variant,
            k,
            ..Default::default()
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.input_dim * self.expansion_factor
    }

    pub fn out_dim(&self) -> usize {
        self.output_dim.unwrap_or(self.input_dim)
    }

    /// Inputs are centred on the decoder bias before encoding whenever input
    /// and output live in the same space.
    pub fn uses_pre_bias(&self) -> bool {
        self.out_dim() == self.input_dim
    }

    pub fn effective_aux_k(&self) -> usize {
        self.aux_k.unwrap_or(2 * self.k)
    }

    pub fn effective_dead_threshold(&self) -> u64 {
        self.dead_threshold_tokens
            .unwrap_or(10 * self.batch_size as u64 * 100)
    }

    /// Prefix boundaries used by the matryoshka loss. Other variants see a
    /// single prefix covering every latent.
    pub fn prefixes(&self) -> Vec<usize> {
        if self.variant == SaeVariant::Matryoshka && !self.matryoshka_prefixes.is_empty() {
            self.matryoshka_prefixes.clone()
        } else {
            vec![self.latent_dim()]
        }
    }

    /// Every violated constraint, reported together.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let m = self.latent_dim();
        if self.input_dim == 0 {
            issues.push("sae.input_dim must be at least 1".to_string());
        }
        if self.output_dim == Some(0) {
            issues.push("sae.output_dim must be at least 1".to_string());
        }
        if self.expansion_factor == 0 {
            issues.push("sae.expansion_factor must be at least 1".to_string());
        }
        if self.variant.uses_k() && (self.k == 0 || self.k > m) {
            issues.push(format!("sae.k must lie in [1, {m}], got {}", self.k));
        }
        if !(self.l1_coeff >= 0.0 && self.l1_coeff.is_finite()) {
            issues.push("sae.l1_coeff must be a finite value >= 0".to_string());
        }
        if !(self.aux_coeff >= 0.0 && self.aux_coeff.is_finite()) {
            issues.push("sae.aux_coeff must be a finite value >= 0".to_string());
        }
        if self.batch_size == 0 {
            issues.push("sae.batch_size must be at least 1".to_string());
        }
        if !(self.optimizer.lr > 0.0 && self.optimizer.lr.is_finite()) {
            issues.push("sae.optimizer.lr must be positive".to_string());
        }
        if self.variant == SaeVariant::Matryoshka {
            let p = &self.matryoshka_prefixes;
            if p.is_empty() {
                issues.push("sae.matryoshka_prefixes must not be empty for the matryoshka variant".to_string());
            } else {
                if p.windows(2).any(|w| w[0] >= w[1]) || p[0] == 0 {
                    issues.push("sae.matryoshka_prefixes must be positive and strictly increasing".to_string());
                }
                if p.last() != Some(&m) {
                    issues.push(format!("sae.matryoshka_prefixes must end at the latent width {m}"));
                }
            }
        }
        issues
    }
}
