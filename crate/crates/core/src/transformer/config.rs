use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::scalar::DType;

/// How the output head is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HeadInit {
    #[default]
    Zero,
    Random,
}

/// Shape and initialization of a transformer weak learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub precision: DType,
    pub head_init: HeadInit,
    pub init_std: f64,
    pub layer_norm_eps: f64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            heads: 6,
            d_model: 96,
            d_ff: 384,
            max_seq_len: 128,
            vocab_size: 1024,
            num_classes: 2,
            dropout: 0.1,
            precision: DType::Float32,
            head_init: HeadInit::Zero,
            init_std: 0.02,
            layer_norm_eps: 1e-5,
        }
    }
}

impl TransformerConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(config("transformer needs at least one layer"));
        }
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.d_ff == 0 {
            return Err(config("d_ff must be positive"));
        }
        if self.max_seq_len < 2 {
            return Err(config("max_seq_len must be at least 2"));
        }
        if self.vocab_size == 0 {
            return Err(config("vocab_size must be positive"));
        }
        if self.num_classes < 2 {
            return Err(config("num_classes must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.init_std > 0.0) || !(self.layer_norm_eps > 0.0) {
            return Err(config("init_std and layer_norm_eps must be positive"));
        }
        Ok(())
    }
}

/// Mini-batch AdamW with linear warmup followed by linear decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub shuffle: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 5,
            warmup_fraction: 0.06,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            shuffle: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(config("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(config("warmup fraction must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(config("batch size must be positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(config("weight decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(config("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}
