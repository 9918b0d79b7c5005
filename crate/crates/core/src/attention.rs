//! Head-averaged attention weights recorded during a forward pass.

use crate::error::{domain, Result};

/// Per-layer attention over one sequence, averaged over heads.
///
/// `weight(layer, source, dest)` is the share that position `dest` draws from
/// position `source` of the previous layer's output. For every layer and
/// destination the weights over all sources sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    seq_len: usize,
    /// One `seq_len × seq_len` matrix per layer, indexed `[dest][source]`.
    layers: Vec<Vec<f64>>,
}

impl AttentionRecord {
    /// Builds a record from row-major `[dest][source]` matrices.
    pub fn new(seq_len: usize, layers: Vec<Vec<f64>>) -> Result<Self> {
        if seq_len == 0 {
            return Err(domain("attention record over an empty sequence"));
        }
        if layers.is_empty() {
            return Err(domain("attention record needs at least one layer"));
        }
        if let Some(bad) = layers.iter().position(|m| m.len() != seq_len * seq_len) {
            return Err(domain(format!(
                "layer {bad} has {} entries, expected {}",
                layers[bad].len(),
                seq_len * seq_len
            )));
        }
        Ok(Self { seq_len, layers })
    }

    /// Every destination attends equally to every source.
    pub fn uniform(seq_len: usize, num_layers: usize) -> Self {
        let w = 1.0 / seq_len as f64;
        Self {
            seq_len,
            layers: vec![vec![w; seq_len * seq_len]; num_layers],
        }
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// 0-based layer index.
    pub fn weight(&self, layer: usize, source: usize, dest: usize) -> f64 {
        self.layers[layer][dest * self.seq_len + source]
    }

    pub fn set_weight(&mut self, layer: usize, source: usize, dest: usize, value: f64) {
        self.layers[layer][dest * self.seq_len + source] = value;
    }

    /// Largest deviation of any destination's source-sum from one.
    pub fn max_normalization_error(&self) -> f64 {
        let s = self.seq_len;
        self.layers
            .iter()
            .flat_map(|m| m.chunks(s).map(|row| (row.iter().sum::<f64>() - 1.0).abs()))
            .fold(0.0, f64::max)
    }

    pub fn in_unit_interval(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|&w| (0.0..=1.0 + 1e-12).contains(&w))
    }
}
