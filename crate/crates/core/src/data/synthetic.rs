//! Planted-keyword classification corpora.
//!
//! Each record draws a uniform label, fills a random-length sequence with
//! noise words and, with probability `injection_prob`, overwrites one
//! position with a keyword reserved for that label. Records without a
//! keyword carry no information about their label, so the Bayes accuracy is
//! `p + (1 − p) / M`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::CorpusRecord;
use crate::error::{config, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseDistribution {
    Uniform,
    /// Noise word of rank `r` (0-based) has weight `1 / (r + 1)^exponent`.
    Zipf { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    /// Distinct words, keywords included.
    pub vocab_size: usize,
    pub keywords_per_class: usize,
    pub injection_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub noise: NoiseDistribution,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 2,
            vocab_size: 200,
            keywords_per_class: 5,
            injection_prob: 0.9,
            min_len: 8,
            max_len: 16,
            noise: NoiseDistribution::Uniform,
            n_train: 2000,
            n_test: 1000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(config("synthetic data needs at least 2 classes"));
        }
        if self.keywords_per_class == 0 {
            return Err(config("keywords_per_class must be positive"));
        }
        if self.vocab_size <= self.num_classes * self.keywords_per_class {
            return Err(config("vocab_size must exceed the number of planted keywords"));
        }
        if !(0.0..=1.0).contains(&self.injection_prob) {
            return Err(config("injection_prob must lie in [0, 1]"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(config("need 1 <= min_len <= max_len"));
        }
        if let NoiseDistribution::Zipf { exponent } = self.noise {
            if !(exponent >= 0.0 && exponent.is_finite()) {
                return Err(config("Zipf exponent must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Keyword strings planted for 0-based `class`.
    pub fn keywords(&self, class: usize) -> Vec<String> {
        (0..self.keywords_per_class)
            .map(|j| format!("key{}x{j}", class + 1))
            .collect()
    }

    fn noise_words(&self) -> Vec<String> {
        let n = self.vocab_size - self.num_classes * self.keywords_per_class;
        (0..n).map(|i| format!("w{i}")).collect()
    }
}

/// Train and test corpora, deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Vec<CorpusRecord>, Vec<CorpusRecord>)> {
    spec.validate()?;
    let noise = spec.noise_words();
    let keywords: Vec<Vec<String>> = (0..spec.num_classes).map(|c| spec.keywords(c)).collect();
    let weights: Vec<f64> = match spec.noise {
        NoiseDistribution::Uniform => vec![1.0; noise.len()],
        NoiseDistribution::Zipf { exponent } => (0..noise.len())
            .map(|r| 1.0 / ((r + 1) as f64).powf(exponent))
            .collect(),
    };
    let picker = WeightedIndex::new(&weights).map_err(|e| config(e.to_string()))?;

    let make = |n: usize, stream: u64| {
        let mut rng = stream_rng(spec.seed, stream);
        (0..n)
            .map(|_| {
                let class = rng.random_range(0..spec.num_classes);
                let len = rng.random_range(spec.min_len..=spec.max_len);
                let mut words: Vec<&str> = (0..len)
                    .map(|_| noise[picker.sample(&mut rng)].as_str())
                    .collect();
                if rng.random::<f64>() < spec.injection_prob {
                    let at = rng.random_range(0..len);
                    let which = rng.random_range(0..spec.keywords_per_class);
                    words[at] = keywords[class][which].as_str();
                }
                CorpusRecord {
                    text: words.join(" "),
                    label: class + 1,
                }
            })
            .collect::<Vec<_>>()
    };
    Ok((make(spec.n_train, 11), make(spec.n_test, 12)))
}
