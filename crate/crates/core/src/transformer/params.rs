//! Parameter storage for the encoder. Every tensor is a flat row-major
//! `Vec<T>`; matrices are stored `[in][out]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{HeadInit, TransformerConfig};
use crate::scalar::Scalar;

/// Name, shape and decay policy of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub decay: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub attn_norm_gain: Vec<T>,
    pub attn_norm_bias: Vec<T>,
    pub wq: Vec<T>,
    pub bq: Vec<T>,
    pub wk: Vec<T>,
    pub bk: Vec<T>,
    pub wv: Vec<T>,
    pub bv: Vec<T>,
    pub wo: Vec<T>,
    pub bo: Vec<T>,
    pub ffn_norm_gain: Vec<T>,
    pub ffn_norm_bias: Vec<T>,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub token_embedding: Vec<T>,
    pub position_embedding: Vec<T>,
    pub layers: Vec<LayerParams<T>>,
    pub final_norm_gain: Vec<T>,
    pub final_norm_bias: Vec<T>,
    pub head_weight: Vec<T>,
    pub head_bias: Vec<T>,
}

pub fn tensor_specs(cfg: &TransformerConfig) -> Vec<TensorSpec> {
    let d = cfg.d_model;
    let spec = |name: String, dims: Vec<usize>, decay: bool| TensorSpec { name, dims, decay };
    let mut out = vec![
        spec("embeddings.token".into(), vec![cfg.vocab_size, d], true),
        spec("embeddings.position".into(), vec![cfg.max_seq_len, d], true),
    ];
    for l in 0..cfg.layers {
        let p = |s: &str| format!("layer{l}.{s}");
        out.extend([
            spec(p("attn_norm.gain"), vec![d], false),
            spec(p("attn_norm.bias"), vec![d], false),
            spec(p("attn.query.weight"), vec![d, d], true),
            spec(p("attn.query.bias"), vec![d], false),
            spec(p("attn.key.weight"), vec![d, d], true),
            spec(p("attn.key.bias"), vec![d], false),
            spec(p("attn.value.weight"), vec![d, d], true),
            spec(p("attn.value.bias"), vec![d], false),
            spec(p("attn.output.weight"), vec![d, d], true),
            spec(p("attn.output.bias"), vec![d], false),
            spec(p("ffn_norm.gain"), vec![d], false),
            spec(p("ffn_norm.bias"), vec![d], false),
            spec(p("ffn.up.weight"), vec![d, cfg.d_ff], true),
            spec(p("ffn.up.bias"), vec![cfg.d_ff], false),
            spec(p("ffn.down.weight"), vec![cfg.d_ff, d], true),
            spec(p("ffn.down.bias"), vec![d], false),
        ]);
    }
    out.extend([
        spec("final_norm.gain".into(), vec![d], false),
        spec("final_norm.bias".into(), vec![d], false),
        spec("head.weight".into(), vec![d, cfg.num_classes], true),
        spec("head.bias".into(), vec![cfg.num_classes], false),
    ]);
    out
}

impl<T: Scalar> Params<T> {
    pub fn zeros(cfg: &TransformerConfig) -> Self {
        let d = cfg.d_model;
        let z = |n: usize| vec![T::zero(); n];
        let layer = || LayerParams {
            attn_norm_gain: z(d),
            attn_norm_bias: z(d),
            wq: z(d * d),
            bq: z(d),
            wk: z(d * d),
            bk: z(d),
            wv: z(d * d),
            bv: z(d),
            wo: z(d * d),
            bo: z(d),
            ffn_norm_gain: z(d),
            ffn_norm_bias: z(d),
            w1: z(d * cfg.d_ff),
            b1: z(cfg.d_ff),
            w2: z(cfg.d_ff * d),
            b2: z(d),
        };
        Self {
            token_embedding: z(cfg.vocab_size * d),
            position_embedding: z(cfg.max_seq_len * d),
            layers: (0..cfg.layers).map(|_| layer()).collect(),
            final_norm_gain: z(d),
            final_norm_bias: z(d),
            head_weight: z(d * cfg.num_classes),
            head_bias: z(cfg.num_classes),
        }
    }

    /// Normal(0, init_std) matrices and embeddings, unit norm gains, zero biases.
    pub fn init<R: Rng>(cfg: &TransformerConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(cfg);
        let normal = Normal::new(0.0, cfg.init_std).expect("validated init_std");
        let mut fill = |v: &mut Vec<T>| {
            for x in v.iter_mut() {
                *x = T::from_f64(normal.sample(rng));
            }
        };
        fill(&mut p.token_embedding);
        fill(&mut p.position_embedding);
        for layer in &mut p.layers {
            for w in [
                &mut layer.wq,
                &mut layer.wk,
                &mut layer.wv,
                &mut layer.wo,
                &mut layer.w1,
                &mut layer.w2,
            ] {
                fill(w);
            }
            layer.attn_norm_gain.fill(T::one());
            layer.ffn_norm_gain.fill(T::one());
        }
        p.final_norm_gain.fill(T::one());
        if cfg.head_init == HeadInit::Random {
            fill(&mut p.head_weight);
        }
        p
    }

    /// Tensors in [`tensor_specs`] order.
    pub fn slots(&self) -> Vec<&Vec<T>> {
        let mut out = vec![&self.token_embedding, &self.position_embedding];
        for l in &self.layers {
            out.extend([
                &l.attn_norm_gain,
                &l.attn_norm_bias,
                &l.wq,
                &l.bq,
                &l.wk,
                &l.bk,
                &l.wv,
                &l.bv,
                &l.wo,
                &l.bo,
                &l.ffn_norm_gain,
                &l.ffn_norm_bias,
                &l.w1,
                &l.b1,
                &l.w2,
                &l.b2,
            ]);
        }
        out.extend([
            &self.final_norm_gain,
            &self.final_norm_bias,
            &self.head_weight,
            &self.head_bias,
        ]);
        out
    }

    pub fn slots_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = vec![&mut self.token_embedding, &mut self.position_embedding];
        for l in &mut self.layers {
            out.extend([
                &mut l.attn_norm_gain,
                &mut l.attn_norm_bias,
                &mut l.wq,
                &mut l.bq,
                &mut l.wk,
                &mut l.bk,
                &mut l.wv,
                &mut l.bv,
                &mut l.wo,
                &mut l.bo,
                &mut l.ffn_norm_gain,
                &mut l.ffn_norm_bias,
                &mut l.w1,
                &mut l.b1,
                &mut l.w2,
                &mut l.b2,
            ]);
        }
        out.extend([
            &mut self.final_norm_gain,
            &mut self.final_norm_bias,
            &mut self.head_weight,
            &mut self.head_bias,
        ]);
        out
    }

    pub fn len(&self) -> usize {
        self.slots().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill_zero(&mut self) {
        for t in self.slots_mut() {
            t.fill(T::zero());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.slots().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.slots_mut().into_iter().zip(other.slots()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * *y;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn specs_match_slots() {
        let cfg = TransformerConfig {
            layers: 2,
            heads: 2,
            d_model: 8,
            d_ff: 12,
            vocab_size: 11,
            max_seq_len: 6,
            num_classes: 3,
            ..TransformerConfig::default()
        };
        let p = Params::<f64>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let specs = tensor_specs(&cfg);
        let slots = p.slots();
        assert_eq!(specs.len(), slots.len());
        for (s, t) in specs.iter().zip(&slots) {
            assert_eq!(s.dims.iter().product::<usize>(), t.len(), "{}", s.name);
        }
        assert!(p.head_weight.iter().all(|&x| x == 0.0));
        assert!(p.all_finite());
    }
}
