//! Finite-difference validation of the analytic backward pass.

use rand_chacha::ChaCha8Rng;

use super::model::Transformer;
use super::params::{tensor_specs, Params};
use crate::error::{config, domain, Result};

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Tensor holding the worst parameter.
    pub worst_tensor: String,
    pub analytic: Params<f64>,
}

/// Gradients smaller than this are compared on an absolute scale.
pub const GRADIENT_FLOOR: f64 = 1e-5;

fn ls_loss(model: &Transformer<f64>, tokens: &[u32], target: &[f64]) -> Result<f64> {
    let logits = model.predict(tokens)?;
    Ok(logits.iter().zip(target).map(|(g, w)| (g - w) * (g - w)).sum())
}

/// Analytic gradients of `‖g(x) − target‖²` for one sample.
pub fn analytic_gradient(
    model: &Transformer<f64>,
    tokens: &[u32],
    target: &[f64],
) -> Result<Params<f64>> {
    if target.len() != model.config().num_classes {
        return Err(domain("target dimension does not match the head"));
    }
    let cache = model.forward_cached(tokens, None::<&mut ChaCha8Rng>)?;
    let dlogits: Vec<f64> = cache
        .logits
        .iter()
        .zip(target)
        .map(|(g, w)| 2.0 * (g - w))
        .collect();
    let mut grads = Params::zeros(model.config());
    model.backward(&cache, &dlogits, &mut grads);
    Ok(grads)
}

/// Compares analytic gradients with central differences at step `eps` and
/// reports the largest `|a − n| / max(|a|, |n|, GRADIENT_FLOOR)`.
pub fn gradient_check(
    model: &Transformer<f64>,
    tokens: &[u32],
    target: &[f64],
    eps: f64,
) -> Result<GradientCheck> {
    if model.config().dropout != 0.0 {
        return Err(config("gradient check requires dropout = 0"));
    }
    let analytic = analytic_gradient(model, tokens, target)?;
    let specs = tensor_specs(model.config());
    let mut probe = model.clone();
    let mut worst = (0.0f64, String::new());
    for (t, spec) in specs.iter().enumerate() {
        let len = analytic.slots()[t].len();
        for i in 0..len {
            let orig = probe.params().slots()[t][i];
            probe.params_mut().slots_mut()[t][i] = orig + eps;
            let plus = ls_loss(&probe, tokens, target)?;
            probe.params_mut().slots_mut()[t][i] = orig - eps;
            let minus = ls_loss(&probe, tokens, target)?;
            probe.params_mut().slots_mut()[t][i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.slots()[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_FLOOR);
            if rel > worst.0 {
                worst = (rel, spec.name.clone());
            }
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst.0,
        worst_tensor: worst.1,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CLS_ID;
    use crate::scalar::DType;
    use crate::transformer::config::{HeadInit, TransformerConfig};

    fn tiny(head_init: HeadInit) -> TransformerConfig {
        TransformerConfig {
            layers: 2,
            heads: 2,
            d_model: 8,
            d_ff: 16,
            max_seq_len: 8,
            vocab_size: 10,
            num_classes: 3,
            dropout: 0.0,
            precision: DType::Float64,
            head_init,
            init_std: 0.5,
            layer_norm_eps: 1e-5,
        }
    }

    #[test]
    fn zero_target_zero_head_has_zero_gradient() {
        let m = Transformer::<f64>::new(tiny(HeadInit::Zero), 1).unwrap();
        let g = analytic_gradient(&m, &[CLS_ID, 4, 5], &[0.0; 3]).unwrap();
        assert!(g.head_weight.iter().all(|&v| v == 0.0));
        assert!(g.head_bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn absent_tokens_get_no_embedding_gradient() {
        let m = Transformer::<f64>::new(tiny(HeadInit::Random), 2).unwrap();
        let g = analytic_gradient(&m, &[CLS_ID, 4, 5, 4], &[1.0, -0.5, -0.5]).unwrap();
        let d = 8;
        for tok in [1usize, 2, 3, 6, 7, 8, 9] {
            assert!(g.token_embedding[tok * d..(tok + 1) * d].iter().all(|&v| v == 0.0));
        }
        assert!(g.token_embedding[4 * d..5 * d].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn matches_finite_differences() {
        let m = Transformer::<f64>::new(tiny(HeadInit::Random), 3).unwrap();
        let check = gradient_check(&m, &[CLS_ID, 7, 3, 9, 4], &[1.0, -0.5, -0.5], 1e-4).unwrap();
        assert!(
            check.max_relative_error < 1e-5,
            "{} in {}",
            check.max_relative_error,
            check.worst_tensor
        );
    }
}
