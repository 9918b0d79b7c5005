//! Multiclass exponential risk and the boosting weights derived from it.
//!
//! For a score vector `f ∈ R^M` and true class `z`, the per-sample loss is
//! `L(z, f) = Σ_{j≠z} exp(-½ (f_z - f_j))`. The boosting weights are the
//! negated, doubled gradient of this loss: `w = -2 ∇_f L`, which gives
//! `w_k = -exp(-½ (f_z - f_k))` for `k ≠ z` and `w_z = Σ_{j≠z} exp(-½ (f_z - f_j))`.
//!
//! Class indices are 0-based inside the crate.

use crate::error::{domain, Result};

/// Exponents are clamped to this magnitude before `exp` is applied.
pub const EXPONENT_CLAMP: f64 = 500.0;

/// Unit codeword `1_k` identifying class `k` in `R^M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codeword {
    class: usize,
    dim: usize,
}

impl Codeword {
    pub fn new(class: usize, dim: usize) -> Result<Self> {
        if class >= dim {
            return Err(domain(format!("class {class} out of range for M = {dim}")));
        }
        Ok(Self { class, dim })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[self.class] = 1.0;
        v
    }
}

/// Boosting weights for one sample together with a saturation flag, set when
/// an exponent had to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights {
    pub values: Vec<f64>,
    pub saturated: bool,
}

impl SampleWeights {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_inputs(f: &[f64], z: usize) -> Result<()> {
    if f.len() < 2 {
        return Err(domain(format!("need at least 2 classes, got {}", f.len())));
    }
    if z >= f.len() {
        return Err(domain(format!("class {z} out of range for M = {}", f.len())));
    }
    if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
        return Err(domain(format!("non-finite logit {bad}")));
    }
    Ok(())
}

/// `exp(-½ (f_z - f_k))` with the exponent clamped to `±EXPONENT_CLAMP`.
fn margin_exp(f: &[f64], z: usize, k: usize) -> (f64, bool) {
    let e = -0.5 * (f[z] - f[k]);
    if e.abs() > EXPONENT_CLAMP {
        ((e.signum() * EXPONENT_CLAMP).exp(), true)
    } else {
        (e.exp(), false)
    }
}

/// `L(z, f) = Σ_{j≠z} exp(-½ (f_z - f_j))`.
pub fn per_sample_loss(f: &[f64], z: usize) -> Result<f64> {
    check_inputs(f, z)?;
    Ok((0..f.len())
        .filter(|&j| j != z)
        .map(|j| margin_exp(f, z, j).0)
        .sum())
}

/// Mean per-sample loss over a dataset of `(scores, label)` pairs.
pub fn risk<'a, I>(samples: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], usize)>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for (f, z) in samples {
        total += per_sample_loss(f, z)?;
        n += 1;
    }
    if n == 0 {
        return Err(domain("risk of an empty dataset"));
    }
    Ok(total / n as f64)
}

/// Boosting weights `w(x, z)` at score vector `f`.
pub fn compute_weights(f: &[f64], z: usize) -> Result<SampleWeights> {
    check_inputs(f, z)?;
    let mut values = vec![0.0; f.len()];
    let mut saturated = false;
    let mut total = 0.0;
    for k in (0..f.len()).filter(|&k| k != z) {
        let (e, sat) = margin_exp(f, z, k);
        saturated |= sat;
        values[k] = -e;
        total += e;
    }
    values[z] = total;
    if saturated {
        log::warn!("boosting weight exponent clamped at ±{EXPONENT_CLAMP} (class {z})");
    }
    Ok(SampleWeights { values, saturated })
}

/// Directional derivative of the risk along `g`:
/// `-(1 / 2|D|) Σ_i ⟨g(x_i), w(x_i, z_i)⟩`.
pub fn directional_derivative(g: &[Vec<f64>], w: &[Vec<f64>]) -> Result<f64> {
    if g.len() != w.len() {
        return Err(domain(format!(
            "direction has {} samples, weights have {}",
            g.len(),
            w.len()
        )));
    }
    if g.is_empty() {
        return Err(domain("directional derivative over an empty dataset"));
    }
    let mut acc = 0.0;
    for (i, (gi, wi)) in g.iter().zip(w).enumerate() {
        if gi.len() != wi.len() {
            return Err(domain(format!(
                "sample {i}: direction dim {} != weight dim {}",
                gi.len(),
                wi.len()
            )));
        }
        acc += gi.iter().zip(wi).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(-acc / (2.0 * g.len() as f64))
}
