//! Numerical verification of the optimal sampling distribution.
//!
//! For per-sample gradients `g_i` (i = 1..n), full gradient `ḡ = (1/n) Σ g_i`,
//! and a sampling distribution `P`, the importance-weighted minibatch
//! estimator over `|I|` independent draws is
//! `ĝ = (1/|I|) Σ_{k} g_{i_k} / (n P_{i_k})`. Its second moment has the
//! closed form
//!
//! ```text
//! E‖ĝ‖² = (1 / (|I| n²)) Σ_i ‖g_i‖² / P_i − ‖ḡ‖² / |I| + ‖ḡ‖²
//! ```
//!
//! and only the first term depends on `P`. By Jensen's inequality
//! `Σ ‖g_i‖² / P_i ≥ (Σ ‖g_i‖)²`, with equality at `P_i ∝ ‖g_i‖`. This module
//! evaluates the identity, estimates it by simulation, and checks that the
//! residual-norm distribution is the minimizer.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::boosting::compute_weights;
use crate::error::{domain, Result};
use crate::rng::stream_rng;

/// Per-sample gradients `g_i ∈ R^M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    per_sample: Vec<Vec<f64>>,
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

impl GradientField {
    pub fn new(per_sample: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = per_sample.first() else {
            return Err(domain("gradient field over an empty dataset"));
        };
        let dim = first.len();
        if per_sample.iter().any(|g| g.len() != dim) {
            return Err(domain("per-sample gradients differ in dimension"));
        }
        if per_sample.iter().flatten().any(|x| !x.is_finite()) {
            return Err(domain("non-finite gradient entry"));
        }
        Ok(Self { per_sample })
    }

    /// Functional gradients of the per-sample loss at scores `f`:
    /// `∂L/∂f = −½ w(f, z)`.
    pub fn from_scores(scores: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(domain("one label per score vector is required"));
        }
        let grads = scores
            .iter()
            .zip(labels)
            .map(|(f, &z)| {
                compute_weights(f, z).map(|w| w.values.iter().map(|v| -0.5 * v).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(grads)
    }

    pub fn len(&self) -> usize {
        self.per_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_sample.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.per_sample[0].len()
    }

    pub fn per_sample(&self) -> &[Vec<f64>] {
        &self.per_sample
    }

    /// `(1/n) Σ g_i`.
    pub fn full_gradient(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut out = vec![0.0; self.dim()];
        for g in &self.per_sample {
            for (o, v) in out.iter_mut().zip(g) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn norms(&self) -> Vec<f64> {
        self.per_sample.iter().map(|g| norm_sq(g).sqrt()).collect()
    }

    pub fn scaled(&self, beta: f64) -> Self {
        Self {
            per_sample: self
                .per_sample
                .iter()
                .map(|g| g.iter().map(|v| beta * v).collect())
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.per_sample.iter().flatten().all(|&v| v == 0.0)
    }
}

fn check_distribution(field: &GradientField, probs: &[f64]) -> Result<()> {
    if probs.len() != field.len() {
        return Err(domain("distribution length differs from the field"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(domain("probabilities must be finite and non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(domain(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// `Σ_{i: g_i ≠ 0} ‖g_i‖² / P_i`; errors when a nonzero gradient has `P_i = 0`.
pub fn weighted_norm_sum(field: &GradientField, probs: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, (g, &p)) in field.per_sample.iter().zip(probs).enumerate() {
        let sq = norm_sq(g);
        if sq == 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Err(domain(format!("sample {i} has a nonzero gradient but P = 0")));
        }
        total += sq / p;
    }
    Ok(total)
}

/// Closed-form `E‖ĝ‖²` for `subset_size` independent draws from `probs`.
pub fn closed_form_second_moment(
    field: &GradientField,
    probs: &[f64],
    subset_size: usize,
) -> Result<f64> {
    check_distribution(field, probs)?;
    if subset_size == 0 {
        return Err(domain("subset size must be positive"));
    }
    let n = field.len() as f64;
    let m = subset_size as f64;
    let full = norm_sq(&field.full_gradient());
    Ok(weighted_norm_sum(field, probs)? / (m * n * n) - full / m + full)
}

/// Lowest attainable `E‖ĝ‖²`: the closed form with the Jensen bound
/// `(Σ ‖g_i‖)²` in place of `Σ ‖g_i‖² / P_i`.
pub fn jensen_minimum(field: &GradientField, subset_size: usize) -> f64 {
    let n = field.len() as f64;
    let m = subset_size as f64;
    let full = norm_sq(&field.full_gradient());
    let s: f64 = field.norms().iter().sum();
    s * s / (m * n * n) - full / m + full
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl Estimate {
    /// `|mean − target|` in standard errors; zero-variance estimates count
    /// as agreeing when they hit the target to rounding.
    pub fn deviation_in_se(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        // Summing many identical terms drifts by far more than one ulp.
        let rounding = 1e-9 * target.abs().max(1.0);
        if diff <= rounding {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            diff / self.std_error
        }
    }
}

fn inverse_cdf(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
        cdf[last..].iter_mut().for_each(|c| *c = 1.0);
    }
    cdf
}

fn draw<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u)
}

/// Simulates `draws` minibatch estimators `ĝ` and averages `‖ĝ‖²`.
pub fn monte_carlo_second_moment(
    field: &GradientField,
    probs: &[f64],
    subset_size: usize,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    check_distribution(field, probs)?;
    if subset_size == 0 || draws < 2 {
        return Err(domain("need a positive subset size and at least two draws"));
    }
    weighted_norm_sum(field, probs)?;
    let n = field.len() as f64;
    let cdf = inverse_cdf(probs);
    let mut rng = stream_rng(seed, 0x5ec0);
    let mut g_hat = vec![0.0; field.dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        g_hat.fill(0.0);
        for _ in 0..subset_size {
            let i = draw(&cdf, &mut rng);
            let c = 1.0 / (subset_size as f64 * n * probs[i]);
            for (o, v) in g_hat.iter_mut().zip(&field.per_sample[i]) {
                *o += c * v;
            }
        }
        let stat = norm_sq(&g_hat);
        sum += stat;
        sum_sq += stat * stat;
    }
    Ok(summarize(sum, sum_sq, draws))
}

fn summarize(sum: f64, sum_sq: f64, draws: usize) -> Estimate {
    let k = draws as f64;
    let mean = sum / k;
    let var = ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0);
    Estimate {
        mean,
        std_error: (var / k).sqrt(),
        draws,
    }
}

/// Largest componentwise deviation, in standard errors, between the mean of
/// single-draw estimators `g_i / (n P_i)` and the full gradient.
pub fn unbiasedness_check(
    field: &GradientField,
    probs: &[f64],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    check_distribution(field, probs)?;
    if draws < 2 {
        return Err(domain("need at least two draws"));
    }
    weighted_norm_sum(field, probs)?;
    let n = field.len() as f64;
    let dim = field.dim();
    let cdf = inverse_cdf(probs);
    let mut rng = stream_rng(seed, 0xb1a5);
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    for _ in 0..draws {
        let i = draw(&cdf, &mut rng);
        let c = 1.0 / (n * probs[i]);
        for (d, v) in field.per_sample[i].iter().enumerate() {
            let x = c * v;
            sum[d] += x;
            sum_sq[d] += x * x;
        }
    }
    let full = field.full_gradient();
    Ok((0..dim)
        .map(|d| summarize(sum[d], sum_sq[d], draws).deviation_in_se(full[d]))
        .fold(0.0, f64::max))
}

/// Second-moment figures for one candidate distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub label: String,
    pub probabilities: Vec<f64>,
    pub subset_size: usize,
    pub closed_form: f64,
    pub jensen_minimum: f64,
    pub monte_carlo: Option<Estimate>,
}

/// Outcome of [`optimal_distribution_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub degenerate: bool,
    /// First entry is the residual-norm distribution.
    pub candidates: Vec<VarianceReport>,
    pub optimal_is_minimum: bool,
    /// `Σ ‖g_i‖² / P*_i`.
    pub jensen_lhs: f64,
    /// `(Σ ‖g_i‖)²`.
    pub jensen_rhs: f64,
    pub jensen_equal: bool,
}

/// Relative slack allowed when comparing second moments.
const COMPARE_RTOL: f64 = 1e-12;
/// Tolerance for the Jensen equality.
pub const JENSEN_TOL: f64 = 1e-9;

fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Samples from a symmetric Dirichlet(1) over `n` categories.
pub fn dirichlet_uniform<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    normalized(&raw)
}

/// Compares `P* ∝ ‖g_i‖` against uniform, `∝ ‖g_i‖²` and `n_candidates`
/// Dirichlet(1) distributions by closed-form second moment.
pub fn optimal_distribution_check(
    field: &GradientField,
    subset_size: usize,
    n_candidates: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    let n = field.len();
    if field.is_zero() {
        return Ok(OptimalityReport {
            degenerate: true,
            candidates: Vec::new(),
            optimal_is_minimum: true,
            jensen_lhs: 0.0,
            jensen_rhs: 0.0,
            jensen_equal: true,
        });
    }
    let norms = field.norms();
    let mut dists = vec![
        ("residual-norm".to_string(), normalized(&norms)),
        ("uniform".to_string(), vec![1.0 / n as f64; n]),
        (
            "squared-norm".to_string(),
            normalized(&norms.iter().map(|v| v * v).collect::<Vec<_>>()),
        ),
    ];
    let mut rng = stream_rng(seed, 0xd1c7);
    for c in 0..n_candidates {
        dists.push((format!("dirichlet-{c}"), dirichlet_uniform(n, &mut rng)));
    }
    let floor = jensen_minimum(field, subset_size);
    let candidates = dists
        .into_iter()
        .map(|(label, probabilities)| {
            Ok(VarianceReport {
                closed_form: closed_form_second_moment(field, &probabilities, subset_size)?,
                label,
                probabilities,
                subset_size,
                jensen_minimum: floor,
                monte_carlo: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = candidates[0].closed_form;
    let optimal_is_minimum = candidates
        .iter()
        .all(|c| best <= c.closed_form + COMPARE_RTOL * c.closed_form.abs().max(1.0));
    let jensen_lhs = weighted_norm_sum(field, &candidates[0].probabilities)?;
    let sum: f64 = norms.iter().sum();
    let jensen_rhs = sum * sum;
    Ok(OptimalityReport {
        degenerate: false,
        candidates,
        optimal_is_minimum,
        jensen_lhs,
        jensen_rhs,
        jensen_equal: (jensen_lhs - jensen_rhs).abs() <= JENSEN_TOL * jensen_rhs.max(1.0),
    })
}

/// A random small field from boosting weights at Gaussian scores.
pub fn random_boosting_field<R: Rng>(n: usize, classes: usize, rng: &mut R) -> Result<GradientField> {
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..classes).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    GradientField::from_scores(&scores, &labels)
}

/// Settings for [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub instances: usize,
    pub max_samples: usize,
    pub max_classes: usize,
    pub draws: usize,
    pub candidates: usize,
    pub se_band: f64,
    /// Negative control: perturbs every closed-form value before comparison.
    pub corrupt_closed_form: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 50,
            max_samples: 8,
            max_classes: 3,
            draws: 100_000,
            candidates: 20,
            se_band: 3.0,
            corrupt_closed_form: false,
        }
    }
}

/// Two-sided band, in standard errors, that keeps the chance of any false
/// alarm over `comparisons` independent tests at the level of a single test
/// against `se_band` (Bonferroni correction).
pub fn family_band(se_band: f64, comparisons: usize) -> f64 {
    let tail = |z: f64| libm::erfc(z / std::f64::consts::SQRT_2);
    if comparisons <= 1 {
        return se_band;
    }
    let target = tail(se_band) / comparisons as f64;
    let (mut lo, mut hi) = (se_band, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Pass/fail of one identity across all instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    /// Serialized failing instances.
    pub failures: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub passed: bool,
    pub identities: Vec<IdentityResult>,
}

fn subset_size_for(instance: usize, n: usize) -> usize {
    match instance % 3 {
        0 => 1,
        1 => 2.min(n),
        _ => n,
    }
}

/// Runs every identity on `options.instances` random fields.
pub fn run_suite(options: &SuiteOptions) -> Result<SuiteReport> {
    if options.max_samples < 2 || options.max_classes < 2 {
        return Err(domain("instances need at least 2 samples and 2 classes"));
    }
    let names = [
        "closed_form_matches_monte_carlo",
        "residual_norm_is_minimum",
        "jensen_equality",
        "closed_form_at_least_jensen_minimum",
        "unbiased_gradient",
        "scale_invariance",
    ];
    let mut results: Vec<IdentityResult> = names
        .iter()
        .map(|n| IdentityResult {
            name: n.to_string(),
            passed: true,
            checked: 0,
            failures: Vec::new(),
        })
        .collect();
    let mut record = |idx: usize, ok: bool, detail: serde_json::Value| {
        let r = &mut results[idx];
        r.checked += 1;
        if !ok {
            r.passed = false;
            r.failures.push(detail);
        }
    };

    for inst in 0..options.instances {
        let mut rng = stream_rng(options.seed, inst as u64);
        let n = rng.random_range(2..=options.max_samples);
        let classes = rng.random_range(2..=options.max_classes);
        let field = random_boosting_field(n, classes, &mut rng)?;
        let subset = subset_size_for(inst, n);
        let inst_seed = crate::rng::derive_seed(options.seed, 1000 + inst as u64);
        let report = optimal_distribution_check(&field, subset, options.candidates, inst_seed)?;
        let detail = |extra: serde_json::Value| {
            serde_json::json!({
                "instance": inst,
                "subset_size": subset,
                "field": field.per_sample(),
                "detail": extra,
            })
        };

        for (k, cand) in report.candidates.iter().take(2).enumerate() {
            let mut closed = cand.closed_form;
            if options.corrupt_closed_form {
                closed = closed * 1.1 + 0.1;
            }
            let est = monte_carlo_second_moment(
                &field,
                &cand.probabilities,
                subset,
                options.draws,
                crate::rng::derive_seed(inst_seed, k as u64),
            )?;
            let dev = est.deviation_in_se(closed);
            record(
                0,
                dev <= options.se_band,
                detail(serde_json::json!({
                    "distribution": cand.label,
                    "closed_form": closed,
                    "monte_carlo": est,
                    "deviation_se": dev,
                })),
            );
        }

        record(
            1,
            report.optimal_is_minimum,
            detail(serde_json::json!({
                "second_moments": report
                    .candidates
                    .iter()
                    .map(|c| (c.label.clone(), c.closed_form))
                    .collect::<Vec<_>>(),
            })),
        );
        record(
            2,
            report.jensen_equal,
            detail(serde_json::json!({ "lhs": report.jensen_lhs, "rhs": report.jensen_rhs })),
        );
        let floor_ok = report.candidates.iter().all(|c| {
            c.closed_form >= c.jensen_minimum - COMPARE_RTOL * c.jensen_minimum.abs().max(1.0)
        });
        record(3, floor_ok, detail(serde_json::json!({})));

        // Every component of every instance is a separate test.
        let band = family_band(options.se_band, options.instances * 2 * field.dim());
        for cand in report.candidates.iter().take(2) {
            let dev = unbiasedness_check(&field, &cand.probabilities, options.draws, inst_seed)?;
            record(
                4,
                dev <= band,
                detail(serde_json::json!({
                    "distribution": cand.label,
                    "deviation_se": dev,
                    "band_se": band,
                })),
            );
        }

        let scaled = field.scaled(-2.0);
        let scaled_report = optimal_distribution_check(&scaled, subset, options.candidates, inst_seed)?;
        let same_argmin = scaled_report
            .candidates
            .first()
            .zip(report.candidates.first())
            .is_some_and(|(a, b)| {
                a.probabilities
                    .iter()
                    .zip(&b.probabilities)
                    .all(|(x, y)| (x - y).abs() < 1e-12)
            })
            && scaled_report.optimal_is_minimum;
        record(5, same_argmin, detail(serde_json::json!({ "beta": -2.0 })));
    }

    let passed = results.iter().all(|r| r.passed);
    Ok(SuiteReport {
        options: options.clone(),
        passed,
        identities: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(rows: &[&[f64]]) -> GradientField {
        GradientField::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    /// Exact `E‖ĝ‖²` by enumerating every ordered draw sequence.
    fn enumerate_second_moment(field: &GradientField, probs: &[f64], m: usize) -> f64 {
        let n = field.len();
        let mut total = 0.0;
        let mut idx = vec![0usize; m];
        loop {
            let mut prob = 1.0;
            let mut g = vec![0.0; field.dim()];
            for &i in &idx {
                prob *= probs[i];
                if probs[i] > 0.0 {
                    for (o, v) in g.iter_mut().zip(&field.per_sample()[i]) {
                        *o += v / (m as f64 * n as f64 * probs[i]);
                    }
                }
            }
            total += prob * norm_sq(&g);
            let mut k = 0;
            loop {
                if k == m {
                    return total;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn unit_vector_example() {
        let f = field(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let v = closed_form_second_moment(&f, &[0.5, 0.5], 1).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!((enumerate_second_moment(&f, &[0.5, 0.5], 1) - 1.0).abs() < 1e-15);
        let est = monte_carlo_second_moment(&f, &[0.5, 0.5], 1, 100_000, 1).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn identical_gradients_have_no_variance() {
        let f = field(&[&[0.3, -0.3], &[0.3, -0.3], &[0.3, -0.3]]);
        let full = norm_sq(&f.full_gradient());
        let v = closed_form_second_moment(&f, &[1.0 / 3.0; 3], 3).unwrap();
        assert!((v - full).abs() < 1e-15);
    }

    #[test]
    fn norms_two_and_one() {
        let f = field(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let uniform = closed_form_second_moment(&f, &[0.5, 0.5], 1).unwrap();
        assert!((uniform - 2.5).abs() < 1e-12);
        let optimal = closed_form_second_moment(&f, &[2.0 / 3.0, 1.0 / 3.0], 1).unwrap();
        assert!((optimal - 2.25).abs() < 1e-12);
        assert!((jensen_minimum(&f, 1) - 2.25).abs() < 1e-12);
        let est = monte_carlo_second_moment(&f, &[0.5, 0.5], 1, 100_000, 9).unwrap();
        assert!(est.deviation_in_se(2.5) <= 3.0);

        let report = optimal_distribution_check(&f, 1, 20, 3).unwrap();
        assert!(report.optimal_is_minimum);
        assert!(report.jensen_equal);
        assert!((report.candidates[0].closed_form - 2.25).abs() < 1e-12);
        assert!(report.candidates.len() >= 23);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let mut rng = stream_rng(17, 0);
        for m in 1..=3 {
            let f = random_boosting_field(4, 3, &mut rng).unwrap();
            let probs = dirichlet_uniform(4, &mut rng);
            let closed = closed_form_second_moment(&f, &probs, m).unwrap();
            let exact = enumerate_second_moment(&f, &probs, m);
            assert!((closed - exact).abs() < 1e-10 * exact.max(1.0), "{closed} vs {exact}");
        }
    }

    #[test]
    fn equal_norms_make_uniform_optimal() {
        let f = field(&[&[1.0, 0.0], &[0.0, -1.0], &[0.6, 0.8]]);
        let report = optimal_distribution_check(&f, 2, 10, 0).unwrap();
        for p in &report.candidates[0].probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((report.candidates[0].closed_form - report.candidates[1].closed_form).abs() < 1e-14);
    }

    #[test]
    fn zero_probability_on_nonzero_gradient_is_an_error() {
        let f = field(&[&[1.0], &[1.0]]);
        assert!(closed_form_second_moment(&f, &[1.0, 0.0], 1).is_err());
        let g = field(&[&[1.0], &[0.0]]);
        assert!(closed_form_second_moment(&g, &[1.0, 0.0], 1).is_ok());
    }

    #[test]
    fn zero_field_is_degenerate() {
        let f = field(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert!(optimal_distribution_check(&f, 1, 5, 0).unwrap().degenerate);
        let est = monte_carlo_second_moment(&f, &[0.5, 0.5], 1, 1000, 0).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn family_band_widens_with_comparisons() {
        assert_eq!(family_band(3.0, 1), 3.0);
        let b = family_band(3.0, 100);
        assert!(b > 4.0 && b < 4.3, "{b}");
        assert!(family_band(3.0, 1000) > b);
        // Tail at 3 SE is about 0.0027; a hundredth of it sits near 4.04 SE.
        let tail = libm::erfc(b / std::f64::consts::SQRT_2);
        assert!((tail * 100.0 / libm::erfc(3.0 / std::f64::consts::SQRT_2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn point_mass_is_exactly_unbiased() {
        let f = field(&[&[0.0, 0.0], &[0.7, -0.7], &[0.0, 0.0]]);
        let dev = unbiasedness_check(&f, &[0.0, 1.0, 0.0], 1000, 1).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn gradients_are_minus_half_weights() {
        let f = GradientField::from_scores(&[vec![1.0, 0.0]], &[0]).unwrap();
        let w = compute_weights(&[1.0, 0.0], 0).unwrap();
        assert_eq!(f.per_sample()[0], vec![-0.5 * w.values[0], -0.5 * w.values[1]]);
    }

    #[test]
    fn suite_passes_and_negative_control_fails() {
        let small = SuiteOptions {
            instances: 6,
            draws: 20_000,
            seed: 5,
            ..SuiteOptions::default()
        };
        let report = run_suite(&small).unwrap();
        assert!(report.passed, "{report:#?}");
        let bad = run_suite(&SuiteOptions {
            corrupt_closed_form: true,
            ..small
        })
        .unwrap();
        assert!(!bad.passed);
        let failing = bad.identities.iter().find(|r| !r.passed).unwrap();
        assert!(failing.failures[0].get("field").is_some());
    }
}
