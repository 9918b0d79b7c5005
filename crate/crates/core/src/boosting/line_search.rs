//! Bounded golden-section search for the boosting step size.

use crate::error::{domain, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Settings for [`golden_section`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub upper: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            upper: 10.0,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

/// Minimizes a unimodal `objective` over `[0, upper]`.
///
/// The interior golden-section estimate is compared against both endpoints
/// and the smallest argument attaining the lowest value wins, so monotone
/// objectives land exactly on a bound and flat ones return 0.
pub fn golden_section<F>(mut objective: F, search: &LineSearch) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(search.upper > 0.0 && search.upper.is_finite()) {
        return Err(domain(format!("line-search bound {} must be > 0", search.upper)));
    }
    if !(search.tolerance > 0.0) {
        return Err(domain("line-search tolerance must be > 0"));
    }
    let at_zero = objective(0.0);
    if !at_zero.is_finite() {
        return Err(domain("objective is not finite at α = 0"));
    }

    let (mut a, mut b) = (0.0, search.upper);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    let mut iterations = 0;
    while b - a > search.tolerance && iterations < search.max_iterations {
        // `<=` keeps the left bracket on ties.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(d);
        }
        iterations += 1;
    }
    let interior = 0.5 * (a + b);
    let candidates = [
        (0.0, at_zero),
        (interior, objective(interior)),
        (search.upper, objective(search.upper)),
    ];
    let mut best = candidates[0];
    for &(x, fx) in &candidates[1..] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best.0)
}
