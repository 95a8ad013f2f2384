//! Gamma-law helpers built on the regularized incomplete gamma function.

use statrs::function::gamma::{checked_gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Log-density of `Gamma(shape, rate)` at `x`.
pub fn gamma_log_density(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Quantile of `Gamma(shape, rate)` at `u ∈ (0, 1)`, found by safeguarded
/// Newton iteration on the regularized lower incomplete gamma function.
/// Converges to a relative tolerance of `1e-12` in the argument.
pub fn gamma_quantile(shape: f64, rate: f64, u: f64) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::Sampling(format!("invalid Gamma({shape}, {rate})")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Sampling(format!("uniform {u} outside (0, 1)")));
    }
    let cdf = |y: f64| {
        checked_gamma_lr(shape, y).map_err(|e| Error::Sampling(format!("incomplete gamma: {e}")))
    };
    let ln_norm = ln_gamma(shape);
    let pdf = |y: f64| ((shape - 1.0) * y.ln() - y - ln_norm).exp();

    // bracket in the unit-rate scale
    let mut lo = 0.0;
    let mut hi = shape.max(1.0);
    while cdf(hi)? < u {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Sampling("Gamma quantile bracket overflow".into()));
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(y)? - u;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let d = pdf(y);
        let newton = if d > 0.0 && d.is_finite() { y - f / d } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - y).abs() <= 1e-12 * next.abs() || hi - lo <= 1e-12 * hi;
        y = next;
        if done {
            break;
        }
    }
    Ok(y / rate)
}
