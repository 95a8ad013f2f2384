//! Log-weight normalization and categorical sampling.

use rand::Rng;

/// `log Σ exp(lw_i)` with a max shift. Returns `-inf` when every entry is
/// `-inf` and NaN if any entry is NaN.
pub fn log_sum_exp(lw: &[f64]) -> f64 {
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lw.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + lw.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Normalize log-weights into probabilities. Returns `None` if the weights
/// carry no mass (all `-inf`), or contain NaN or `+inf`.
pub fn normalize_log_weights(lw: &[f64], out: &mut [f64]) -> Option<f64> {
    debug_assert_eq!(lw.len(), out.len());
    let lse = log_sum_exp(lw);
    if !lse.is_finite() {
        return None;
    }
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, v) in out.iter_mut().zip(lw) {
        *o = (v - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Some(lse)
}

/// Inverse-CDF lookup for `u ∈ [0, 1)`. Zero-mass entries are never chosen.
pub fn categorical_from_uniform(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the accumulated total
    last
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    categorical_from_uniform(probs, u)
}

/// Cumulative sums for repeated inverse-CDF draws.
pub fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Inverse-CDF draw from precomputed cumulative sums. `u` is scaled by the
/// final total so unnormalized tables work too.
pub fn categorical_from_cdf(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    let i = cdf.partition_point(|&c| c <= target);
    let mut i = i.min(cdf.len() - 1);
    // skip trailing zero-mass entries
    while i > 0 && cdf[i] == cdf[i - 1] {
        i -= 1;
    }
    i
}

/// Total variation distance between two pmfs.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
