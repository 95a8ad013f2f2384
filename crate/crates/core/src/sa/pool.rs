//! Pooling of independent single estimates.

use super::umsa::EstimateRecord;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct PooledSummary {
    pub n_records: usize,
    pub mean: Vec<f64>,
    /// Sample variance of single records (NaN for one record).
    pub variance: Vec<f64>,
    pub std_error: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Averages `Ξ_M^i` over `⌊n/M⌋` disjoint consecutive groups.
    pub group_means: Vec<Vec<f64>>,
    pub total_cost: u64,
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0; dim];
    let mut n = 0;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        n += 1;
    }
    for a in acc.iter_mut() {
        *a /= n as f64;
    }
    (acc, n)
}

fn group_means(records: &[EstimateRecord], m_group: usize, dim: usize) -> Vec<Vec<f64>> {
    records
        .chunks_exact(m_group)
        .map(|g| mean_of(g.iter().map(|r| r.theta_hat.as_slice()), dim).0)
        .collect()
}

fn check(records: &[EstimateRecord], m_group: usize) -> Result<usize> {
    if records.is_empty() {
        return Err(Error::precondition("no records to pool"));
    }
    if m_group == 0 || m_group > records.len() {
        return Err(Error::precondition(format!(
            "group size {m_group} not in 1..={}",
            records.len()
        )));
    }
    let dim = records[0].theta_hat.len();
    if records.iter().any(|r| r.theta_hat.len() != dim) {
        return Err(Error::precondition("records differ in dimension"));
    }
    Ok(dim)
}

pub fn pool_estimates(records: &[EstimateRecord], m_group: usize) -> Result<PooledSummary> {
    let dim = check(records, m_group)?;
    let (mean, n) = mean_of(records.iter().map(|r| r.theta_hat.as_slice()), dim);
    let mut variance = vec![0.0; dim];
    for r in records {
        for ((v, x), m) in variance.iter_mut().zip(&r.theta_hat).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in variance.iter_mut() {
        *v = if n > 1 { *v / (n - 1) as f64 } else { f64::NAN };
    }
    let std_error: Vec<f64> = variance.iter().map(|v| (v / n as f64).sqrt()).collect();
    Ok(PooledSummary {
        n_records: n,
        ci_low: mean.iter().zip(&std_error).map(|(m, s)| m - Z95 * s).collect(),
        ci_high: mean.iter().zip(&std_error).map(|(m, s)| m + Z95 * s).collect(),
        group_means: group_means(records, m_group, dim),
        total_cost: records.iter().map(|r| r.cost).sum(),
        mean,
        variance,
        std_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseEstimate {
    pub groups: usize,
    pub m_group: usize,
    /// `ε² = (1/B) Σ_i (Ξ_M^i − θ_ref)²` per coordinate.
    pub eps2: Vec<f64>,
    /// Mean cost of one group average.
    pub cost: f64,
}

pub fn estimate_mse(records: &[EstimateRecord], theta_ref: &[f64], m_group: usize) -> Result<MseEstimate> {
    let dim = check(records, m_group)?;
    if theta_ref.len() != dim {
        return Err(Error::precondition("reference parameter has the wrong dimension"));
    }
    let groups = group_means(records, m_group, dim);
    let b = groups.len();
    let mut eps2 = vec![0.0; dim];
    for g in &groups {
        for ((e, x), t) in eps2.iter_mut().zip(g).zip(theta_ref) {
            *e += (x - t) * (x - t);
        }
    }
    for e in eps2.iter_mut() {
        *e /= b as f64;
    }
    let used: u64 = records[..b * m_group].iter().map(|r| r.cost).sum();
    Ok(MseEstimate {
        groups: b,
        m_group,
        eps2,
        cost: used as f64 / b as f64,
    })
}
