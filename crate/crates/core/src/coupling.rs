//! Couplings used by the two-level kernel: the maximal coupling of two
//! categorical laws, dyadic coarsening of Wiener increments, and
//! common-random-number couplings of the proposal transition and initial law.

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sde::{DiffusionModel, WienerIncrements};
use crate::weights::{categorical_from_cdf, cumulative};

/// Overlap mass at or above which two pmfs are treated as identical.
const IDENTICAL_OVERLAP: f64 = 1.0 - 1e-12;

/// Two strictly positive pmfs of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalPair {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl CategoricalPair {
    pub fn new(r1: Vec<f64>, r2: Vec<f64>) -> Result<Self> {
        if r1.len() != r2.len() || r1.is_empty() {
            return Err(Error::precondition("pmfs must be non-empty and of equal length"));
        }
        for r in [&r1, &r2] {
            if r.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::precondition("pmf entries must be strictly positive"));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::precondition(format!("pmf sums to {s}, not 1")));
            }
        }
        Ok(Self { r1, r2 })
    }
}

/// Output of one coupled index draw (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledIndexDraw {
    pub i: usize,
    pub j: usize,
    /// Drawn through the overlap branch, so `i == j`.
    pub met: bool,
}

/// Precomputed tables for drawing from the maximal coupling of two pmfs.
/// Entries may be zero here; the particle filters feed it normalized
/// weights in which bridges that left the state domain carry no mass.
#[derive(Debug, Clone)]
pub struct MaxCoupling {
    overlap: f64,
    overlap_cdf: Vec<f64>,
    res1_cdf: Vec<f64>,
    res2_cdf: Vec<f64>,
}

impl MaxCoupling {
    pub fn new(r1: &[f64], r2: &[f64]) -> Self {
        debug_assert_eq!(r1.len(), r2.len());
        let mins: Vec<f64> = r1.iter().zip(r2).map(|(a, b)| a.min(*b)).collect();
        let overlap: f64 = mins.iter().sum();
        let res1: Vec<f64> = r1.iter().zip(&mins).map(|(a, m)| (a - m).max(0.0)).collect();
        let res2: Vec<f64> = r2.iter().zip(&mins).map(|(a, m)| (a - m).max(0.0)).collect();
        Self {
            overlap,
            overlap_cdf: cumulative(&mins),
            res1_cdf: cumulative(&res1),
            res2_cdf: cumulative(&res2),
        }
    }

    /// `Σ_k min(r1_k, r2_k) = 1 − TV(r1, r2)`.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoupledIndexDraw {
        let identical = self.overlap >= IDENTICAL_OVERLAP;
        let u: f64 = rng.random();
        if identical || u < self.overlap {
            let v: f64 = rng.random();
            let i = categorical_from_cdf(&self.overlap_cdf, v);
            return CoupledIndexDraw { i, j: i, met: true };
        }
        let v1: f64 = rng.random();
        let v2: f64 = rng.random();
        CoupledIndexDraw {
            i: categorical_from_cdf(&self.res1_cdf, v1),
            j: categorical_from_cdf(&self.res2_cdf, v2),
            met: false,
        }
    }
}

pub fn maximal_coupling_sample<R: Rng + ?Sized>(
    pair: &CategoricalPair,
    rng: &mut R,
) -> CoupledIndexDraw {
    MaxCoupling::new(&pair.r1, &pair.r2).sample(rng)
}

/// Sum consecutive pairs of a row-major increment block with `dim` columns.
pub fn coarsen_values(fine: &[f64], dim: usize, out: &mut Vec<f64>) {
    out.clear();
    for pair in fine.chunks_exact(2 * dim) {
        for c in 0..dim {
            out.push(pair[c] + pair[dim + c]);
        }
    }
}

/// The coarsening map: the level-`l−1` block driven by the same Brownian
/// path as a level-`l` block.
pub fn coarsen_increments(fine: &WienerIncrements) -> Result<WienerIncrements> {
    let segment = fine.segment.coarsened()?;
    let mut values = Vec::with_capacity(fine.values.len() / 2);
    coarsen_values(&fine.values, fine.dim, &mut values);
    Ok(WienerIncrements {
        segment,
        dim: fine.dim,
        values,
    })
}

/// Two generators replaying one stream, seeded from `rng`.
fn twin_streams<R: Rng + ?Sized>(rng: &mut R) -> (SimRng, SimRng) {
    let seed: u64 = rng.random();
    (SimRng::seed_from_u64(seed), SimRng::seed_from_u64(seed))
}

/// Draw `(x', x̄')` with `x' ~ f̄_θ(·|x)` and `x̄' ~ f̄_θ̄(·|x̄)` from common
/// random numbers.
#[allow(clippy::too_many_arguments)]
pub fn coupled_transition_sample<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    theta_bar: &[f64],
    s1: f64,
    s2: f64,
    x: &[f64],
    x_bar: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.state_dim();
    let (mut a, mut b) = twin_streams(rng);
    let mut out = vec![0.0; d];
    let mut out_bar = vec![0.0; d];
    model.sample_proposal(theta, s1, s2, x, &mut a, &mut out)?;
    model.sample_proposal(theta_bar, s1, s2, x_bar, &mut b, &mut out_bar)?;
    Ok((out, out_bar))
}

/// Draw `(x0, x̄0)` with `x0 ~ ν_θ`, `x̄0 ~ ν_θ̄` from common random numbers.
pub fn coupled_initial_sample<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    theta_bar: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.state_dim();
    let (mut a, mut b) = twin_streams(rng);
    let mut out = vec![0.0; d];
    let mut out_bar = vec![0.0; d];
    model.sample_initial(theta, &mut a, &mut out)?;
    model.sample_initial(theta_bar, &mut b, &mut out_bar)?;
    Ok((out, out_bar))
}
