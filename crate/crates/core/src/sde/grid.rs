//! Time grids, Wiener increment blocks and discretized bridge paths.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Uniform grid on `[s1, s2]` with `n_steps` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub s1: f64,
    pub s2: f64,
    pub n_steps: usize,
}

/// Number of level-0 cells used for a gap. Unit gaps get one cell; longer
/// gaps are split so that every cell is at most one time unit.
fn base_steps(gap: f64) -> usize {
    ((gap - 1e-9).ceil() as usize).max(1)
}

impl SegmentSpec {
    pub fn new(s1: f64, s2: f64, n_steps: usize) -> Result<Self> {
        if !(s1 < s2) || !s1.is_finite() || !s2.is_finite() {
            return Err(Error::precondition(format!(
                "segment needs s1 < s2, got [{s1}, {s2}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::precondition("segment needs at least one step"));
        }
        Ok(Self { s1, s2, n_steps })
    }

    /// Grid for `[s1, s2]` at discretization level `l`: `base · 2^l` cells,
    /// so the level-`l` grid always refines the level-`(l-1)` grid by exactly
    /// two. On unit intervals this is `2^l` cells of width `2^-l`.
    pub fn at_level(s1: f64, s2: f64, level: u32) -> Result<Self> {
        Self::new(s1, s2, base_steps(s2 - s1) << level)
    }

    pub fn step(&self) -> f64 {
        (self.s2 - self.s1) / self.n_steps as f64
    }

    /// Time of grid node `j`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.s2
        } else {
            self.s1 + j as f64 * self.step()
        }
    }

    /// The grid one level coarser (half the cells).
    pub fn coarsened(&self) -> Result<Self> {
        if self.n_steps % 2 != 0 {
            return Err(Error::precondition(format!(
                "cannot coarsen a segment with {} steps",
                self.n_steps
            )));
        }
        Self::new(self.s1, self.s2, self.n_steps / 2)
    }
}

/// Brownian increments `W_{t_{j+1}} - W_{t_j}` over one segment, stored
/// row-major (`n_steps` rows of `dim` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    pub segment: SegmentSpec,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl WienerIncrements {
    pub fn new(segment: SegmentSpec, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != segment.n_steps * dim {
            return Err(Error::precondition(format!(
                "expected {} increment entries, got {}",
                segment.n_steps * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("non-finite Wiener increment"));
        }
        Ok(Self {
            segment,
            dim,
            values,
        })
    }

    pub fn sample<R: Rng + ?Sized>(segment: SegmentSpec, dim: usize, rng: &mut R) -> Self {
        let mut values = vec![0.0; segment.n_steps * dim];
        fill_increments(&mut values, segment.step(), rng);
        Self {
            segment,
            dim,
            values,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.segment.n_steps
    }

    pub fn increment(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Sum of all increments (total displacement `W_{s2} - W_{s1}`).
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for row in self.values.chunks_exact(self.dim) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }
}

/// Fill `out` with independent `N(0, dt)` draws.
pub fn fill_increments<R: Rng + ?Sized>(out: &mut [f64], dt: f64, rng: &mut R) {
    let sd = dt.sqrt();
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

/// A discretized path on a segment: start, interior Euler states, end.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePath {
    pub segment: SegmentSpec,
    pub dim: usize,
    /// `(n_steps + 1) * dim` values, row-major.
    pub states: Vec<f64>,
}

impl LatticePath {
    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.segment.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> &[f64] {
        self.state(0)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.segment.n_steps)
    }
}
