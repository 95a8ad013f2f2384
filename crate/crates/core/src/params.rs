//! Parameter vectors, their admissible sets and projection boxes.

use crate::error::{Error, Result};

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    pub const NEGATIVE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: 0.0,
    };

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v > self.lo && v < self.hi
    }

    /// Distance from `v` to the nearest end of the interval.
    pub fn margin(&self, v: f64) -> f64 {
        (v - self.lo).min(self.hi - v)
    }
}

/// The open parameter set Θ, one interval per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub names: Vec<String>,
    pub bounds: Vec<Interval>,
}

impl ParamSpace {
    pub fn new(names: &[&str], bounds: Vec<Interval>) -> Self {
        assert_eq!(names.len(), bounds.len());
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && self.bounds.iter().zip(theta).all(|(b, &v)| b.contains(v))
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Parameter(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                theta.len()
            )));
        }
        for ((b, &v), name) in self.bounds.iter().zip(theta).zip(&self.names) {
            if !b.contains(v) {
                return Err(Error::Parameter(format!(
                    "{name} = {v} not in ({}, {})",
                    b.lo, b.hi
                )));
            }
        }
        Ok(())
    }
}

/// Closed box strictly inside Θ onto which stochastic-approximation iterates
/// are projected.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ProjectionBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        Self { lo, hi }
    }

    /// Clamp in place. Returns true if any coordinate moved.
    pub fn project(&self, theta: &mut [f64]) -> bool {
        let mut moved = false;
        for ((v, &lo), &hi) in theta.iter_mut().zip(&self.lo).zip(&self.hi) {
            let c = if v.is_nan() { lo } else { v.clamp(lo, hi) };
            if c != *v {
                *v = c;
                moved = true;
            }
        }
        moved
    }
}
