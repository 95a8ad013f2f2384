//! Randomization laws over levels and iteration counts.

use rand::Rng;

use super::msa::StepSize;
use crate::error::{Error, Result};

/// A pmf over a finite increasing set of non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    pub support: Vec<u32>,
    pub probs: Vec<f64>,
}

impl Pmf {
    /// Normalize positive weights over `support`.
    pub fn new(support: Vec<u32>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::precondition("empty support"));
        }
        if support.len() != weights.len() || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::precondition("support must be strictly increasing and match the weights"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::precondition("pmf weights must be strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            support,
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn point(v: u32) -> Self {
        Self {
            support: vec![v],
            probs: vec![1.0],
        }
    }

    pub fn min(&self) -> u32 {
        self.support[0]
    }

    pub fn max(&self) -> u32 {
        *self.support.last().unwrap()
    }

    pub fn prob(&self, v: u32) -> f64 {
        self.support
            .binary_search(&v)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    /// Support element preceding `v`.
    pub fn previous(&self, v: u32) -> Option<u32> {
        let i = self.support.binary_search(&v).ok()?;
        i.checked_sub(1).map(|j| self.support[j])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return *v;
            }
        }
        self.max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// `P_L(l) ∝ (q+l−l0) log²(q+l−l0) 2^{−l}` on `{l0+1..L_Max}` and
    /// `P_P(p) ∝ (q+p) log²(q+p) 2^{−p}` on `{1..P_Max}`.
    PaperOu,
    /// As `PaperOu` with `2^{−l/2}` in the level law.
    PaperLogistic,
    /// `P_L(l) ∝ 2^{−l/2}(l+1) log₂(l+2)²`, `P_P(p) ∝ 2^{−p}(p+1) log₂(p+2)²`,
    /// `N_p = 2^p`, `γ_n = (n+1)^{−1}`.
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    Natural,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::Natural => x.ln(),
        }
    }
}

/// Optional replacements for the defaults of a schedule kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleOverrides {
    pub q: Option<f64>,
    pub l0: Option<u32>,
    pub l_max: Option<u32>,
    /// Smallest `p` in the support of `P_P`.
    pub p_min: Option<u32>,
    pub p_max: Option<u32>,
    pub n0: Option<u64>,
    pub gamma0: Option<Vec<f64>>,
    pub exponent: Option<f64>,
    pub offset: Option<f64>,
    pub log_base: Option<LogBase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    pub levels: Pmf,
    pub iterations: Pmf,
    pub n0: u64,
    pub step: StepSize,
}

impl LevelSchedule {
    /// `N_p = n0 · 2^p`.
    pub fn n_iters(&self, p: u32) -> u64 {
        self.n0 << p
    }

    /// A schedule that always picks `(l, p)`.
    pub fn fixed(level: u32, p: u32, n0: u64, step: StepSize) -> Self {
        Self {
            levels: Pmf::point(level),
            iterations: Pmf::point(p),
            n0,
            step,
        }
    }
}

pub fn build_schedule(kind: ScheduleKind, o: &ScheduleOverrides) -> Result<LevelSchedule> {
    let base = o.log_base.unwrap_or_default();
    let (levels, iterations, n0, step) = match kind {
        ScheduleKind::PaperOu | ScheduleKind::PaperLogistic => {
            let logistic = kind == ScheduleKind::PaperLogistic;
            let q = o.q.unwrap_or(4.0);
            let l0 = o.l0.unwrap_or(if logistic { 3 } else { 4 });
            let l_max = o.l_max.unwrap_or(if logistic { 8 } else { 11 });
            let p_min = o.p_min.unwrap_or(1);
            let p_max = o.p_max.unwrap_or(if logistic { 11 } else { 14 });
            let decay = if logistic { 0.5 } else { 1.0 };
            let shape = |v: f64| {
                let lg = base.log(v);
                v * lg * lg
            };
            let ls: Vec<u32> = (l0 + 1..=l_max).collect();
            let lw = ls
                .iter()
                .map(|&l| shape(q + l as f64 - l0 as f64) * (-(decay * l as f64)).exp2())
                .collect();
            let ps: Vec<u32> = (p_min..=p_max).collect();
            let pw = ps.iter().map(|&p| shape(q + p as f64) * (-(p as f64)).exp2()).collect();
            let gamma0 = if logistic {
                [2.0, 3.0, 0.6, 6.0].iter().map(|g| 5e-3 * g).collect()
            } else {
                vec![0.2]
            };
            (
                Pmf::new(ls, lw)?,
                Pmf::new(ps, pw)?,
                o.n0.unwrap_or(1),
                StepSize::new(
                    o.gamma0.clone().unwrap_or(gamma0),
                    o.exponent.unwrap_or(1.0),
                    o.offset.unwrap_or(0.0),
                )?,
            )
        }
        ScheduleKind::Theory => {
            let l_min = o.l0.unwrap_or(0);
            let l_max = o.l_max.unwrap_or(10);
            let p_min = o.p_min.unwrap_or(0);
            let p_max = o.p_max.unwrap_or(14);
            let w = |v: u32, decay: f64| {
                let v = v as f64;
                let lg = base.log(v + 2.0);
                (-(decay * v)).exp2() * (v + 1.0) * lg * lg
            };
            let ls: Vec<u32> = (l_min..=l_max).collect();
            let lw = ls.iter().map(|&l| w(l, 0.5)).collect();
            let ps: Vec<u32> = (p_min..=p_max).collect();
            let pw = ps.iter().map(|&p| w(p, 1.0)).collect();
            (
                Pmf::new(ls, lw)?,
                Pmf::new(ps, pw)?,
                o.n0.unwrap_or(1),
                StepSize::new(
                    o.gamma0.clone().unwrap_or_else(|| vec![1.0]),
                    o.exponent.unwrap_or(1.0),
                    o.offset.unwrap_or(1.0),
                )?,
            )
        }
    };
    if n0 == 0 {
        return Err(Error::precondition("n0 must be positive"));
    }
    if n0.checked_shl(iterations.max()).is_none_or(|v| v >> iterations.max() != n0) {
        return Err(Error::precondition("N_p overflows for the largest p"));
    }
    Ok(LevelSchedule {
        levels,
        iterations,
        n0,
        step,
    })
}
