//! Markovian stochastic approximation driven by the particle kernels.

use rand::Rng;

use super::score::h_l;
use crate::ccpf::{ccpf_bs_sweep_stats, CouplingStats};
use crate::cpf::{cpf_bs_sweep, Variant};
use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::params::ProjectionBox;
use crate::sde::DiffusionModel;
use crate::trajectory::{coupled_initial_trajectory, initial_trajectory};

/// `γ_n = γ0 · (n + offset)^{−exponent}`, per coordinate. A single-entry
/// `gamma0` applies to every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSize {
    pub gamma0: Vec<f64>,
    pub exponent: f64,
    pub offset: f64,
}

impl StepSize {
    pub fn new(gamma0: Vec<f64>, exponent: f64, offset: f64) -> Result<Self> {
        if gamma0.is_empty() || gamma0.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::precondition("γ0 entries must be finite and non-negative"));
        }
        if !(exponent >= 0.0) || !(offset >= 0.0) {
            return Err(Error::precondition("step exponent and offset must be non-negative"));
        }
        Ok(Self {
            gamma0,
            exponent,
            offset,
        })
    }

    /// Step for iteration `n ≥ 1` and coordinate `i`.
    pub fn gamma(&self, n: usize, i: usize) -> f64 {
        let g0 = if self.gamma0.len() == 1 { self.gamma0[0] } else { self.gamma0[i] };
        g0 * (n as f64 + self.offset).powf(-self.exponent)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.gamma0.len() != 1 && self.gamma0.len() != dim {
            return Err(Error::precondition(format!(
                "γ0 has {} entries for a {dim}-dimensional parameter",
                self.gamma0.len()
            )));
        }
        Ok(())
    }
}

/// Settings shared by every stochastic-approximation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    pub n_particles: usize,
    pub variant: Variant,
    pub step: StepSize,
    /// Iterates are clamped into this box after every update.
    pub projection: ProjectionBox,
    /// Finite-difference step for the path term; `None` uses `2^{−l}`.
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsaRun {
    /// `θ_0, …, θ_n`.
    pub iterates: Vec<Vec<f64>>,
    /// Number of updates that had to be projected.
    pub projections: usize,
    /// Euler cells × particles × sweeps.
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledMsaRun {
    /// `θ_0^l, …, θ_n^l`.
    pub fine: Vec<Vec<f64>>,
    /// `θ_0^{l−1}, …, θ_n^{l−1}`.
    pub coarse: Vec<Vec<f64>>,
    pub projections: usize,
    pub cost: u64,
    pub coupling: CouplingStats,
    /// Sweeps in which every selected fine and coarse index coincided.
    pub all_met_sweeps: usize,
}

fn update(theta: &[f64], h: &[f64], step: &StepSize, n: usize, projection: &ProjectionBox) -> (Vec<f64>, bool) {
    let mut next: Vec<f64> = theta
        .iter()
        .zip(h)
        .enumerate()
        .map(|(i, (t, g))| t + step.gamma(n, i) * g)
        .collect();
    let moved = projection.project(&mut next);
    (next, moved)
}

/// Single-level recursion `θ_n = Proj(θ_{n−1} + γ_n H_l(θ_{n−1}, z^n))`
/// with `z^n` drawn from the level-`l` kernel at `θ_{n−1}` and `z^0` from
/// the unconditioned proposal law at `θ_0`.
pub fn msa_run<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta0: &[f64],
    level: u32,
    n_iters: usize,
    cfg: &SaConfig,
    data: &StateSpaceData,
    rng: &mut R,
) -> Result<MsaRun> {
    model.param_space().check(theta0)?;
    cfg.step.check_dim(theta0.len())?;
    let per_sweep = (cfg.n_particles * data.steps_at_level(level)) as u64;
    let mut z = initial_trajectory(model, theta0, data, level, rng)?;
    let mut iterates = Vec::with_capacity(n_iters + 1);
    iterates.push(theta0.to_vec());
    let mut projections = 0;
    for n in 1..=n_iters {
        let theta = iterates.last().unwrap();
        z = cpf_bs_sweep(model, theta, level, &z, data, cfg.n_particles, rng, cfg.variant)?;
        let h = h_l(model, theta, &z, data, cfg.fd_step)?;
        let (next, moved) = update(theta, &h, &cfg.step, n, &cfg.projection);
        projections += moved as usize;
        iterates.push(next);
    }
    Ok(MsaRun {
        iterates,
        projections,
        cost: per_sweep * n_iters as u64,
    })
}

/// Two recursions at levels `l` and `l − 1` from a common `θ_0`, driven by
/// the coupled kernel.
pub fn coupled_msa_run<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta0: &[f64],
    level: u32,
    n_iters: usize,
    cfg: &SaConfig,
    data: &StateSpaceData,
    rng: &mut R,
) -> Result<CoupledMsaRun> {
    model.param_space().check(theta0)?;
    cfg.step.check_dim(theta0.len())?;
    if level == 0 {
        return Err(Error::precondition("coupled recursion needs level ≥ 1"));
    }
    let per_sweep =
        (cfg.n_particles * (data.steps_at_level(level) + data.steps_at_level(level - 1))) as u64;
    let mut v = coupled_initial_trajectory(model, theta0, data, level, rng)?;
    let mut fine = vec![theta0.to_vec()];
    let mut coarse = vec![theta0.to_vec()];
    let mut projections = 0;
    let mut coupling = CouplingStats::default();
    let mut all_met_sweeps = 0;
    for n in 1..=n_iters {
        let tf = fine.last().unwrap();
        let tc = coarse.last().unwrap();
        v = ccpf_bs_sweep_stats(
            model,
            tf,
            tc,
            &v,
            data,
            cfg.n_particles,
            rng,
            cfg.variant,
            &mut coupling,
        )?;
        all_met_sweeps += v.all_met() as usize;
        let hf = h_l(model, tf, &v.fine, data, cfg.fd_step)?;
        let hc = h_l(model, tc, &v.coarse, data, cfg.fd_step)?;
        let (nf, mf) = update(tf, &hf, &cfg.step, n, &cfg.projection);
        let (nc, mc) = update(tc, &hc, &cfg.step, n, &cfg.projection);
        projections += mf as usize + mc as usize;
        fine.push(nf);
        coarse.push(nc);
    }
    Ok(CoupledMsaRun {
        fine,
        coarse,
        projections,
        cost: per_sweep * n_iters as u64,
        coupling,
        all_met_sweeps,
    })
}
