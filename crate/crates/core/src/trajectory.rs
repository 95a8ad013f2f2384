//! Smoother states: skeleton states plus per-interval Wiener increment
//! blocks, single-level and coupled across adjacent levels.

use rand::Rng;

use crate::coupling::{coarsen_values, coupled_initial_sample, coupled_transition_sample};
use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::sde::{fill_increments, DiffusionModel, WienerIncrements};

/// One smoother state at level `l`: `x_0..x_T` and `T` increment blocks,
/// block `k` driving the bridge on `[t_{k−1}, t_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub level: u32,
    pub dim: usize,
    /// `(T+1)·dim` values, row-major.
    pub states: Vec<f64>,
    /// `blocks[k−1]` holds `n_k(l)·dim` increments for interval `k`.
    pub blocks: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn n_intervals(&self) -> usize {
        self.blocks.len()
    }

    /// State at skeleton index `k ∈ 0..=T`.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Increment block of interval `k ∈ 1..=T`.
    pub fn block(&self, k: usize) -> &[f64] {
        &self.blocks[k - 1]
    }

    pub fn wiener(&self, data: &StateSpaceData, k: usize) -> Result<WienerIncrements> {
        WienerIncrements::new(data.segment(k, self.level), self.dim, self.blocks[k - 1].clone())
    }

    /// Check shape against the time layout at this trajectory's level.
    pub fn check(&self, data: &StateSpaceData) -> Result<()> {
        let t = data.n_intervals();
        if self.blocks.len() != t || self.states.len() != (t + 1) * self.dim {
            return Err(Error::precondition(format!(
                "trajectory has {} blocks and {} states, layout needs {t} and {}",
                self.blocks.len(),
                self.states.len() / self.dim.max(1),
                t + 1
            )));
        }
        for k in 1..=t {
            let need = data.segment(k, self.level).n_steps * self.dim;
            if self.blocks[k - 1].len() != need {
                return Err(Error::precondition(format!(
                    "block {k} has {} entries, level {} needs {need}",
                    self.blocks[k - 1].len(),
                    self.level
                )));
            }
        }
        if self.states.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("non-finite trajectory state"));
        }
        Ok(())
    }
}

/// Draw from the unconditioned proposal law: `x_0 ~ ν`, `x_k ~ f̄(·|x_{k−1})`,
/// independent Wiener blocks.
pub fn initial_trajectory<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &StateSpaceData,
    level: u32,
    rng: &mut R,
) -> Result<Trajectory> {
    let d = model.state_dim();
    let t = data.n_intervals();
    let mut states = vec![0.0; (t + 1) * d];
    model.sample_initial(theta, rng, &mut states[..d])?;
    let mut blocks = Vec::with_capacity(t);
    for k in 1..=t {
        let (prev, next) = states.split_at_mut(k * d);
        model.sample_proposal(
            theta,
            data.times[k - 1],
            data.times[k],
            &prev[(k - 1) * d..],
            rng,
            &mut next[..d],
        )?;
        let seg = data.segment(k, level);
        let mut block = vec![0.0; seg.n_steps * d];
        fill_increments(&mut block, seg.step(), rng);
        blocks.push(block);
    }
    Ok(Trajectory {
        level,
        dim: d,
        states,
        blocks,
    })
}

/// A fine chain state at level `l` and a coarse one at level `l − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub fine: Trajectory,
    pub coarse: Trajectory,
    /// `meets[k−1]` is true when the selected fine and coarse particle
    /// indices coincided at time `k` in the sweep that produced this state.
    pub meets: Vec<bool>,
}

impl CoupledTrajectory {
    pub fn all_met(&self) -> bool {
        self.meets.iter().all(|&m| m)
    }
}

/// Draw from the coupled initial law: both chains share coupled initial and
/// transition draws at parameter `θ`, and each coarse block is the
/// coarsening of the fine block.
pub fn coupled_initial_trajectory<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &StateSpaceData,
    level: u32,
    rng: &mut R,
) -> Result<CoupledTrajectory> {
    if level == 0 {
        return Err(Error::precondition("coupled trajectories need level ≥ 1"));
    }
    let d = model.state_dim();
    let t = data.n_intervals();
    let (x0, x0_bar) = coupled_initial_sample(model, theta, theta, rng)?;
    let mut fine_states = x0;
    let mut coarse_states = x0_bar;
    let mut fine_blocks = Vec::with_capacity(t);
    let mut coarse_blocks = Vec::with_capacity(t);
    for k in 1..=t {
        let (x, x_bar) = coupled_transition_sample(
            model,
            theta,
            theta,
            data.times[k - 1],
            data.times[k],
            &fine_states[(k - 1) * d..k * d],
            &coarse_states[(k - 1) * d..k * d],
            rng,
        )?;
        fine_states.extend_from_slice(&x);
        coarse_states.extend_from_slice(&x_bar);
        let seg = data.segment(k, level);
        let mut block = vec![0.0; seg.n_steps * d];
        fill_increments(&mut block, seg.step(), rng);
        let mut coarse = Vec::new();
        coarsen_values(&block, d, &mut coarse);
        fine_blocks.push(block);
        coarse_blocks.push(coarse);
    }
    Ok(CoupledTrajectory {
        fine: Trajectory {
            level,
            dim: d,
            states: fine_states,
            blocks: fine_blocks,
        },
        coarse: Trajectory {
            level: level - 1,
            dim: d,
            states: coarse_states,
            blocks: coarse_blocks,
        },
        meets: vec![true; t],
    })
}
