//! Conditional particle filter with backward sampling on the bridge
//! reparameterization, and its ancestral-tracing variant.

use rand::Rng;

use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::sde::{bridge_log_weight, fill_increments, BridgeWorkspace, DiffusionModel};
use crate::trajectory::Trajectory;
use crate::weights::{categorical_from_cdf, cumulative, normalize_log_weights};

/// How the output path indices are selected after the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Backward sampling: reweight every particle against the selected
    /// continuation.
    #[default]
    Backward,
    /// Follow the stored ancestor links.
    Ancestral,
}

/// Map failures that mean "this proposal is impossible" to zero weight.
pub(crate) fn soften(r: Result<f64>) -> Result<f64> {
    match r {
        Ok(v) if v.is_nan() => Ok(f64::NEG_INFINITY),
        Ok(v) => Ok(v),
        Err(Error::Domain { .. } | Error::Overflow { .. } | Error::DomainExit { .. } | Error::ProposalSupport) => {
            Ok(f64::NEG_INFINITY)
        }
        Err(e) => Err(e),
    }
}

fn obs_term<M: DiffusionModel>(model: &M, theta: &[f64], data: &StateSpaceData, k: usize, x: &[f64]) -> f64 {
    match &data.y[k] {
        Some(y) => {
            let v = model.obs_log_density(theta, x, y);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        }
        None => 0.0,
    }
}

/// `log α_k = log g_θ(y_k | x_k) + log R^l` for the bridge from `x_prev` to
/// `x_k` on interval `k` driven by `w`.
#[allow(clippy::too_many_arguments)]
pub fn forward_log_weight<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    data: &StateSpaceData,
    level: u32,
    k: usize,
    x_prev: &[f64],
    w: &[f64],
    x_k: &[f64],
    ws: &mut BridgeWorkspace,
) -> Result<f64> {
    let seg = data.segment(k, level);
    let bw = bridge_log_weight(model, theta, &seg, x_prev, x_k, w, ws)?;
    Ok(obs_term(model, theta, data, k, x_k) + bw.log_r())
}

/// `log β_k = log α_k + log f̄_θ(x_{k+1} | x_k) + log R^l` for the bridge
/// from `x_k` to the selected `x_{k+1}` driven by the selected block.
#[allow(clippy::too_many_arguments)]
pub fn backward_log_weight<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    data: &StateSpaceData,
    level: u32,
    k: usize,
    x_k: &[f64],
    w_next: &[f64],
    x_next: &[f64],
    log_alpha: f64,
    ws: &mut BridgeWorkspace,
) -> Result<f64> {
    if log_alpha == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let seg = data.segment(k + 1, level);
    let bw = bridge_log_weight(model, theta, &seg, x_k, x_next, w_next, ws)?;
    Ok(log_alpha + bw.log_proposal + bw.log_r())
}

/// Particle arrays for one chain over a whole sweep.
#[derive(Debug, Clone)]
pub(crate) struct ParticleSystem {
    pub n: usize,
    pub d: usize,
    pub t: usize,
    pub level: u32,
    /// `(T+1)·N·d`; time-0 entries hold each particle's own initial state.
    xs: Vec<f64>,
    /// `blocks[k−1]` holds `N` blocks of interval `k`.
    blocks: Vec<Vec<f64>>,
    block_len: Vec<usize>,
    /// `anc[k·N + i]`: index at time `k` of the parent of particle `i` at
    /// time `k + 1`.
    anc: Vec<usize>,
    /// `log_alpha[(k−1)·N + i]`.
    log_alpha: Vec<f64>,
    probs: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(n: usize, d: usize, data: &StateSpaceData, level: u32) -> Self {
        let t = data.n_intervals();
        let block_len: Vec<usize> = (1..=t).map(|k| data.segment(k, level).n_steps * d).collect();
        Self {
            n,
            d,
            t,
            level,
            xs: vec![0.0; (t + 1) * n * d],
            blocks: block_len.iter().map(|&b| vec![0.0; n * b]).collect(),
            block_len,
            anc: vec![0; (t + 1) * n],
            log_alpha: vec![0.0; t * n],
            probs: vec![0.0; n],
        }
    }

    pub fn x(&self, k: usize, i: usize) -> &[f64] {
        let o = (k * self.n + i) * self.d;
        &self.xs[o..o + self.d]
    }

    pub fn x_mut(&mut self, k: usize, i: usize) -> &mut [f64] {
        let o = (k * self.n + i) * self.d;
        &mut self.xs[o..o + self.d]
    }

    pub fn w(&self, k: usize, i: usize) -> &[f64] {
        let b = self.block_len[k - 1];
        &self.blocks[k - 1][i * b..(i + 1) * b]
    }

    pub fn w_mut(&mut self, k: usize, i: usize) -> &mut [f64] {
        let b = self.block_len[k - 1];
        &mut self.blocks[k - 1][i * b..(i + 1) * b]
    }

    pub fn set_anc(&mut self, k: usize, i: usize, a: usize) {
        self.anc[k * self.n + i] = a;
    }

    pub fn anc(&self, k: usize, i: usize) -> usize {
        self.anc[k * self.n + i]
    }

    /// State the bridge into `x_k^i` starts from.
    pub fn parent_state(&self, k: usize, i: usize) -> &[f64] {
        if k == 1 {
            self.x(0, i)
        } else {
            self.x(k - 1, self.anc(k - 1, i))
        }
    }

    pub fn reference_slot(&self) -> usize {
        self.n - 1
    }

    /// Put the reference into the last slot at every time.
    pub fn load_reference(&mut self, reference: &Trajectory) {
        let r = self.reference_slot();
        for k in 0..=self.t {
            let src = reference.state(k).to_vec();
            self.x_mut(k, r).copy_from_slice(&src);
        }
        for k in 1..=self.t {
            let src = reference.block(k).to_vec();
            self.w_mut(k, r).copy_from_slice(&src);
            if k < self.t {
                self.set_anc(k, r, r);
            }
        }
    }

    /// Fresh Wiener block for particle `i` on interval `k`.
    pub fn fill_block<R: Rng + ?Sized>(&mut self, data: &StateSpaceData, k: usize, i: usize, rng: &mut R) {
        let dt = data.segment(k, self.level).step();
        fill_increments(self.w_mut(k, i), dt, rng);
    }

    /// Compute `log α_k^i` for every particle.
    pub fn weigh<M: DiffusionModel>(
        &mut self,
        model: &M,
        theta: &[f64],
        data: &StateSpaceData,
        k: usize,
        ws: &mut BridgeWorkspace,
    ) -> Result<()> {
        for i in 0..self.n {
            let mut lw = soften(forward_log_weight(
                model,
                theta,
                data,
                self.level,
                k,
                self.parent_state(k, i),
                self.w(k, i),
                self.x(k, i),
                ws,
            ))?;
            if k == 1 {
                lw += obs_term(model, theta, data, 0, self.x(0, i));
            }
            self.log_alpha[(k - 1) * self.n + i] = lw;
        }
        Ok(())
    }

    /// Normalized forward weights at time `k`, left in `self.probs`.
    pub fn normalized_alpha(&mut self, k: usize) -> Result<&[f64]> {
        let (lo, hi) = ((k - 1) * self.n, k * self.n);
        normalize_log_weights(&self.log_alpha[lo..hi], &mut self.probs).ok_or(Error::Degenerate { k })?;
        Ok(&self.probs)
    }

    /// Normalized backward weights at time `k` against the selected
    /// continuation `j` at time `k + 1`, left in `self.probs`. Falls back to
    /// the stored ancestor of `j` when every backward weight vanishes.
    pub fn normalized_beta<M: DiffusionModel>(
        &mut self,
        model: &M,
        theta: &[f64],
        data: &StateSpaceData,
        k: usize,
        j: usize,
        ws: &mut BridgeWorkspace,
    ) -> Result<&[f64]> {
        let mut lb = vec![0.0; self.n];
        for (i, b) in lb.iter_mut().enumerate() {
            *b = soften(backward_log_weight(
                model,
                theta,
                data,
                self.level,
                k,
                self.x(k, i),
                self.w(k + 1, j),
                self.x(k + 1, j),
                self.log_alpha[(k - 1) * self.n + i],
                ws,
            ))?;
        }
        if normalize_log_weights(&lb, &mut self.probs).is_none() {
            // Only reachable when the continuation is the reference and its
            // own prefix has zero weight at this θ; keep the stored parent.
            let a = self.anc(k, j);
            self.probs.fill(0.0);
            self.probs[a] = 1.0;
        }
        Ok(&self.probs)
    }

    /// Assemble the output trajectory from indices `j_1..j_T`.
    pub fn extract(&self, indices: &[usize]) -> Trajectory {
        let d = self.d;
        let mut states = Vec::with_capacity((self.t + 1) * d);
        states.extend_from_slice(self.x(0, indices[0]));
        for k in 1..=self.t {
            states.extend_from_slice(self.x(k, indices[k - 1]));
        }
        let blocks = (1..=self.t).map(|k| self.w(k, indices[k - 1]).to_vec()).collect();
        Trajectory {
            level: self.level,
            dim: d,
            states,
            blocks,
        }
    }
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    categorical_from_cdf(&cumulative(probs), u)
}

/// Output of one sweep with the selected particle index at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub trajectory: Trajectory,
    /// `indices[k−1] = j_k`; the reference occupies index `N − 1`.
    pub indices: Vec<usize>,
}

/// One draw from the conditional particle filter kernel at level `l`
/// started from `reference`.
#[allow(clippy::too_many_arguments)]
pub fn cpf_bs_sweep<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    level: u32,
    reference: &Trajectory,
    data: &StateSpaceData,
    n: usize,
    rng: &mut R,
    variant: Variant,
) -> Result<Trajectory> {
    Ok(cpf_bs_sweep_traced(model, theta, level, reference, data, n, rng, variant)?.trajectory)
}

#[allow(clippy::too_many_arguments)]
pub fn cpf_bs_sweep_traced<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    level: u32,
    reference: &Trajectory,
    data: &StateSpaceData,
    n: usize,
    rng: &mut R,
    variant: Variant,
) -> Result<SweepOutput> {
    if n < 2 {
        return Err(Error::precondition("the conditional particle filter needs N ≥ 2"));
    }
    if reference.level != level {
        return Err(Error::precondition("reference trajectory is at a different level"));
    }
    reference.check(data)?;
    let d = model.state_dim();
    let t = data.n_intervals();
    let mut sys = ParticleSystem::new(n, d, data, level);
    let mut ws = BridgeWorkspace::new(d);
    sys.load_reference(reference);
    let r = sys.reference_slot();
    let mut buf = vec![0.0; d];

    for i in 0..r {
        model.sample_initial(theta, rng, &mut buf)?;
        sys.x_mut(0, i).copy_from_slice(&buf);
    }
    for k in 1..=t {
        if k > 1 {
            let cdf = cumulative(sys.normalized_alpha(k - 1)?);
            for i in 0..r {
                let u: f64 = rng.random();
                sys.set_anc(k - 1, i, categorical_from_cdf(&cdf, u));
            }
        }
        for i in 0..r {
            let parent = sys.parent_state(k, i).to_vec();
            model.sample_proposal(theta, data.times[k - 1], data.times[k], &parent, rng, &mut buf)?;
            sys.x_mut(k, i).copy_from_slice(&buf);
            sys.fill_block(data, k, i, rng);
        }
        sys.weigh(model, theta, data, k, &mut ws)?;
    }

    let mut indices = vec![0; t];
    indices[t - 1] = draw(sys.normalized_alpha(t)?, rng);
    for k in (1..t).rev() {
        let next = indices[k];
        indices[k - 1] = match variant {
            Variant::Backward => {
                let p = sys.normalized_beta(model, theta, data, k, next, &mut ws)?;
                draw(p, rng)
            }
            Variant::Ancestral => sys.anc(k, next),
        };
    }
    Ok(SweepOutput {
        trajectory: sys.extract(&indices),
        indices,
    })
}
