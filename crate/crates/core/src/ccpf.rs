//! Coupled conditional particle filter: a fine chain at level `l` and a
//! coarse chain at level `l − 1`, driven by shared randomness with every
//! index draw maximally coupled.

use rand::Rng;

use crate::coupling::{coarsen_values, coupled_initial_sample, coupled_transition_sample, MaxCoupling};
use crate::cpf::{ParticleSystem, Variant};
use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::sde::{fill_increments, BridgeWorkspace, DiffusionModel};
use crate::trajectory::CoupledTrajectory;

/// Running totals over maximal-coupling draws: the sum of overlap masses
/// (expected meets) against the number of draws with equal indices.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CouplingStats {
    pub draws: u64,
    pub expected_meets: f64,
    pub observed_meets: u64,
    /// `Σ p(1 − p)` over draws, for a binomial-style standard error.
    pub meet_variance: f64,
}

impl CouplingStats {
    fn record(&mut self, overlap: f64, met: bool) {
        self.draws += 1;
        self.expected_meets += overlap;
        self.meet_variance += overlap * (1.0 - overlap);
        self.observed_meets += met as u64;
    }

    pub fn merge(&mut self, other: &CouplingStats) {
        self.draws += other.draws;
        self.expected_meets += other.expected_meets;
        self.observed_meets += other.observed_meets;
        self.meet_variance += other.meet_variance;
    }
}

fn coupled_draw<R: Rng + ?Sized>(
    p: &[f64],
    q: &[f64],
    rng: &mut R,
    stats: &mut CouplingStats,
) -> (usize, usize) {
    let mc = MaxCoupling::new(p, q);
    let draw = mc.sample(rng);
    stats.record(mc.overlap(), draw.i == draw.j);
    (draw.i, draw.j)
}

/// One draw from the coupled kernel. `theta` drives the fine chain and
/// `theta_bar` the coarse one.
#[allow(clippy::too_many_arguments)]
pub fn ccpf_bs_sweep<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    theta_bar: &[f64],
    v: &CoupledTrajectory,
    data: &StateSpaceData,
    n: usize,
    rng: &mut R,
    variant: Variant,
) -> Result<CoupledTrajectory> {
    let mut stats = CouplingStats::default();
    ccpf_bs_sweep_stats(model, theta, theta_bar, v, data, n, rng, variant, &mut stats)
}

/// [`ccpf_bs_sweep`] that also accumulates coupling statistics.
#[allow(clippy::too_many_arguments)]
pub fn ccpf_bs_sweep_stats<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    theta_bar: &[f64],
    v: &CoupledTrajectory,
    data: &StateSpaceData,
    n: usize,
    rng: &mut R,
    variant: Variant,
    stats: &mut CouplingStats,
) -> Result<CoupledTrajectory> {
    if n < 2 {
        return Err(Error::precondition("the coupled particle filter needs N ≥ 2"));
    }
    let level = v.fine.level;
    if level == 0 || v.coarse.level + 1 != level {
        return Err(Error::precondition("coupled trajectory levels must be (l, l − 1) with l ≥ 1"));
    }
    v.fine.check(data)?;
    v.coarse.check(data)?;
    let d = model.state_dim();
    let t = data.n_intervals();
    let mut fine = ParticleSystem::new(n, d, data, level);
    let mut coarse = ParticleSystem::new(n, d, data, level - 1);
    fine.load_reference(&v.fine);
    coarse.load_reference(&v.coarse);
    let mut ws = BridgeWorkspace::new(d);
    let r = n - 1;
    let mut coarse_block = Vec::new();

    for i in 0..r {
        let (a, b) = coupled_initial_sample(model, theta, theta_bar, rng)?;
        fine.x_mut(0, i).copy_from_slice(&a);
        coarse.x_mut(0, i).copy_from_slice(&b);
    }
    for k in 1..=t {
        if k > 1 {
            let p = fine.normalized_alpha(k - 1)?.to_vec();
            let q = coarse.normalized_alpha(k - 1)?.to_vec();
            let mc = MaxCoupling::new(&p, &q);
            for i in 0..r {
                let draw = mc.sample(rng);
                stats.record(mc.overlap(), draw.i == draw.j);
                fine.set_anc(k - 1, i, draw.i);
                coarse.set_anc(k - 1, i, draw.j);
            }
        }
        let dt = data.segment(k, level).step();
        for i in 0..r {
            let (a, b) = coupled_transition_sample(
                model,
                theta,
                theta_bar,
                data.times[k - 1],
                data.times[k],
                fine.parent_state(k, i),
                coarse.parent_state(k, i),
                rng,
            )?;
            fine.x_mut(k, i).copy_from_slice(&a);
            coarse.x_mut(k, i).copy_from_slice(&b);
            fill_increments(fine.w_mut(k, i), dt, rng);
            coarsen_values(fine.w(k, i), d, &mut coarse_block);
            coarse.w_mut(k, i).copy_from_slice(&coarse_block);
        }
        fine.weigh(model, theta, data, k, &mut ws)?;
        coarse.weigh(model, theta_bar, data, k, &mut ws)?;
    }

    let mut jf = vec![0; t];
    let mut jc = vec![0; t];
    {
        let p = fine.normalized_alpha(t)?.to_vec();
        let q = coarse.normalized_alpha(t)?;
        (jf[t - 1], jc[t - 1]) = coupled_draw(&p, q, rng, stats);
    }
    for k in (1..t).rev() {
        let (nf, nc) = (jf[k], jc[k]);
        (jf[k - 1], jc[k - 1]) = match variant {
            Variant::Backward => {
                let p = fine.normalized_beta(model, theta, data, k, nf, &mut ws)?.to_vec();
                let q = coarse.normalized_beta(model, theta_bar, data, k, nc, &mut ws)?;
                coupled_draw(&p, q, rng, stats)
            }
            Variant::Ancestral => (fine.anc(k, nf), coarse.anc(k, nc)),
        };
    }
    Ok(CoupledTrajectory {
        fine: fine.extract(&jf),
        coarse: coarse.extract(&jc),
        meets: jf.iter().zip(&jc).map(|(a, b)| a == b).collect(),
    })
}
