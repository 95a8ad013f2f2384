//! The doubly randomized estimator: one draw of `(l, p)` and the matching
//! reweighted telescoping difference.

use super::msa::{coupled_msa_run, msa_run, SaConfig};
use super::schedule::LevelSchedule;
use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sde::DiffusionModel;

/// One single-estimator output.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    /// Reweighted difference; may lie outside Θ.
    pub theta_hat: Vec<f64>,
    pub level: u32,
    pub p: u32,
    /// Euler cells × particles × sweeps, both chains.
    pub cost: u64,
    pub seed: u64,
    pub projections: usize,
}

/// Iterates behind one estimate, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRun {
    pub record: EstimateRecord,
    /// Fine (or single-level) iterates `θ_0..θ_{N_p}`.
    pub fine: Vec<Vec<f64>>,
    /// Coarse iterates when `l` is above the base level.
    pub coarse: Option<Vec<Vec<f64>>>,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Run the branch for a given `(l, p)`. The base level is the smallest
/// level in the schedule's support and the base iteration index the
/// smallest `p`; `N_{p−1}` refers to the preceding support element.
#[allow(clippy::too_many_arguments)]
pub fn umsa_fixed<M: DiffusionModel>(
    model: &M,
    theta0: &[f64],
    schedule: &LevelSchedule,
    cfg: &SaConfig,
    data: &StateSpaceData,
    level: u32,
    p: u32,
    seed: u64,
) -> Result<FixedRun> {
    let weight = schedule.levels.prob(level) * schedule.iterations.prob(p);
    if !(weight > 0.0) {
        return Err(Error::precondition(format!("(l, p) = ({level}, {p}) outside the schedule support")));
    }
    let cfg = SaConfig {
        step: schedule.step.clone(),
        ..cfg.clone()
    };
    let mut rng = rng_from_seed(seed);
    let n_p = schedule.n_iters(p) as usize;
    let prev = schedule.iterations.previous(p).map(|q| schedule.n_iters(q) as usize);
    let scale = |v: Vec<f64>| v.into_iter().map(|x| x / weight).collect::<Vec<f64>>();

    if level == schedule.levels.min() {
        let run = msa_run(model, theta0, level, n_p, &cfg, data, &mut rng)?;
        let last = &run.iterates[n_p];
        let value = match prev {
            None => last.clone(),
            Some(m) => diff(last, &run.iterates[m]),
        };
        return Ok(FixedRun {
            record: EstimateRecord {
                theta_hat: scale(value),
                level,
                p,
                cost: run.cost,
                seed,
                projections: run.projections,
            },
            fine: run.iterates,
            coarse: None,
        });
    }

    let run = coupled_msa_run(model, theta0, level, n_p, &cfg, data, &mut rng)?;
    let top = diff(&run.fine[n_p], &run.coarse[n_p]);
    let value = match prev {
        None => top,
        Some(m) => diff(&top, &diff(&run.fine[m], &run.coarse[m])),
    };
    Ok(FixedRun {
        record: EstimateRecord {
            theta_hat: scale(value),
            level,
            p,
            cost: run.cost,
            seed,
            projections: run.projections,
        },
        fine: run.fine,
        coarse: Some(run.coarse),
    })
}

/// One unbiased estimator: sample `(l, p)` from the schedule and run the
/// matching branch. Everything is determined by `seed`.
pub fn umsa_single<M: DiffusionModel>(
    model: &M,
    theta0: &[f64],
    schedule: &LevelSchedule,
    cfg: &SaConfig,
    data: &StateSpaceData,
    seed: u64,
) -> Result<EstimateRecord> {
    let mut rng = rng_from_seed(seed);
    let level = schedule.levels.sample(&mut rng);
    let p = schedule.iterations.sample(&mut rng);
    let run_seed = rand::Rng::random(&mut rng);
    let mut rec = umsa_fixed(model, theta0, schedule, cfg, data, level, p, run_seed)?.record;
    rec.seed = seed;
    Ok(rec)
}
