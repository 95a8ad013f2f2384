//! Unbiased static-parameter estimation for partially observed diffusions.
//!
//! The latent path between observation times is reparameterized by guided
//! diffusion bridges driven by Wiener increments, so the smoothing state
//! lives on a fixed space at every discretization level. A conditional
//! particle filter with backward sampling targets the smoother, a coupled
//! version links adjacent levels, and Markovian stochastic approximation on
//! top of those kernels is debiased by randomizing both the level and the
//! iteration count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccpf;
pub mod coupling;
pub mod cpf;
pub mod data;
pub mod error;
pub mod models;
pub mod params;
pub mod rng;
pub mod sa;
pub mod sde;
#[cfg(test)]
pub(crate) mod toy;
pub mod trajectory;
pub mod weights;

pub use error::{Error, Result};
pub use params::{Interval, ParamSpace, ProjectionBox};
pub use rng::{replicate_seed, rng_from_seed, SimRng};
pub use ccpf::{ccpf_bs_sweep, ccpf_bs_sweep_stats, CouplingStats};
pub use coupling::{
    coarsen_increments, coupled_initial_sample, coupled_transition_sample, maximal_coupling_sample,
    CategoricalPair, CoupledIndexDraw, MaxCoupling,
};
pub use cpf::{backward_log_weight, cpf_bs_sweep, cpf_bs_sweep_traced, forward_log_weight, SweepOutput, Variant};
pub use data::{load_observations, ObservationSet, PayloadKind, StateSpaceData};
pub use sa::{
    build_schedule, coupled_msa_run, estimate_mse, h_l, msa_run, pool_estimates, umsa_fixed,
    umsa_single, EstimateRecord, LevelSchedule, SaConfig, ScheduleKind, ScheduleOverrides, StepSize,
};
pub use sde::{
    euler_bridge_path, guided_drift, l_integrand, log_radon_nikodym, DiffusionModel, LatticePath,
    SegmentSpec, WienerIncrements,
};
pub use trajectory::{coupled_initial_trajectory, initial_trajectory, CoupledTrajectory, Trajectory};
