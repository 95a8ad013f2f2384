//! Stochastic approximation on top of the particle kernels.

pub mod msa;
pub mod pool;
pub mod schedule;
pub mod score;
pub mod umsa;

pub use msa::{coupled_msa_run, msa_run, CoupledMsaRun, MsaRun, SaConfig, StepSize};
pub use pool::{estimate_mse, pool_estimates, MseEstimate, PooledSummary};
pub use schedule::{build_schedule, LevelSchedule, LogBase, Pmf, ScheduleKind, ScheduleOverrides};
pub use score::h_l;
pub use umsa::{umsa_fixed, umsa_single, EstimateRecord, FixedRun};
