//! The pluggable model contract.
//!
//! A model supplies the latent diffusion `dX = μ_θ(X)dt + σ_θ(X)dW`, an
//! auxiliary process with a tractable transition density used to guide
//! bridges, a proposal transition for the skeleton states, the observation
//! density and the initial law. States are `&[f64]` of length
//! [`DiffusionModel::state_dim`]; matrices are row-major `d × d`.

use rand::Rng;

use crate::error::Result;
use crate::params::{ParamSpace, ProjectionBox};

/// Endpoints of one bridge segment. Auxiliary processes may depend on both.
#[derive(Debug, Clone, Copy)]
pub struct BridgeEnds<'a> {
    pub s1: f64,
    pub s2: f64,
    pub x_start: &'a [f64],
    pub x_end: &'a [f64],
}

/// Auxiliary process on one segment `[s1, s2]`, already specialised to the
/// parameter value and segment endpoints it was built for.
pub trait AuxProcess {
    /// Auxiliary drift `μ̃(t, x)`.
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Auxiliary diffusion matrix `Σ̃(t, x)`. Must equal `Σ(x')` at `t = s2`.
    fn cov(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// `log f̃_{t,s2}(x_end | x)`.
    fn log_transition(&self, t: f64, x: &[f64], x_end: &[f64]) -> f64;

    /// Gradient (and optionally Hessian) of `log f̃_{t,s2}(x_end | x)` in `x`.
    fn score(&self, t: f64, x: &[f64], x_end: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>);
}

pub trait DiffusionModel: Sync {
    type Aux: AuxProcess;

    fn state_dim(&self) -> usize;

    fn param_space(&self) -> &ParamSpace;

    /// Default box for projecting stochastic-approximation iterates.
    fn default_projection(&self) -> ProjectionBox;

    fn drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Diffusion coefficient `σ_θ(x)`, `d × d`.
    fn diffusion(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// `Σ_θ(x) = σσᵀ`.
    fn diffusion_cov(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let d = self.state_dim();
        let mut s = vec![0.0; d * d];
        self.diffusion(theta, x, &mut s);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
            }
        }
    }

    /// Build the auxiliary process for one segment.
    fn aux(&self, theta: &[f64], ends: &BridgeEnds<'_>) -> Result<Self::Aux>;

    /// Whether a state lies in the model's state space. Bridges that leave it
    /// carry zero weight.
    fn state_in_domain(&self, _x: &[f64]) -> bool {
        true
    }

    /// `log f̄_{θ,s1,s2}(x_next | x)`.
    fn proposal_log_density(&self, theta: &[f64], s1: f64, s2: f64, x: &[f64], x_next: &[f64])
        -> f64;

    /// Draw from `f̄_{θ,s1,s2}(· | x)` by pushing standard draws from `rng`
    /// through a deterministic transform, so that two calls fed identical
    /// streams are common-random-number coupled.
    fn sample_proposal<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        s1: f64,
        s2: f64,
        x: &[f64],
        rng: &mut R,
        out: &mut [f64],
    ) -> Result<()>;

    /// Draw from `ν_θ`, with the same transform discipline as
    /// [`DiffusionModel::sample_proposal`].
    fn sample_initial<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R, out: &mut [f64])
        -> Result<()>;

    /// `∇_θ log ν_θ(x)`.
    fn initial_log_density_grad(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// `log g_θ(y | x)`.
    fn obs_log_density(&self, theta: &[f64], x: &[f64], y: &[f64]) -> f64;

    /// `∇_θ log g_θ(y | x)` when available in closed form. Returns false if
    /// not provided, in which case callers fall back to finite differences.
    fn obs_log_density_grad(&self, _theta: &[f64], _x: &[f64], _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}
