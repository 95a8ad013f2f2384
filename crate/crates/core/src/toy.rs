//! Test models whose dynamics ignore θ.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::models::ou::{ou_aux_transition_params, OuAux};
use crate::params::{Interval, ParamSpace, ProjectionBox};
use crate::sde::{BridgeEnds, DiffusionModel};

const REV: f64 = -0.5;
const SIGMA: f64 = 0.7;

/// `dX = −0.5X dt + 0.7 dW`, `X_0 = 0`, guided by an OU process with
/// reversion `aux_rev`. With `obs_param` the observation is
/// `N(x, θ²)`, otherwise `N(x, 1)` and nothing depends on θ.
#[derive(Debug, Clone)]
pub(crate) struct ToyModel {
    pub aux_rev: f64,
    pub obs_param: bool,
    /// Report the observation gradient analytically.
    pub analytic_obs: bool,
    space: ParamSpace,
}

impl ToyModel {
    pub fn new(aux_rev: f64, obs_param: bool) -> Self {
        Self {
            aux_rev,
            obs_param,
            analytic_obs: true,
            space: ParamSpace::new(&["a"], vec![Interval::POSITIVE]),
        }
    }

    fn obs_var(&self, theta: &[f64]) -> f64 {
        if self.obs_param {
            theta[0] * theta[0]
        } else {
            1.0
        }
    }
}

fn normal_lpdf(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v)
}

impl DiffusionModel for ToyModel {
    type Aux = OuAux;

    fn state_dim(&self) -> usize {
        1
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn default_projection(&self) -> ProjectionBox {
        ProjectionBox::new(vec![0.01], vec![100.0])
    }

    fn drift(&self, _theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = REV * x[0];
    }

    fn diffusion(&self, _theta: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = SIGMA;
    }

    fn aux(&self, _theta: &[f64], ends: &BridgeEnds<'_>) -> Result<OuAux> {
        Ok(OuAux::new(self.aux_rev, SIGMA, ends.s2))
    }

    fn proposal_log_density(&self, _theta: &[f64], s1: f64, s2: f64, x: &[f64], x_next: &[f64]) -> f64 {
        let (f, v) = ou_aux_transition_params(self.aux_rev, SIGMA, s2 - s1).unwrap();
        normal_lpdf(x_next[0], f * x[0], v)
    }

    fn sample_proposal<R: Rng + ?Sized>(
        &self,
        _theta: &[f64],
        s1: f64,
        s2: f64,
        x: &[f64],
        rng: &mut R,
        out: &mut [f64],
    ) -> Result<()> {
        let (f, v) = ou_aux_transition_params(self.aux_rev, SIGMA, s2 - s1)?;
        let z: f64 = rng.sample(StandardNormal);
        out[0] = f * x[0] + v.sqrt() * z;
        Ok(())
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _theta: &[f64], _rng: &mut R, out: &mut [f64]) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }

    fn initial_log_density_grad(&self, _theta: &[f64], _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn obs_log_density(&self, theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
        normal_lpdf(y[0], x[0], self.obs_var(theta))
    }

    fn obs_log_density_grad(&self, theta: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        if !self.analytic_obs {
            return false;
        }
        out[0] = if self.obs_param {
            let a = theta[0];
            -1.0 / a + (y[0] - x[0]).powi(2) / (a * a * a)
        } else {
            0.0
        };
        true
    }
}

/// Unit-gap data with the given observations.
pub(crate) fn unit_data(ys: &[f64]) -> crate::data::StateSpaceData {
    let obs = crate::data::ObservationSet::new(
        (1..=ys.len()).map(|k| k as f64).collect(),
        ys.iter().map(|&y| vec![y]).collect(),
    )
    .unwrap();
    crate::data::StateSpaceData::from_observations(0.0, &obs).unwrap()
}
