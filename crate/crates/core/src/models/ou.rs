//! Ornstein–Uhlenbeck latent process with Gaussian observations.
//!
//! `dX = θ1 X dt + θ2 dW`, `Y_k ~ N(X_{t_k}, θ3²)`, `X_0 = x0`. Bridges are
//! guided by an OU auxiliary process `dX̃ = θ̃1 X̃ dt + θ2 dW`, whose exact
//! transition also serves as the skeleton proposal.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{ObservationSet, StateSpaceData};
use crate::error::{Error, Result};
use crate::params::{Interval, ParamSpace, ProjectionBox};
use crate::sde::{AuxProcess, BridgeEnds, DiffusionModel};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean factor and variance `(F, V)` of the OU transition over `gap`:
/// `F = e^{rev·gap}`, `V = σ²(e^{2·rev·gap} − 1)/(2·rev)`, with the Brownian
/// limit `σ²·gap` at `rev = 0`.
pub fn ou_aux_transition_params(rev: f64, sigma: f64, gap: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma.is_finite()) || !rev.is_finite() {
        return Err(Error::Parameter(format!("OU transition needs σ > 0, got {sigma}")));
    }
    if !(gap > 0.0) {
        return Err(Error::Parameter(format!("OU transition needs gap > 0, got {gap}")));
    }
    let f = (rev * gap).exp();
    let v = if rev == 0.0 {
        sigma * sigma * gap
    } else {
        sigma * sigma * (2.0 * rev * gap).exp_m1() / (2.0 * rev)
    };
    Ok((f, v))
}

fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + var.ln() + r * r / var)
}

/// Auxiliary OU process on one segment, ending at `s2`.
#[derive(Debug, Clone, Copy)]
pub struct OuAux {
    rev: f64,
    sigma: f64,
    s2: f64,
}

impl OuAux {
    #[cfg(test)]
    pub(crate) fn new(rev: f64, sigma: f64, s2: f64) -> Self {
        Self { rev, sigma, s2 }
    }

    fn moments(&self, t: f64) -> (f64, f64) {
        let tau = self.s2 - t;
        let f = (self.rev * tau).exp();
        let v = if self.rev == 0.0 {
            self.sigma * self.sigma * tau
        } else {
            self.sigma * self.sigma * (2.0 * self.rev * tau).exp_m1() / (2.0 * self.rev)
        };
        (f, v)
    }
}

impl AuxProcess for OuAux {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.rev * x[0];
    }

    fn cov(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * self.sigma;
    }

    fn log_transition(&self, t: f64, x: &[f64], x_end: &[f64]) -> f64 {
        let (f, v) = self.moments(t);
        normal_log_density(x_end[0], f * x[0], v)
    }

    fn score(&self, t: f64, x: &[f64], x_end: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>) {
        let (f, v) = self.moments(t);
        grad[0] = f * (x_end[0] - f * x[0]) / v;
        if let Some(h) = hess {
            h[0] = -f * f / v;
        }
    }
}

/// The OU state-space model. `θ = (θ1 < 0, θ2 > 0, θ3 > 0)`.
#[derive(Debug, Clone)]
pub struct OuModel {
    pub x0: f64,
    /// Auxiliary reversion rate `θ̃1`. `None` ties it to `θ1`, which makes
    /// the auxiliary process the true one and every bridge weight trivial.
    pub aux_reversion: Option<f64>,
    space: ParamSpace,
    projection: ProjectionBox,
}

impl OuModel {
    pub fn new(x0: f64, aux_reversion: Option<f64>) -> Self {
        Self {
            x0,
            aux_reversion,
            space: ParamSpace::new(
                &["theta1", "theta2", "theta3"],
                vec![Interval::NEGATIVE, Interval::POSITIVE, Interval::POSITIVE],
            ),
            projection: ProjectionBox::new(vec![-5.0, 0.05, 0.05], vec![-0.01, 5.0, 5.0]),
        }
    }

    /// Auxiliary process equal to the latent process.
    pub fn exact_aux(x0: f64) -> Self {
        Self::new(x0, None)
    }

    fn aux_rev(&self, theta: &[f64]) -> f64 {
        self.aux_reversion.unwrap_or(theta[0])
    }

    /// Simulate latent states at `times` (starting from `x0` at `times[0]`)
    /// with the exact transition, and Gaussian observations at `times[1..]`.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        times: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, ObservationSet)> {
        self.space.check(theta)?;
        let mut states = vec![self.x0];
        let mut values = Vec::with_capacity(times.len().saturating_sub(1));
        for w in times.windows(2) {
            let (f, v) = ou_aux_transition_params(theta[0], theta[1], w[1] - w[0])?;
            let z: f64 = rng.sample(StandardNormal);
            let x = f * states.last().unwrap() + v.sqrt() * z;
            let e: f64 = rng.sample(StandardNormal);
            states.push(x);
            values.push(vec![x + theta[2] * e]);
        }
        let obs = ObservationSet::new(times[1..].to_vec(), values)?;
        Ok((states, obs))
    }

    /// Layout with the latent start at `t0` and no observation there.
    pub fn data(t0: f64, obs: &ObservationSet) -> Result<StateSpaceData> {
        StateSpaceData::from_observations(t0, obs)
    }
}

impl DiffusionModel for OuModel {
    type Aux = OuAux;

    fn state_dim(&self) -> usize {
        1
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn default_projection(&self) -> ProjectionBox {
        self.projection.clone()
    }

    fn drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * x[0];
    }

    fn diffusion(&self, theta: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = theta[1];
    }

    fn diffusion_cov(&self, theta: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = theta[1] * theta[1];
    }

    fn aux(&self, theta: &[f64], ends: &BridgeEnds<'_>) -> Result<OuAux> {
        if !(theta[1] > 0.0) {
            return Err(Error::Parameter(format!("θ2 = {} must be positive", theta[1])));
        }
        Ok(OuAux {
            rev: self.aux_rev(theta),
            sigma: theta[1],
            s2: ends.s2,
        })
    }

    fn proposal_log_density(&self, theta: &[f64], s1: f64, s2: f64, x: &[f64], x_next: &[f64]) -> f64 {
        match ou_aux_transition_params(self.aux_rev(theta), theta[1], s2 - s1) {
            Ok((f, v)) => normal_log_density(x_next[0], f * x[0], v),
            Err(_) => f64::NAN,
        }
    }

    fn sample_proposal<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        s1: f64,
        s2: f64,
        x: &[f64],
        rng: &mut R,
        out: &mut [f64],
    ) -> Result<()> {
        let (f, v) = ou_aux_transition_params(self.aux_rev(theta), theta[1], s2 - s1)
            .map_err(|e| Error::Sampling(e.to_string()))?;
        let z: f64 = rng.sample(StandardNormal);
        out[0] = f * x[0] + v.sqrt() * z;
        if !out[0].is_finite() {
            return Err(Error::Sampling("non-finite OU proposal".into()));
        }
        Ok(())
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _theta: &[f64], _rng: &mut R, out: &mut [f64]) -> Result<()> {
        out[0] = self.x0;
        Ok(())
    }

    fn initial_log_density_grad(&self, _theta: &[f64], _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn obs_log_density(&self, theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
        normal_log_density(y[0], x[0], theta[2] * theta[2])
    }

    fn obs_log_density_grad(&self, theta: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        let s = theta[2];
        let r = y[0] - x[0];
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = -1.0 / s + r * r / (s * s * s);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_moments_reference_values() {
        let (f, v) = ou_aux_transition_params(-0.1, 0.8, 1.0).unwrap();
        assert!((f - 0.904_837_418_035_959_6).abs() < 1e-15);
        // (0.64 / -0.2)(e^{-0.2} - 1)
        let direct = 0.64 / -0.2 * ((-0.2f64).exp() - 1.0);
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.580_062).abs() < 1e-6);
    }

    #[test]
    fn transition_limits() {
        let (f, v) = ou_aux_transition_params(-0.1, 0.8, 1e-12).unwrap();
        assert!((f - 1.0).abs() < 1e-12 && v < 1e-11);
        let (_, v) = ou_aux_transition_params(-1e-7, 0.8, 0.1).unwrap();
        assert!((v - 0.64 * 0.1).abs() < 1e-8);
        // first-order term of the series: σ²·rev·gap²
        let (_, v) = ou_aux_transition_params(-1e-7, 0.8, 1.0).unwrap();
        assert!((v - 0.64 - 0.64 * -1e-7).abs() < 1e-13);
        let (f, v) = ou_aux_transition_params(0.0, 0.8, 2.0).unwrap();
        assert_eq!(f, 1.0);
        assert!((v - 1.28).abs() < 1e-15);
        assert!(ou_aux_transition_params(-0.1, 0.8, 0.0).is_err());
    }

    #[test]
    fn score_and_hessian_match_finite_differences() {
        let aux = OuAux { rev: -0.1, sigma: 0.8, s2: 1.0 };
        let (t, x, xe) = (0.3, 0.4, 1.2);
        let mut g = [0.0];
        let mut h = [0.0];
        aux.score(t, &[x], &[xe], &mut g, Some(&mut h));
        let e = 1e-5;
        let lp = |x: f64| aux.log_transition(t, &[x], &[xe]);
        let fd = (lp(x + e) - lp(x - e)) / (2.0 * e);
        let fd2 = (lp(x + e) - 2.0 * lp(x) + lp(x - e)) / (e * e);
        assert!((g[0] - fd).abs() < 1e-8);
        assert!((h[0] - fd2).abs() < 1e-4);
    }

    #[test]
    fn observation_gradient() {
        let m = OuModel::exact_aux(0.0);
        let th = [-0.3, 0.8, 0.55];
        let mut g = [9.0; 3];
        assert!(m.obs_log_density_grad(&th, &[0.2], &[1.0], &mut g));
        let e = 1e-6;
        let fd = (m.obs_log_density(&[-0.3, 0.8, 0.55 + e], &[0.2], &[1.0])
            - m.obs_log_density(&[-0.3, 0.8, 0.55 - e], &[0.2], &[1.0]))
            / (2.0 * e);
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert!((g[2] - fd).abs() < 1e-7);
    }
}
