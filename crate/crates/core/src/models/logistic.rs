//! Logistic diffusion with negative-binomial count observations.
//!
//! `dX = (θ3²/2 + θ1 − θ2 X) X dt + θ3 X dW` on `X > 0`, two conditionally
//! independent counts `Y^1, Y^2 ~ NB(mean X, size θ4)` per observation time,
//! and a Gamma initial law. Bridges are guided by the linear auxiliary
//! `dX̃ = v(t) X̃ dt + θ3 X̃ dW` whose per-capita rate `v(t) = ζt + η`
//! interpolates the true per-capita drift between the segment endpoints.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use statrs::function::gamma::{digamma, ln_gamma};

use super::special::{gamma_log_density, gamma_quantile};
use crate::data::{ObservationSet, StateSpaceData};
use crate::error::{Error, Result};
use crate::params::{Interval, ParamSpace, ProjectionBox};
use crate::sde::{simulate_unconditioned, AuxProcess, BridgeEnds, DiffusionModel, SegmentSpec};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-capita drift `b(x)/x = θ3²/2 + θ1 − θ2 x`.
fn per_capita(theta: &[f64], x: f64) -> f64 {
    theta[2] * theta[2] / 2.0 + theta[0] - theta[1] * x
}

/// Coefficients `(ζ, η)` of `v(t) = ζt + η` with `v(s1)x1 = b(x1)` and
/// `v(s2)x2 = b(x2)`.
pub fn logistic_aux_coeffs(theta: &[f64], s1: f64, x1: f64, s2: f64, x2: f64) -> Result<(f64, f64)> {
    if !(x1 > 0.0 && x2 > 0.0) {
        return Err(Error::Domain {
            t: s1,
            s1,
            s2,
            what: format!("auxiliary endpoints must be positive, got ({x1}, {x2})"),
        });
    }
    if !(s1 < s2) {
        return Err(Error::precondition("auxiliary segment needs s1 < s2"));
    }
    let c1 = per_capita(theta, x1);
    let c2 = per_capita(theta, x2);
    let zeta = (c1 - c2) / (s1 - s2);
    let eta = (c1 * s2 - c2 * s1) / (s2 - s1);
    Ok((zeta, eta))
}

/// Mean and variance of `log X̃_{s2}` given `X̃_t = x`.
fn lognormal_moments(theta3: f64, zeta: f64, eta: f64, t: f64, x: f64, s2: f64) -> (f64, f64) {
    let half = theta3 * theta3 / 2.0;
    let mu = x.ln() + zeta * (s2 * s2 - t * t) / 2.0 + (eta - half) * (s2 - t);
    (mu, theta3 * theta3 * (s2 - t))
}

/// `(log f̃, ∂_x log f̃, ∂²_x log f̃)` for the lognormal auxiliary transition
/// from `x` at `t` to `x_end` at `s2`.
pub fn lognormal_aux_logdensity(
    theta: &[f64],
    coeffs: (f64, f64),
    t: f64,
    x: f64,
    s2: f64,
    x_end: f64,
) -> Result<(f64, f64, f64)> {
    if !(t < s2) {
        return Err(Error::Domain {
            t,
            s1: t,
            s2,
            what: "lognormal auxiliary has zero variance at t = s2".into(),
        });
    }
    if !(x > 0.0 && x_end > 0.0) {
        return Err(Error::Domain {
            t,
            s1: t,
            s2,
            what: format!("lognormal auxiliary needs positive states, got ({x}, {x_end})"),
        });
    }
    let (mu, var) = lognormal_moments(theta[2], coeffs.0, coeffs.1, t, x, s2);
    let r = x_end.ln() - mu;
    let logpdf = -x_end.ln() - 0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var);
    let grad = r / (x * var);
    let hess = -(1.0 + r) / (x * x * var);
    Ok((logpdf, grad, hess))
}

/// `log NB(y; mean x, size r)`.
pub fn nb_log_density(r: f64, x: f64, y: f64) -> f64 {
    if !(x > 0.0) {
        return if x == 0.0 && y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) - r * (x / r).ln_1p()
        + y * (x.ln() - (x + r).ln())
}

/// `∂_r log NB(y; mean x, size r)`.
pub fn nb_log_density_grad_size(r: f64, x: f64, y: f64) -> f64 {
    digamma(y + r) - digamma(r) - (x / r).ln_1p() + (x - y) / (x + r)
}

/// `log f̄`: `log X' ~ N(log x, θ3²·gap)`, the exact transition of
/// `dX = (θ3²/2) X dt + θ3 X dW`.
pub fn gbm_log_density(theta3: f64, gap: f64, x: f64, x_next: f64) -> f64 {
    if !(x > 0.0 && x_next > 0.0) {
        return f64::NEG_INFINITY;
    }
    let var = theta3 * theta3 * gap;
    let r = x_next.ln() - x.ln();
    -x_next.ln() - 0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var)
}

/// Push a standard normal draw through the GBM transition.
pub fn gbm_transform(theta3: f64, gap: f64, x: f64, z: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            t: 0.0,
            s1: 0.0,
            s2: gap,
            what: format!("GBM proposal from non-positive state {x}"),
        });
    }
    Ok(x * (theta3 * gap.sqrt() * z).exp())
}

/// Which Gamma parameters the initial law uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaConvention {
    /// `α = θ1/(2θ3²)`, `λ = θ2/(2θ3²)`.
    #[default]
    Displayed,
    /// The stationary law of the SDE: `α = 2θ1/θ3²`, `λ = 2θ2/θ3²`.
    Stationary,
}

impl GammaConvention {
    /// Shape and rate of the initial law.
    pub fn shape_rate(self, theta: &[f64]) -> (f64, f64) {
        let s2 = theta[2] * theta[2];
        match self {
            GammaConvention::Displayed => (theta[0] / (2.0 * s2), theta[1] / (2.0 * s2)),
            GammaConvention::Stationary => (2.0 * theta[0] / s2, 2.0 * theta[1] / s2),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticAux {
    theta3: f64,
    zeta: f64,
    eta: f64,
    s2: f64,
}

impl AuxProcess for LogisticAux {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = (self.zeta * t + self.eta) * x[0];
    }

    fn cov(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.theta3 * self.theta3 * x[0] * x[0];
    }

    fn log_transition(&self, t: f64, x: &[f64], x_end: &[f64]) -> f64 {
        if !(x[0] > 0.0 && x_end[0] > 0.0) {
            return f64::NAN;
        }
        let (mu, var) = lognormal_moments(self.theta3, self.zeta, self.eta, t, x[0], self.s2);
        let r = x_end[0].ln() - mu;
        -x_end[0].ln() - 0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var)
    }

    fn score(&self, t: f64, x: &[f64], x_end: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>) {
        let (mu, var) = lognormal_moments(self.theta3, self.zeta, self.eta, t, x[0], self.s2);
        let r = x_end[0].ln() - mu;
        grad[0] = r / (x[0] * var);
        if let Some(h) = hess {
            h[0] = -(1.0 + r) / (x[0] * x[0] * var);
        }
    }
}

/// Logistic diffusion state-space model, `θ = (θ1, θ2, θ3, θ4)`, all positive.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub convention: GammaConvention,
    space: ParamSpace,
    projection: ProjectionBox,
}

impl Default for LogisticModel {
    fn default() -> Self {
        Self::new(GammaConvention::default())
    }
}

impl LogisticModel {
    pub fn new(convention: GammaConvention) -> Self {
        Self {
            convention,
            space: ParamSpace::new(
                &["theta1", "theta2", "theta3", "theta4"],
                vec![Interval::POSITIVE; 4],
            ),
            projection: ProjectionBox::new(vec![1e-3, 1e-7, 0.05, 0.1], vec![50.0, 1.0, 5.0, 1e4]),
        }
    }

    /// Simulate a latent path and two count series at `times`. The latent
    /// state starts from the initial law at `times[0]` and is advanced by
    /// Euler steps at `level` between observation times.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        times: &[f64],
        level: u32,
        rng: &mut R,
    ) -> Result<(Vec<f64>, ObservationSet)> {
        self.space.check(theta)?;
        let mut x = [0.0];
        self.sample_initial(theta, rng, &mut x)?;
        let mut states = vec![x[0]];
        let mut values = vec![self.sample_counts(theta[3], x[0], rng)?];
        for w in times.windows(2) {
            let seg = SegmentSpec::at_level(w[0], w[1], level)?;
            let path = simulate_unconditioned(self, theta, &seg, &x, 100, rng)?;
            x[0] = path.last()[0];
            states.push(x[0]);
            values.push(self.sample_counts(theta[3], x[0], rng)?);
        }
        Ok((states, ObservationSet::new(times.to_vec(), values)?))
    }

    fn sample_counts<R: Rng + ?Sized>(&self, size: f64, x: f64, rng: &mut R) -> Result<Vec<f64>> {
        let gamma = Gamma::new(size, x / size).map_err(|e| Error::Sampling(e.to_string()))?;
        (0..2)
            .map(|_| {
                let lam: f64 = gamma.sample(rng);
                if lam <= 0.0 {
                    return Ok(0.0);
                }
                let pois = Poisson::new(lam).map_err(|e| Error::Sampling(e.to_string()))?;
                Ok(pois.sample(rng))
            })
            .collect()
    }

    /// Layout with the first observation attached to the initial state.
    pub fn data(obs: &ObservationSet) -> Result<StateSpaceData> {
        StateSpaceData::from_observations(obs.times[0], obs)
    }
}

impl DiffusionModel for LogisticModel {
    type Aux = LogisticAux;

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
        out[0] = per_capita(theta, x[0]) * x[0];
    }

    fn diffusion(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[2] * x[0];
    }

    fn diffusion_cov(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[2] * theta[2] * x[0] * x[0];
    }

    fn aux(&self, theta: &[f64], ends: &BridgeEnds<'_>) -> Result<LogisticAux> {
        let (zeta, eta) = logistic_aux_coeffs(theta, ends.s1, ends.x_start[0], ends.s2, ends.x_end[0])?;
        Ok(LogisticAux {
            theta3: theta[2],
            zeta,
            eta,
            s2: ends.s2,
        })
    }

    fn state_in_domain(&self, x: &[f64]) -> bool {
        x[0] > 0.0
    }

    fn proposal_log_density(&self, theta: &[f64], s1: f64, s2: f64, x: &[f64], x_next: &[f64]) -> f64 {
        gbm_log_density(theta[2], s2 - s1, x[0], x_next[0])
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
        let z: f64 = rng.sample(StandardNormal);
        out[0] = gbm_transform(theta[2], s2 - s1, x[0], z)?;
        if !(out[0] > 0.0 && out[0].is_finite()) {
            return Err(Error::Sampling(format!("GBM proposal produced {}", out[0])));
        }
        Ok(())
    }

    fn sample_initial<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R, out: &mut [f64]) -> Result<()> {
        let (shape, rate) = self.convention.shape_rate(theta);
        // open interval (0, 1)
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        out[0] = gamma_quantile(shape, rate, u)?;
        if !(out[0] > 0.0) {
            return Err(Error::Sampling(format!("Gamma draw {} is not positive", out[0])));
        }
        Ok(())
    }

    fn initial_log_density_grad(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let (a, l) = self.convention.shape_rate(theta);
        let da = l.ln() - digamma(a) + x[0].ln();
        let dl = a / l - x[0];
        // α ∝ θ1/θ3², λ ∝ θ2/θ3² under both conventions
        out[0] = da * a / theta[0];
        out[1] = dl * l / theta[1];
        out[2] = -2.0 * (da * a + dl * l) / theta[2];
        out[3] = 0.0;
    }

    fn obs_log_density(&self, theta: &[f64], x: &[f64], y: &[f64]) -> f64 {
        y.iter().map(|&c| nb_log_density(theta[3], x[0], c)).sum()
    }

    fn obs_log_density_grad(&self, theta: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        out[..3].fill(0.0);
        out[3] = y.iter().map(|&c| nb_log_density_grad_size(theta[3], x[0], c)).sum();
        true
    }
}

impl LogisticModel {
    /// `log ν_θ(x)`.
    pub fn initial_log_density(&self, theta: &[f64], x: f64) -> f64 {
        let (a, l) = self.convention.shape_rate(theta);
        gamma_log_density(a, l, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    const TH: [f64; 4] = [2.397, 4.429e-3, 0.84, 17.631];

    #[test]
    fn endpoint_identities() {
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let s1: f64 = rng.random_range(0.0..5.0);
            let s2 = s1 + rng.random_range(0.1..3.0);
            let x1: f64 = rng.random_range(1.0..900.0);
            let x2: f64 = rng.random_range(1.0..900.0);
            let (z, e) = logistic_aux_coeffs(&TH, s1, x1, s2, x2).unwrap();
            let b = |x: f64| per_capita(&TH, x) * x;
            assert!(((z * s1 + e) * x1 - b(x1)).abs() <= 1e-10 * b(x1).abs().max(1.0));
            assert!(((z * s2 + e) * x2 - b(x2)).abs() <= 1e-10 * b(x2).abs().max(1.0));
        }
    }

    #[test]
    fn equal_per_capita_drift_gives_constant_rate() {
        let (z, e) = logistic_aux_coeffs(&TH, 0.0, 10.0, 1.0, 10.0).unwrap();
        assert_eq!(z, 0.0);
        assert!((e - per_capita(&TH, 10.0)).abs() < 1e-12);
    }

    #[test]
    fn doubling_gap_halves_zeta() {
        let (z1, _) = logistic_aux_coeffs(&TH, 0.0, 10.0, 1.0, 300.0).unwrap();
        let (z2, _) = logistic_aux_coeffs(&TH, 0.0, 10.0, 2.0, 300.0).unwrap();
        assert!((z1 - 2.0 * z2).abs() < 1e-14);
        assert!(logistic_aux_coeffs(&TH, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn driftless_lognormal_case() {
        let th = [1.0, 0.1, 0.5, 1.0];
        let (lp, _, _) = lognormal_aux_logdensity(&th, (0.0, 0.125), 0.0, 2.0, 1.0, 3.0).unwrap();
        let var = 0.25;
        let r = 3f64.ln() - 2f64.ln();
        let direct = -3f64.ln() - 0.5 * (2.0 * std::f64::consts::PI * var).ln() - r * r / (2.0 * var);
        assert!((lp - direct).abs() < 1e-14);
        assert!(lognormal_aux_logdensity(&th, (0.0, 0.1), 1.0, 2.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn nb_special_cases() {
        assert!((nb_log_density(3.0, 2.0, 0.0) - 3.0 * (3.0f64 / 5.0).ln()).abs() < 1e-14);
        let x: f64 = 7.0;
        for y in [5.0, 7.0, 9.0] {
            let pois = y * x.ln() - x - ln_gamma(y + 1.0);
            let nb = nb_log_density(1e6, x, y);
            assert!(((nb - pois) / pois).abs() < 1e-3);
        }
    }

    #[test]
    fn nb_size_gradient_matches_fd() {
        for &(r, x, y) in &[(17.6, 400.0, 350.0), (0.7, 3.0, 0.0), (5.0, 1.5, 12.0)] {
            let e = 1e-6 * r;
            let fd = (nb_log_density(r + e, x, y) - nb_log_density(r - e, x, y)) / (2.0 * e);
            let g = nb_log_density_grad_size(r, x, y);
            assert!((g - fd).abs() < 1e-6 * g.abs().max(1.0), "{g} {fd}");
        }
    }

    #[test]
    fn initial_gradient_matches_fd() {
        for conv in [GammaConvention::Displayed, GammaConvention::Stationary] {
            let m = LogisticModel::new(conv);
            let x = [420.0];
            let mut g = [0.0; 4];
            m.initial_log_density_grad(&TH, &x, &mut g);
            for i in 0..3 {
                let e = 1e-6 * TH[i];
                let mut p = TH;
                let mut q = TH;
                p[i] += e;
                q[i] -= e;
                let fd = (m.initial_log_density(&p, x[0]) - m.initial_log_density(&q, x[0])) / (2.0 * e);
                assert!((g[i] - fd).abs() < 1e-5 * fd.abs().max(1.0), "{conv:?} {i}: {} {fd}", g[i]);
            }
            assert_eq!(g[3], 0.0);
        }
    }

    #[test]
    fn stationary_convention_is_the_stationary_gamma() {
        let (a, l) = GammaConvention::Stationary.shape_rate(&TH);
        let s2 = TH[2] * TH[2];
        assert_eq!((a, l), (2.0 * TH[0] / s2, 2.0 * TH[1] / s2));
        let (a, l) = GammaConvention::Displayed.shape_rate(&TH);
        assert_eq!((a, l), (TH[0] / (2.0 * s2), TH[1] / (2.0 * s2)));
    }

    #[test]
    fn aux_matches_true_drift_at_start() {
        let m = LogisticModel::default();
        let (xs, xe) = ([300.0], [520.0]);
        let ends = BridgeEnds { s1: 1.0, s2: 2.5, x_start: &xs, x_end: &xe };
        let aux = m.aux(&TH, &ends).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        aux.drift(1.0, &xs, &mut a);
        m.drift(&TH, &xs, &mut b);
        assert!((a[0] - b[0]).abs() < 1e-10 * b[0].abs());
        let mut c1 = [0.0];
        let mut c2 = [0.0];
        aux.cov(2.5, &xe, &mut c1);
        m.diffusion_cov(&TH, &xe, &mut c2);
        assert_eq!(c1, c2);
    }
}
