//! Exact Kalman filtering and smoothing for the OU model with a known start.
//! Used as an oracle: it shares no code with the bridge machinery.

use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::models::ou::ou_aux_transition_params;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub loglik: f64,
    pub filtered_means: Vec<f64>,
    pub filtered_vars: Vec<f64>,
    pub smoothed_means: Vec<f64>,
    pub smoothed_vars: Vec<f64>,
}

fn check_theta(theta: &[f64]) -> Result<()> {
    if theta.len() != 3 || !(theta[0] < 0.0) || !(theta[1] > 0.0) || !(theta[2] > 0.0) {
        return Err(Error::Parameter(format!("OU parameters out of range: {theta:?}")));
    }
    Ok(())
}

/// Filter and RTS smoother for `X_{t_k} = F X_{t_{k−1}} + N(0, Q)`,
/// `Y_k = X_{t_k} + N(0, θ3²)`, `X_{t_0} = x0`.
pub fn kalman_smoother(theta: &[f64], x0: f64, data: &StateSpaceData) -> Result<KalmanOutput> {
    check_theta(theta)?;
    let r = theta[2] * theta[2];
    let n = data.times.len();
    let mut fm = Vec::with_capacity(n);
    let mut fv = Vec::with_capacity(n);
    let mut pm = vec![x0; n];
    let mut pv = vec![0.0; n];
    let mut gains = vec![0.0; n];
    let mut loglik = 0.0;
    let (mut m, mut p) = (x0, 0.0);
    for k in 0..n {
        if k > 0 {
            let (f, q) = ou_aux_transition_params(theta[0], theta[1], data.times[k] - data.times[k - 1])?;
            if !(q > 0.0) {
                return Err(Error::Parameter(format!("non-positive transition variance {q}")));
            }
            gains[k] = f;
            m *= f;
            p = f * f * p + q;
            pm[k] = m;
            pv[k] = p;
        }
        if let Some(y) = &data.y[k] {
            let s = p + r;
            let e = y[0] - m;
            loglik += -0.5 * (LN_2PI + s.ln() + e * e / s);
            let gain = p / s;
            m += gain * e;
            p *= 1.0 - gain;
        }
        fm.push(m);
        fv.push(p);
    }
    let mut sm = fm.clone();
    let mut sv = fv.clone();
    for k in (0..n - 1).rev() {
        let g = if pv[k + 1] > 0.0 { fv[k] * gains[k + 1] / pv[k + 1] } else { 0.0 };
        sm[k] = fm[k] + g * (sm[k + 1] - pm[k + 1]);
        sv[k] = fv[k] + g * g * (sv[k + 1] - pv[k + 1]);
    }
    Ok(KalmanOutput {
        loglik,
        filtered_means: fm,
        filtered_vars: fv,
        smoothed_means: sm,
        smoothed_vars: sv,
    })
}

pub fn kalman_loglik(theta: &[f64], x0: f64, data: &StateSpaceData) -> Result<f64> {
    Ok(kalman_smoother(theta, x0, data)?.loglik)
}

/// Log-likelihood and its gradient by central differences (step `1e-6`).
pub fn kalman_score_oracle(theta: &[f64], x0: f64, data: &StateSpaceData) -> Result<(f64, Vec<f64>)> {
    let ll = kalman_loglik(theta, x0, data)?;
    let h = 1e-6;
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let mut a = theta.to_vec();
        let mut b = theta.to_vec();
        a[i] += h;
        b[i] -= h;
        grad[i] = (kalman_loglik(&a, x0, data)? - kalman_loglik(&b, x0, data)?) / (2.0 * h);
    }
    Ok((ll, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
    pub iterations: usize,
}

/// Maximize the exact log-likelihood by gradient ascent with Armijo
/// backtracking, stopping once the score norm drops below `tol`.
pub fn kalman_ascent(
    theta0: &[f64],
    x0: f64,
    data: &StateSpaceData,
    tol: f64,
    max_iter: usize,
) -> Result<AscentResult> {
    let mut theta = theta0.to_vec();
    let (mut ll, mut g) = kalman_score_oracle(&theta, x0, data)?;
    let mut step: f64 = 1.0;
    for it in 0..max_iter {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= tol {
            return Ok(AscentResult { theta, loglik: ll, score_norm: norm, iterations: it });
        }
        step = (step * 2.0).min(1e3);
        loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t + step * d).collect();
            let ok = check_theta(&cand).is_ok();
            if ok {
                let cll = kalman_loglik(&cand, x0, data)?;
                if cll >= ll + 1e-4 * step * norm * norm {
                    theta = cand;
                    ll = cll;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-14 {
                return Err(Error::Sampling("Kalman ascent line search stalled".into()));
            }
        }
        g = kalman_score_oracle(&theta, x0, data)?.1;
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(AscentResult { theta, loglik: ll, score_norm: norm, iterations: max_iter })
}
