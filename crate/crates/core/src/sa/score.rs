//! The score summand `H_l(θ, z)`.

use crate::data::StateSpaceData;
use crate::error::{Error, Result};
use crate::sde::{bridge_path_term, BridgeWorkspace, DiffusionModel};
use crate::trajectory::Trajectory;

/// Step for a central difference in coordinate `i`: `h` if `θ ± h·e_i`
/// stays in Θ, otherwise one retry at `min(h/2, margin/2)`.
fn fd_step_for<M: DiffusionModel>(model: &M, theta: &[f64], i: usize, h: f64) -> Result<f64> {
    let bound = model.param_space().bounds[i];
    let fits = |h: f64| bound.contains(theta[i] + h) && bound.contains(theta[i] - h);
    if fits(h) {
        return Ok(h);
    }
    let shrunk = (h / 2.0).min(0.5 * bound.margin(theta[i]));
    if shrunk > 0.0 && fits(shrunk) {
        return Ok(shrunk);
    }
    Err(Error::Parameter(format!(
        "finite-difference perturbation of {} = {} leaves the parameter set",
        model.param_space().names[i],
        theta[i]
    )))
}

fn leaves_domain(e: &Error) -> bool {
    matches!(e, Error::DomainExit { .. } | Error::Overflow { .. })
}

/// Gradient of `Σ_k log{R^l f̄}` with states and increments held fixed. The
/// proposal density cancels, leaving `Σ_k (Σ_j L Δ + log f̃)`. Each interval
/// is differenced separately; when one perturbed bridge leaves the state
/// domain that interval falls back to a one-sided difference.
fn path_gradient<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    z: &Trajectory,
    data: &StateSpaceData,
    h: f64,
    out: &mut [f64],
) -> Result<()> {
    let steps = (0..theta.len())
        .map(|i| fd_step_for(model, theta, i, h))
        .collect::<Result<Vec<_>>>()?;
    let mut ws = BridgeWorkspace::new(model.state_dim());
    let mut probe = theta.to_vec();
    out.fill(0.0);
    for k in 1..=data.n_intervals() {
        let seg = data.segment(k, z.level);
        let (x0, x1, w) = (z.state(k - 1), z.state(k), z.block(k));
        let mut center = None;
        for (i, &hi) in steps.iter().enumerate() {
            probe[i] = theta[i] + hi;
            let up = bridge_path_term(model, &probe, &seg, x0, x1, w, &mut ws);
            probe[i] = theta[i] - hi;
            let down = bridge_path_term(model, &probe, &seg, x0, x1, w, &mut ws);
            probe[i] = theta[i];
            let mut mid = || -> Result<f64> {
                if center.is_none() {
                    center = Some(bridge_path_term(model, theta, &seg, x0, x1, w, &mut ws)?);
                }
                Ok(center.unwrap())
            };
            out[i] += match (up, down) {
                (Ok(u), Ok(d)) => (u - d) / (2.0 * hi),
                (Ok(u), Err(e)) if leaves_domain(&e) => (u - mid()?) / hi,
                (Err(e), Ok(d)) if leaves_domain(&e) => (mid()? - d) / hi,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
        }
    }
    Ok(())
}

/// Central difference of `f` in every coordinate of `θ`.
fn central_gradient<M, F>(model: &M, theta: &[f64], h: f64, mut f: F, out: &mut [f64]) -> Result<()>
where
    M: DiffusionModel,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        let hi = fd_step_for(model, theta, i, h)?;
        probe[i] = theta[i] + hi;
        let up = f(&probe)?;
        probe[i] = theta[i] - hi;
        let down = f(&probe)?;
        probe[i] = theta[i];
        out[i] = (up - down) / (2.0 * hi);
    }
    Ok(())
}

/// `H_l(θ, z) = Σ_k ∇_θ log{g_θ(y_k|x_k) R^l_θ f̄_θ(x_k|x_{k−1})} + ∇_θ log ν_θ(x_0)`.
///
/// The path term is differentiated by central differences with step
/// `fd_step` (default `2^{−l}`) holding states and increments fixed. The
/// observation term is analytic when the model provides it.
pub fn h_l<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    z: &Trajectory,
    data: &StateSpaceData,
    fd_step: Option<f64>,
) -> Result<Vec<f64>> {
    model.param_space().check(theta)?;
    z.check(data)?;
    let p = theta.len();
    let h = fd_step.unwrap_or_else(|| (-(z.level as f64)).exp2());
    let mut out = vec![0.0; p];
    model.initial_log_density_grad(theta, z.state(0), &mut out);

    let mut g = vec![0.0; p];
    for (k, y) in data.y.iter().enumerate() {
        let Some(y) = y else { continue };
        let x = z.state(k);
        if !model.obs_log_density_grad(theta, x, y, &mut g) {
            central_gradient(model, theta, h, |th| Ok(model.obs_log_density(th, x, y)), &mut g)?;
        }
        for (o, v) in out.iter_mut().zip(&g) {
            *o += v;
        }
    }

    path_gradient(model, theta, z, data, h, &mut g)?;
    for (o, v) in out.iter_mut().zip(&g) {
        *o += v;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain {
            t: data.times[0],
            s1: data.times[0],
            s2: data.times[data.n_intervals()],
            what: "non-finite score summand".into(),
        });
    }
    Ok(out)
}
