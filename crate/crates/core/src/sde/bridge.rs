//! Guided-bridge dynamics: the guided drift, the `L` integrand, the Euler map
//! from Wiener increments to a pinned lattice path, and the discretized log
//! Radon–Nikodym weight.

use rand::Rng;

use super::grid::{fill_increments, LatticePath, SegmentSpec, WienerIncrements};
use super::model::{AuxProcess, BridgeEnds, DiffusionModel};
use crate::error::{Error, Result};

/// Reusable buffers for bridge evaluation, sized for one state dimension.
#[derive(Debug, Clone)]
pub struct BridgeWorkspace {
    dim: usize,
    x: Vec<f64>,
    x_next: Vec<f64>,
    mu: Vec<f64>,
    mu_aux: Vec<f64>,
    cov: Vec<f64>,
    cov_aux: Vec<f64>,
    dcov: Vec<f64>,
    sigma: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl BridgeWorkspace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            x: vec![0.0; dim],
            x_next: vec![0.0; dim],
            mu: vec![0.0; dim],
            mu_aux: vec![0.0; dim],
            cov: vec![0.0; dim * dim],
            cov_aux: vec![0.0; dim * dim],
            dcov: vec![0.0; dim * dim],
            sigma: vec![0.0; dim * dim],
            grad: vec![0.0; dim],
            hess: vec![0.0; dim * dim],
        }
    }
}

/// The three factors of the discretized bridge weight on one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeWeight {
    /// `Σ_j L(t_j, X_{t_j}) Δ`.
    pub l_sum: f64,
    /// `log f̃_{s1,s2}(x_end | x_start)`.
    pub log_aux: f64,
    /// `log f̄_{s1,s2}(x_end | x_start)`.
    pub log_proposal: f64,
}

impl BridgeWeight {
    /// `log R^l`.
    pub fn log_r(&self) -> f64 {
        self.l_sum + self.log_aux - self.log_proposal
    }
}

fn domain_err(t: f64, ends: &BridgeEnds<'_>, what: &str) -> Error {
    Error::Domain {
        t,
        s1: ends.s1,
        s2: ends.s2,
        what: what.to_string(),
    }
}

/// Evaluate `L(t, x)` and leave `μ(x)`, `Σ(x)` and `∇_x log f̃` in the
/// workspace for the Euler step that follows.
fn eval_node<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    aux: &M::Aux,
    ends: &BridgeEnds<'_>,
    t: f64,
    ws: &mut BridgeWorkspace,
) -> Result<f64> {
    let d = ws.dim;
    let BridgeWorkspace {
        x,
        mu,
        mu_aux,
        cov,
        cov_aux,
        dcov,
        grad,
        hess,
        ..
    } = ws;
    model.drift(theta, x, mu);
    model.diffusion_cov(theta, x, cov);
    aux.drift(t, x, mu_aux);
    aux.cov(t, x, cov_aux);
    let mut need_hess = false;
    for ((dc, c), ca) in dcov.iter_mut().zip(cov.iter()).zip(cov_aux.iter()) {
        *dc = c - ca;
        need_hess |= *dc != 0.0;
    }
    aux.score(t, x, ends.x_end, grad, if need_hess { Some(hess) } else { None });
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(domain_err(t, ends, "non-finite auxiliary score"));
    }
    let mut value: f64 = mu
        .iter()
        .zip(mu_aux.iter())
        .zip(grad.iter())
        .map(|((m, ma), g)| (m - ma) * g)
        .sum();
    if need_hess {
        if hess.iter().any(|h| !h.is_finite()) {
            return Err(domain_err(t, ends, "non-finite auxiliary Hessian"));
        }
        // Tr{ΔΣ · (−H − g gᵀ)}
        let mut trace = 0.0;
        for i in 0..d {
            for j in 0..d {
                trace += dcov[i * d + j] * (-hess[j * d + i] - grad[j] * grad[i]);
            }
        }
        value -= 0.5 * trace;
    }
    if !value.is_finite() {
        return Err(domain_err(t, ends, "non-finite L integrand"));
    }
    Ok(value)
}

/// One Euler step of the guided SDE from the state in `ws.x`, using the
/// drift pieces left by [`eval_node`]. Writes the new state to `ws.x_next`.
fn euler_step<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    dt: f64,
    dw: &[f64],
    ws: &mut BridgeWorkspace,
) {
    let d = ws.dim;
    model.diffusion(theta, &ws.x, &mut ws.sigma);
    for i in 0..d {
        let mut guided = ws.mu[i];
        let mut noise = 0.0;
        for k in 0..d {
            guided += ws.cov[i * d + k] * ws.grad[k];
            noise += ws.sigma[i * d + k] * dw[k];
        }
        ws.x_next[i] = ws.x[i] + guided * dt + noise;
    }
}

fn check_state<M: DiffusionModel>(model: &M, x: &[f64], step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { step });
    }
    if !model.state_in_domain(x) {
        return Err(Error::DomainExit { step });
    }
    Ok(())
}

fn ends_for<'a>(seg: &SegmentSpec, x_start: &'a [f64], x_end: &'a [f64]) -> BridgeEnds<'a> {
    BridgeEnds {
        s1: seg.s1,
        s2: seg.s2,
        x_start,
        x_end,
    }
}

/// Guided drift `μ°(t, x; x_end) = μ(x) + Σ(x) ∇_x log f̃_{t,s2}(x_end | x)`.
pub fn guided_drift<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    ends: &BridgeEnds<'_>,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    if !(t >= ends.s1 && t < ends.s2) {
        return Err(domain_err(t, ends, "time outside [s1, s2)"));
    }
    let d = model.state_dim();
    let aux = model.aux(theta, ends)?;
    let mut ws = BridgeWorkspace::new(d);
    ws.x.copy_from_slice(x);
    eval_node(model, theta, &aux, ends, t, &mut ws)?;
    let out: Vec<f64> = (0..d)
        .map(|i| ws.mu[i] + (0..d).map(|k| ws.cov[i * d + k] * ws.grad[k]).sum::<f64>())
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(domain_err(t, ends, "non-finite guided drift"));
    }
    Ok(out)
}

/// The integrand
/// `L(t,x) = (μ − μ̃)ᵀ∇log f̃ − ½ Tr{(Σ − Σ̃)(−∇²log f̃ − ∇log f̃ ∇log f̃ᵀ)}`.
pub fn l_integrand<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    ends: &BridgeEnds<'_>,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    if !(t >= ends.s1 && t < ends.s2) {
        return Err(domain_err(t, ends, "time outside [s1, s2)"));
    }
    let aux = model.aux(theta, ends)?;
    let mut ws = BridgeWorkspace::new(model.state_dim());
    ws.x.copy_from_slice(x);
    eval_node(model, theta, &aux, ends, t, &mut ws)
}

fn check_bridge_inputs(
    seg: &SegmentSpec,
    dim: usize,
    x_start: &[f64],
    x_end: &[f64],
    w: &[f64],
) -> Result<()> {
    if x_start.len() != dim || x_end.len() != dim {
        return Err(Error::precondition("endpoint dimension mismatch"));
    }
    if x_start.iter().chain(x_end).any(|v| !v.is_finite()) {
        return Err(Error::precondition("non-finite bridge endpoint"));
    }
    if w.len() != seg.n_steps * dim {
        return Err(Error::precondition(format!(
            "increment block has {} entries, segment needs {}",
            w.len(),
            seg.n_steps * dim
        )));
    }
    Ok(())
}

/// The Euler map `C^l`: interior states follow
/// `X_{t+Δ} = X_t + μ°(t, X_t; x_end)Δ + σ(X_t)ΔW`, endpoints are pinned.
/// The final increment of the block drives no step.
pub fn euler_bridge_path<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    seg: &SegmentSpec,
    x_start: &[f64],
    x_end: &[f64],
    w: &WienerIncrements,
) -> Result<LatticePath> {
    let d = model.state_dim();
    if w.segment != *seg || w.dim != d {
        return Err(Error::precondition("increment block does not match segment"));
    }
    check_bridge_inputs(seg, d, x_start, x_end, &w.values)?;
    let ends = ends_for(seg, x_start, x_end);
    let aux = model.aux(theta, &ends)?;
    let n = seg.n_steps;
    let dt = seg.step();
    let mut ws = BridgeWorkspace::new(d);
    let mut states = Vec::with_capacity((n + 1) * d);
    states.extend_from_slice(x_start);
    ws.x.copy_from_slice(x_start);
    for j in 0..n.saturating_sub(1) {
        eval_node(model, theta, &aux, &ends, seg.node(j), &mut ws)?;
        euler_step(model, theta, dt, w.increment(j), &mut ws);
        check_state(model, &ws.x_next, j + 1)?;
        std::mem::swap(&mut ws.x, &mut ws.x_next);
        states.extend_from_slice(&ws.x);
    }
    states.extend_from_slice(x_end);
    Ok(LatticePath {
        segment: *seg,
        dim: d,
        states,
    })
}

/// `log R^l = Σ_{j=0}^{n-1} L(t_j, X_{t_j})Δ + log f̃(x_end|x_start) − log f̄(x_end|x_start)`
/// for a path produced by [`euler_bridge_path`].
pub fn log_radon_nikodym<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    path: &LatticePath,
) -> Result<f64> {
    let seg = path.segment;
    let d = model.state_dim();
    if path.dim != d || path.states.len() != (seg.n_steps + 1) * d {
        return Err(Error::precondition("malformed lattice path"));
    }
    let ends = ends_for(&seg, path.first(), path.last());
    let aux = model.aux(theta, &ends)?;
    let mut ws = BridgeWorkspace::new(d);
    let dt = seg.step();
    let mut l_sum = 0.0;
    for j in 0..seg.n_steps {
        ws.x.copy_from_slice(path.state(j));
        l_sum += eval_node(model, theta, &aux, &ends, seg.node(j), &mut ws)? * dt;
    }
    let w = finish_weight(model, theta, &aux, &ends, l_sum)?;
    Ok(w.log_r())
}

fn finish_weight<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    aux: &M::Aux,
    ends: &BridgeEnds<'_>,
    l_sum: f64,
) -> Result<BridgeWeight> {
    let log_aux = aux.log_transition(ends.s1, ends.x_start, ends.x_end);
    if !log_aux.is_finite() {
        return Err(domain_err(ends.s1, ends, "non-finite auxiliary transition density"));
    }
    let log_proposal = model.proposal_log_density(theta, ends.s1, ends.s2, ends.x_start, ends.x_end);
    if log_proposal == f64::NEG_INFINITY {
        return Err(Error::ProposalSupport);
    }
    if !log_proposal.is_finite() {
        return Err(domain_err(ends.s1, ends, "non-finite proposal density"));
    }
    Ok(BridgeWeight {
        l_sum,
        log_aux,
        log_proposal,
    })
}

/// Fused path construction and weight evaluation. Produces the same value
/// as [`euler_bridge_path`] followed by [`log_radon_nikodym`] without
/// storing the path.
pub fn bridge_log_weight<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    seg: &SegmentSpec,
    x_start: &[f64],
    x_end: &[f64],
    w: &[f64],
    ws: &mut BridgeWorkspace,
) -> Result<BridgeWeight> {
    let l_sum = bridge_l_sum(model, theta, seg, x_start, x_end, w, ws)?;
    let ends = ends_for(seg, x_start, x_end);
    let aux = model.aux(theta, &ends)?;
    finish_weight(model, theta, &aux, &ends, l_sum)
}

/// `Σ_j L Δ + log f̃(x_end|x_start)`, i.e. `log R^l + log f̄`. This is the
/// part of the bridge weight the parameter gradient acts on once the
/// proposal factors cancel.
pub fn bridge_path_term<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    seg: &SegmentSpec,
    x_start: &[f64],
    x_end: &[f64],
    w: &[f64],
    ws: &mut BridgeWorkspace,
) -> Result<f64> {
    let l_sum = bridge_l_sum(model, theta, seg, x_start, x_end, w, ws)?;
    let ends = ends_for(seg, x_start, x_end);
    let aux = model.aux(theta, &ends)?;
    let log_aux = aux.log_transition(seg.s1, x_start, x_end);
    if !log_aux.is_finite() {
        return Err(domain_err(seg.s1, &ends, "non-finite auxiliary transition density"));
    }
    Ok(l_sum + log_aux)
}

fn bridge_l_sum<M: DiffusionModel>(
    model: &M,
    theta: &[f64],
    seg: &SegmentSpec,
    x_start: &[f64],
    x_end: &[f64],
    w: &[f64],
    ws: &mut BridgeWorkspace,
) -> Result<f64> {
    let d = model.state_dim();
    debug_assert_eq!(ws.dim, d);
    check_bridge_inputs(seg, d, x_start, x_end, w)?;
    let ends = ends_for(seg, x_start, x_end);
    let aux = model.aux(theta, &ends)?;
    let n = seg.n_steps;
    let dt = seg.step();
    ws.x.copy_from_slice(x_start);
    let mut l_sum = 0.0;
    for j in 0..n {
        l_sum += eval_node(model, theta, &aux, &ends, seg.node(j), ws)? * dt;
        if j + 1 < n {
            euler_step(model, theta, dt, &w[j * d..(j + 1) * d], ws);
            check_state(model, &ws.x_next, j + 1)?;
            std::mem::swap(&mut ws.x, &mut ws.x_next);
        }
    }
    Ok(l_sum)
}

/// Forward Euler simulation of the unconditioned SDE on a segment. A step
/// that leaves the state domain has its increment redrawn, up to
/// `max_redraws` times per step.
pub fn simulate_unconditioned<M: DiffusionModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    seg: &SegmentSpec,
    x_start: &[f64],
    max_redraws: usize,
    rng: &mut R,
) -> Result<LatticePath> {
    let d = model.state_dim();
    let dt = seg.step();
    let mut states = Vec::with_capacity((seg.n_steps + 1) * d);
    states.extend_from_slice(x_start);
    let mut x = x_start.to_vec();
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut dw = vec![0.0; d];
    let mut next = vec![0.0; d];
    for j in 0..seg.n_steps {
        model.drift(theta, &x, &mut mu);
        model.diffusion(theta, &x, &mut sigma);
        let mut attempts = 0;
        loop {
            fill_increments(&mut dw, dt, rng);
            for i in 0..d {
                let noise: f64 = (0..d).map(|k| sigma[i * d + k] * dw[k]).sum();
                next[i] = x[i] + mu[i] * dt + noise;
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow { step: j + 1 });
            }
            if model.state_in_domain(&next) {
                break;
            }
            attempts += 1;
            if attempts > max_redraws {
                return Err(Error::DomainExit { step: j + 1 });
            }
        }
        x.copy_from_slice(&next);
        states.extend_from_slice(&x);
    }
    Ok(LatticePath {
        segment: *seg,
        dim: d,
        states,
    })
}
