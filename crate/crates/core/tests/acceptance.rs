//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero if any fail.
//!
//! Set `UMSA_SKIP_EXTENDED=1` to skip criterion 9, or `UMSA_CRITERIA=4,5`
//! to run a subset.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use common::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use umsa_core::models::kalman::{kalman_ascent, kalman_score_oracle, kalman_smoother};
use umsa_core::models::logistic::{
    gbm_log_density, gbm_transform, lognormal_aux_logdensity, logistic_aux_coeffs, nb_log_density,
    nb_log_density_grad_size,
};
use umsa_core::models::OuModel;
use umsa_core::sde::bridge_log_weight;
use umsa_core::sde::BridgeWorkspace;
use umsa_core::*;

type Outcome = (bool, String);

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

// 1. Maximal coupling.

fn random_pmf<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    // Exponential weights with an occasional spike so overlaps vary widely.
    let mut w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
    if rng.random::<f64>() < 0.5 {
        let i = rng.random_range(0..n);
        w[i] *= 1.0 + 20.0 * rng.random::<f64>();
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(101);
    let draws = 100_000u64;
    let sizes = [2usize, 10, 50];
    let (mut worst_z, mut worst_p) = (0.0f64, 1.0f64);
    let mut ok = true;
    for pair_ix in 0..20 {
        let n = sizes[pair_ix % 3];
        let p = random_pmf(n, &mut rng);
        let q = random_pmf(n, &mut rng);
        let overlap = 1.0 - 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let pair = CategoricalPair::new(p.clone(), q.clone()).unwrap();
        let (mut ci, mut cj) = (vec![0u64; n], vec![0u64; n]);
        let mut met = 0u64;
        for _ in 0..draws {
            let d = maximal_coupling_sample(&pair, &mut rng);
            ci[d.i] += 1;
            cj[d.j] += 1;
            met += (d.i == d.j) as u64;
        }
        let rate = met as f64 / draws as f64;
        let se = (overlap * (1.0 - overlap) / draws as f64).sqrt().max(1e-12);
        let z = (rate - overlap).abs() / se;
        let pv = chi_square_pvalue(&ci, &p).min(chi_square_pvalue(&cj, &q));
        worst_z = worst_z.max(z);
        worst_p = worst_p.min(pv);
        ok &= z <= 3.0 && pv > 1e-3;
    }
    (ok, format!("20 pairs, max |meet − overlap|/SE = {worst_z:.2}, min marginal p = {worst_p:.4}"))
}

// 2. Coarsening and linkage.

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(102);
    let mut bad = 0;
    for _ in 0..1000 {
        let level = rng.random_range(1..=10);
        let dim = rng.random_range(1..=3);
        let s1 = rng.random_range(0.0..5.0);
        let gap = rng.random_range(0.2..3.0);
        let seg = SegmentSpec::at_level(s1, s1 + gap, level).unwrap();
        let w = WienerIncrements::sample(seg, dim, &mut rng);
        let c = coarsen_increments(&w).unwrap();
        for j in 0..c.n_steps() {
            for d in 0..dim {
                let sum = w.increment(2 * j)[d] + w.increment(2 * j + 1)[d];
                bad += (sum.to_bits() != c.increment(j)[d].to_bits()) as usize;
            }
        }
    }
    let (model, data) = ou_fixture();
    let mut unlinked = 0;
    for level in 1..=8 {
        let v = coupled_initial_trajectory(&model, &OU_THETA, &data, level, &mut rng).unwrap();
        for k in 1..=data.n_intervals() {
            let c = coarsen_increments(&v.fine.wiener(&data, k).unwrap()).unwrap();
            unlinked += (c.values != v.coarse.block(k)) as usize;
        }
    }
    (
        bad == 0 && unlinked == 0,
        format!("{bad} mismatched sums over 1000 blocks, {unlinked} unlinked initial blocks"),
    )
}

// 3. Degeneracy under the exact auxiliary process.

fn criterion_3() -> Outcome {
    let model = OuModel::exact_aux(0.0);
    let mut rng = rng_from_seed(103);
    let mut ws = BridgeWorkspace::new(1);
    let mut worst = 0.0f64;
    for level in 0..=10u32 {
        for _ in 0..1000 {
            let theta = [
                rng.random_range(-2.0..-0.05),
                rng.random_range(0.2..2.0),
                rng.random_range(0.1..2.0),
            ];
            let s1 = rng.random_range(0.0..10.0);
            let gap = rng.random_range(0.1..3.0);
            let seg = SegmentSpec::at_level(s1, s1 + gap, level).unwrap();
            let w = WienerIncrements::sample(seg, 1, &mut rng);
            let x: f64 = 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            let y: f64 = 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            let bw = bridge_log_weight(&model, &theta, &seg, &[x], &[y], &w.values, &mut ws).unwrap();
            worst = worst.max(bw.log_r().abs());
        }
    }
    (worst <= 1e-10, format!("max |log R| = {worst:.2e} over 11000 bridges, levels 0..=10"))
}

// 4 and 5. Smoothing and score oracles on one long chain.

struct Chain {
    x3: Vec<f64>,
    x5: Vec<f64>,
    h: Vec<Vec<f64>>,
}

fn run_chain(level: u32, sweeps: usize, burn: usize, seed: u64) -> Chain {
    let (model, data) = ou_fixture();
    let mut rng = rng_from_seed(seed);
    let mut z = initial_trajectory(&model, &OU_THETA, &data, level, &mut rng).unwrap();
    let mut out = Chain {
        x3: vec![],
        x5: vec![],
        h: vec![],
    };
    for s in 0..burn + sweeps {
        z = cpf_bs_sweep(&model, &OU_THETA, level, &z, &data, 50, &mut rng, Variant::Backward).unwrap();
        if s >= burn {
            out.x3.push(z.state(3)[0]);
            out.x5.push(z.state(5)[0]);
            out.h.push(h_l(&model, &OU_THETA, &z, &data, None).unwrap());
        }
    }
    out
}

fn fine_chain() -> &'static Chain {
    static CHAIN: OnceLock<Chain> = OnceLock::new();
    CHAIN.get_or_init(|| run_chain(8, 5000, 500, 104))
}

fn h_means(chain: &Chain) -> Vec<(f64, f64)> {
    (0..3)
        .map(|i| {
            let xs: Vec<f64> = chain.h.iter().map(|h| h[i]).collect();
            batch_means(&xs, 50)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let (_, data) = ou_fixture();
    let exact = kalman_smoother(&OU_THETA, 0.0, &data).unwrap().smoothed_means;
    let chain = fine_chain();
    let mut ok = true;
    let mut msg = vec![];
    for (t, xs) in [(3usize, &chain.x3), (5, &chain.x5)] {
        let (m, se) = batch_means(xs, 50);
        let z = (m - exact[t]) / se;
        ok &= z.abs() <= 3.0;
        msg.push(format!("t={t}: {m:.4} ± {se:.4} vs {:.4} (z = {z:.2})", exact[t]));
    }
    (ok, msg.join("; "))
}

fn criterion_5() -> Outcome {
    let (_, data) = ou_fixture();
    let score = kalman_score_oracle(&OU_THETA, 0.0, &data).unwrap().1;
    let fine: Vec<f64> = h_means(fine_chain()).iter().map(|m| m.0).collect();
    let coarse: Vec<f64> = h_means(&run_chain(4, 5000, 500, 105)).iter().map(|m| m.0).collect();
    let rel: Vec<f64> = fine.iter().zip(&score).map(|(h, s)| ((h - s) / s).abs()).collect();
    let err = |v: &[f64]| v.iter().zip(&score).map(|(h, s)| (h - s).powi(2)).sum::<f64>().sqrt();
    let (ef, ec) = (err(&fine), err(&coarse));
    (
        rel.iter().all(|r| *r <= 0.10) && ef <= ec,
        format!(
            "mean h_8 = {} vs score {}, relative error {}; ‖error‖ l=8 {ef:.4}, l=4 {ec:.4}",
            fmt(&fine),
            fmt(&score),
            fmt(&rel)
        ),
    )
}

// 6. Backward sampling against ancestral tracing.

fn update_rate(variant: Variant) -> f64 {
    let (model, data) = ou_fixture();
    let level = 6;
    let mut rng = rng_from_seed(106);
    let mut z = initial_trajectory(&model, &OU_THETA, &data, level, &mut rng).unwrap();
    let mut rng = rng_from_seed(206);
    let sweeps = 2000;
    let mut moved = 0;
    for _ in 0..sweeps {
        let next = cpf_bs_sweep(&model, &OU_THETA, level, &z, &data, 10, &mut rng, variant).unwrap();
        moved += (next.state(5) != z.state(5)) as usize;
        z = next;
    }
    moved as f64 / sweeps as f64
}

fn criterion_6() -> Outcome {
    let bs = update_rate(Variant::Backward);
    let anc = update_rate(Variant::Ancestral);
    (
        bs - anc >= 0.10,
        format!("update rate at t=5: backward {:.1}%, ancestral {:.1}%", 100.0 * bs, 100.0 * anc),
    )
}

// 7. Coupling decay across levels.

fn path_gap(model: &OuModel, data: &StateSpaceData, v: &CoupledTrajectory) -> f64 {
    let mut worst = 0.0f64;
    for k in 1..=data.n_intervals() {
        let path = |z: &Trajectory| {
            let seg = data.segment(k, z.level);
            let w = z.wiener(data, k).unwrap();
            euler_bridge_path(model, &OU_THETA, &seg, z.state(k - 1), z.state(k), &w).unwrap()
        };
        let (pf, pc) = (path(&v.fine), path(&v.coarse));
        for j in 0..pc.len() {
            worst = worst.max((pf.state(2 * j)[0] - pc.state(j)[0]).abs());
        }
    }
    worst
}

fn criterion_7() -> Outcome {
    let (model, data) = ou_fixture();
    let mut rows = vec![];
    for level in [4u32, 6, 8] {
        let mut rng = rng_from_seed(107 + level as u64);
        let mut v = coupled_initial_trajectory(&model, &OU_THETA, &data, level, &mut rng).unwrap();
        let (mut paths, mut scores) = (vec![], vec![]);
        for s in 0..450 {
            v = ccpf_bs_sweep(&model, &OU_THETA, &OU_THETA, &v, &data, 50, &mut rng, Variant::Backward)
                .unwrap();
            if s < 50 {
                continue;
            }
            paths.push(path_gap(&model, &data, &v));
            let hf = h_l(&model, &OU_THETA, &v.fine, &data, None).unwrap();
            let hc = h_l(&model, &OU_THETA, &v.coarse, &data, None).unwrap();
            scores.push(hf.iter().zip(&hc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        }
        rows.push((level, median(&paths), median(&scores)));
    }
    let ok = rows.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 < w[0].2);
    let msg: Vec<String> = rows
        .iter()
        .map(|(l, p, s)| format!("l={l}: path {p:.4}, h {s:.4}"))
        .collect();
    (ok, format!("medians {}", msg.join("; ")))
}

// 8 and 9. Replicate pool of the randomized estimator.

struct Pool {
    records: Vec<EstimateRecord>,
    target: Vec<f64>,
}

fn pool() -> &'static Pool {
    static POOL: OnceLock<Pool> = OnceLock::new();
    POOL.get_or_init(|| {
        let (model, data) = ou_fixture();
        let target = kalman_ascent(&OU_THETA, 0.0, &data, 1e-8, 200_000).unwrap().theta;
        let o = ScheduleOverrides {
            l0: Some(2),
            l_max: Some(6),
            p_max: Some(8),
            ..Default::default()
        };
        let schedule = build_schedule(ScheduleKind::PaperOu, &o).unwrap();
        let cfg = SaConfig {
            n_particles: 50,
            variant: Variant::Backward,
            step: schedule.step.clone(),
            projection: model.default_projection(),
            fd_step: None,
        };
        let m = 2000u64;
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()) as u64;
        let mut records: Vec<EstimateRecord> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let (model, data, schedule, cfg) = (&model, &data, &schedule, &cfg);
                    s.spawn(move || {
                        (w..m)
                            .step_by(workers as usize)
                            .map(|i| {
                                umsa_single(model, &OU_THETA, schedule, cfg, data, replicate_seed(108, i))
                                    .map(|r| (i, r))
                                    .unwrap()
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut all: Vec<(u64, EstimateRecord)> =
                handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
            all.sort_by_key(|p| p.0);
            all.into_iter().map(|p| p.1).collect()
        });
        records.shrink_to_fit();
        Pool { records, target }
    })
}

fn criterion_8() -> Outcome {
    let p = pool();
    let s = pool_estimates(&p.records, 1).unwrap();
    let z: Vec<f64> = s
        .mean
        .iter()
        .zip(&p.target)
        .zip(&s.std_error)
        .map(|((m, t), se)| (m - t) / se)
        .collect();
    (
        z.iter().all(|v| v.abs() <= 3.0),
        format!(
            "M={}: pooled mean {} ± {} vs ascent optimum {}, z {}",
            s.n_records,
            fmt(&s.mean),
            fmt(&s.std_error),
            fmt(&p.target),
            fmt(&z)
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = pool();
    let (mut cost, mut eps) = (vec![], vec![vec![]; 3]);
    for g in [8usize, 32, 128] {
        let e = estimate_mse(&p.records, &p.target, g).unwrap();
        cost.push(e.cost.ln());
        for (i, v) in e.eps2.iter().enumerate() {
            eps[i].push(v.ln());
        }
    }
    let slopes: Vec<f64> = eps.iter().map(|y| slope(&cost, y)).collect();
    (
        slopes.iter().all(|s| *s <= -0.8),
        format!("slopes of log ε² on log cost {}", fmt(&slopes)),
    )
}

// 10. Logistic closed forms.

/// Five-point central difference.
fn deriv(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn criterion_10() -> Outcome {
    let theta = [2.0, 2.0 / 522.8, 0.8, 10.0];
    let mut norm_err = 0.0f64;
    let mut fd_err = 0.0f64;
    for (x1, x2) in [(400.0, 600.0), (150.0, 90.0), (20.0, 500.0)] {
        let coeffs = logistic_aux_coeffs(&theta, 0.0, x1, 1.0, x2).unwrap();
        for t in [0.0, 0.5, 0.9] {
            for x in [50.0, 300.0, 700.0] {
                let f = |u: f64| {
                    let xe = u.exp();
                    (lognormal_aux_logdensity(&theta, coeffs, t, x, 1.0, xe).unwrap().0).exp() * xe
                };
                norm_err = norm_err.max((simpson(f, -20.0, 30.0, 40_000) - 1.0).abs());
                for xe in [100.0, 450.0] {
                    let at = |x: f64| lognormal_aux_logdensity(&theta, coeffs, t, x, 1.0, xe).unwrap();
                    let h = 1e-3 * x;
                    let (_, g, hs) = at(x);
                    let g_fd = deriv(|v| at(v).0, x, h);
                    let hs_fd = deriv(|v| at(v).1, x, h);
                    fd_err = fd_err.max(rel_err(g_fd, g)).max(rel_err(hs_fd, hs));
                }
            }
        }
    }
    let mut nb_err = 0.0f64;
    for r in [0.5, 10.0, 1e3] {
        for x in [1.0, 50.0, 600.0] {
            for y in [0.0, 7.0, 400.0] {
                let h = 1e-3 * r;
                let fd = deriv(|v| nb_log_density(v, x, y), r, h);
                fd_err = fd_err.max(rel_err(fd, nb_log_density_grad_size(r, x, y)));
            }
            let sd = (x + x * x / r).sqrt();
            let top = (x + 60.0 * sd + 100.0) as u64;
            let total: f64 = (0..=top).map(|y| nb_log_density(r, x, y as f64).exp()).sum();
            nb_err = nb_err.max((1.0 - total).max(total - 1.0 - 1e-12));
        }
    }
    let mut rng = rng_from_seed(110);
    let mut moment_z = 0.0f64;
    let mut gbm_norm = 0.0f64;
    for (theta3, gap, x) in [(0.8, 1.0, 300.0), (0.3, 0.25, 20.0)] {
        let draws: Vec<f64> = (0..100_000)
            .map(|_| gbm_transform(theta3, gap, x, StandardNormal.sample(&mut rng)).unwrap())
            .collect();
        let s2 = theta3 * theta3 * gap;
        let exact_mean = x * (s2 / 2.0).exp();
        let exact_sd = exact_mean * (s2.exp() - 1.0).sqrt();
        moment_z = moment_z.max((mean(&draws) - exact_mean).abs() / (exact_sd / (draws.len() as f64).sqrt()));
        let logs: Vec<f64> = draws.iter().map(|d| (d / x).ln()).collect();
        moment_z = moment_z.max(mean(&logs).abs() / (s2 / logs.len() as f64).sqrt());
        let f = |u: f64| gbm_log_density(theta3, gap, x, u.exp()).exp() * u.exp();
        gbm_norm = gbm_norm.max((simpson(f, x.ln() - 20.0, x.ln() + 20.0, 20_000) - 1.0).abs());
    }
    let ok = norm_err <= 1e-6 && fd_err <= 1e-5 && nb_err <= 1e-8 && moment_z <= 3.0 && gbm_norm <= 1e-6;
    (
        ok,
        format!(
            "aux normalization {norm_err:.1e}, FD relative {fd_err:.1e}, NB mass deficit {nb_err:.1e}, GBM moment z {moment_z:.2}, GBM normalization {gbm_norm:.1e}"
        ),
    )
}

fn main() {
    let skip_extended = std::env::var("UMSA_SKIP_EXTENDED").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "maximal coupling", criterion_1),
        (2, "coarsening and linkage", criterion_2),
        (3, "exact-auxiliary degeneracy", criterion_3),
        (4, "smoothing oracle", criterion_4),
        (5, "score oracle", criterion_5),
        (6, "mixing of backward sampling", criterion_6),
        (7, "coupling decay", criterion_7),
        (8, "unbiasedness at desk scale", criterion_8),
        (9, "MSE against cost", criterion_9),
        (10, "logistic closed forms", criterion_10),
    ];
    let only: Option<Vec<u32>> = std::env::var("UMSA_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        if id == 9 && skip_extended {
            println!("criterion {id} [{name}] SKIP: extended criterion disabled");
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let what = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {what}"))
            }
        };
        failed += !ok as usize;
        println!(
            "criterion {id} [{name}] {}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
