//! The four subcommands: replicate runs, MSE curves, score checks and
//! mixing diagnostics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use umsa_core::data::load_observations_path;
use umsa_core::models::kalman::{kalman_ascent, kalman_score_oracle};
use umsa_core::models::{GammaConvention, LogisticModel, OuModel};
use umsa_core::sde::DiffusionModel;
use umsa_core::{
    build_schedule, cpf_bs_sweep, estimate_mse, h_l, initial_trajectory, pool_estimates,
    replicate_seed, rng_from_seed, umsa_single, EstimateRecord, LevelSchedule, PayloadKind,
    ProjectionBox, SaConfig, StateSpaceData, Variant,
};

use crate::config::{ExperimentConfig, Mode, ModelKind};
use crate::failure::Failure;

/// Stream index reserved for drawing `θ0` from its box.
const THETA0_STREAM: u64 = u64::MAX;

pub enum LoadedModel {
    Ou(OuModel),
    Logistic(LogisticModel),
}

pub struct Problem {
    pub model: LoadedModel,
    pub data: StateSpaceData,
}

macro_rules! with_model {
    ($p:expr, $m:ident => $body:expr) => {
        match &$p.model {
            LoadedModel::Ou($m) => $body,
            LoadedModel::Logistic($m) => $body,
        }
    };
}

impl Problem {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, Failure> {
        let m = &cfg.model;
        match m.kind {
            ModelKind::Ou => {
                let obs = load_observations_path(&m.data, PayloadKind::Real)?;
                Ok(Self {
                    model: LoadedModel::Ou(OuModel::new(m.x0, m.aux_reversion)),
                    data: OuModel::data(m.t0, &obs)?,
                })
            }
            ModelKind::Logistic => {
                let convention = match m.gamma_convention.as_deref() {
                    None | Some("displayed") => GammaConvention::Displayed,
                    Some("stationary") => GammaConvention::Stationary,
                    Some(c) => return Err(Failure::config(format!("unknown gamma convention {c:?}"))),
                };
                let obs = load_observations_path(&m.data, PayloadKind::Counts)?;
                Ok(Self {
                    model: LoadedModel::Logistic(LogisticModel::new(convention)),
                    data: LogisticModel::data(&obs)?,
                })
            }
        }
    }

    pub fn names(&self) -> Vec<String> {
        with_model!(self, m => m.param_space().names.clone())
    }

    fn check_theta(&self, what: &str, theta: &[f64]) -> Result<(), Failure> {
        with_model!(self, m => m.param_space().check(theta))
            .map_err(|e| Failure::config(format!("{what}: {e}")))
    }

    fn default_projection(&self) -> ProjectionBox {
        with_model!(self, m => m.default_projection())
    }

    /// The exact likelihood maximizer, when the model has one.
    fn kalman_optimum(&self, start: &[f64]) -> Option<Vec<f64>> {
        match &self.model {
            LoadedModel::Ou(m) => kalman_ascent(start, m.x0, &self.data, 1e-8, 200_000)
                .ok()
                .map(|r| r.theta),
            LoadedModel::Logistic(_) => None,
        }
    }
}

/// Mean and batch-means standard error.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let b = batches.clamp(2, n.max(2));
    let size = n / b;
    if size == 0 {
        return (mean, f64::NAN);
    }
    let bm: Vec<f64> = xs
        .chunks_exact(size)
        .take(b)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = bm.iter().sum::<f64>() / b as f64;
    let v = bm.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64;
    (mean, (v / b as f64).sqrt())
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v)?;
    writeln!(f)?;
    Ok(())
}

fn theta0(cfg: &ExperimentConfig, problem: &Problem) -> Result<Vec<f64>, Failure> {
    let t = match (&cfg.estimator.theta0, &cfg.estimator.theta0_box) {
        (Some(t), _) => t.clone(),
        (None, Some(b)) => {
            if b.lo.len() != b.hi.len() || b.lo.iter().zip(&b.hi).any(|(l, h)| !(l <= h)) {
                return Err(Failure::config("theta0_box needs lo ≤ hi coordinatewise"));
            }
            let mut rng = rng_from_seed(replicate_seed(cfg.run.seed, THETA0_STREAM));
            b.lo.iter()
                .zip(&b.hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect()
        }
        (None, None) => return Err(Failure::config("theta0 is not set")),
    };
    problem.check_theta("theta0", &t)?;
    Ok(t)
}

fn schedule(cfg: &ExperimentConfig) -> Result<LevelSchedule, Failure> {
    let s = build_schedule(cfg.schedule_kind()?, &cfg.overrides()?)?;
    Ok(match cfg.estimator.mode {
        Mode::Umsa => s,
        Mode::Msa => LevelSchedule::fixed(
            cfg.estimator.level.unwrap_or_default(),
            cfg.estimator.p.unwrap_or_default(),
            s.n0,
            s.step,
        ),
    })
}

fn sa_config(cfg: &ExperimentConfig, problem: &Problem, schedule: &LevelSchedule) -> Result<SaConfig, Failure> {
    let e = &cfg.estimator;
    let projection = match (&e.projection_lo, &e.projection_hi) {
        (Some(lo), Some(hi)) => {
            let dim = problem.names().len();
            if lo.len() != dim || hi.len() != dim || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                return Err(Failure::config("projection box has the wrong shape"));
            }
            ProjectionBox::new(lo.clone(), hi.clone())
        }
        _ => problem.default_projection(),
    };
    Ok(SaConfig {
        n_particles: e.n_particles,
        variant: cfg.variant()?,
        step: schedule.step.clone(),
        projection,
        fd_step: e.fd_step,
    })
}

const RECORD_FIELDS: [&str; 6] = ["index", "seed", "level", "p", "cost", "projections"];

fn write_records(path: &Path, names: &[String], rows: &[(usize, &EstimateRecord)]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<&str> = RECORD_FIELDS.iter().copied().chain(names.iter().map(String::as_str)).collect();
    w.write_record(&header)?;
    for (i, r) in rows {
        let mut row = vec![
            i.to_string(),
            r.seed.to_string(),
            r.level.to_string(),
            r.p.to_string(),
            r.cost.to_string(),
            r.projections.to_string(),
        ];
        row.extend(r.theta_hat.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a records file written by `run`.
pub fn read_records(path: &Path) -> Result<(Vec<String>, Vec<EstimateRecord>), Failure> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Failure::new("io", format!("cannot read {}: {e}", path.display())))?;
    let header = r.headers()?.clone();
    if header.len() <= RECORD_FIELDS.len() || header.iter().zip(RECORD_FIELDS).any(|(h, f)| h != f) {
        return Err(Failure::new("io", format!("{} is not a records file", path.display())));
    }
    let names: Vec<String> = header.iter().skip(RECORD_FIELDS.len()).map(String::from).collect();
    let bad = |row: usize| Failure::new("io", format!("malformed record at row {row}"));
    let mut out = vec![];
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let int = |i: usize| rec.get(i).and_then(|s| s.parse::<u64>().ok()).ok_or_else(|| bad(row + 1));
        let theta_hat = (RECORD_FIELDS.len()..header.len())
            .map(|i| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(row + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(EstimateRecord {
            theta_hat,
            seed: int(1)?,
            level: int(2)? as u32,
            p: int(3)? as u32,
            cost: int(4)?,
            projections: int(5)? as usize,
        });
    }
    Ok((names, out))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::new("runtime", e.to_string()))
}

/// `M` independent estimators, pooled. Records depend only on the config
/// and root seed, not on the worker count.
pub fn run(cfg: &ExperimentConfig) -> Result<Value, Failure> {
    let start = Instant::now();
    let problem = Problem::load(cfg)?;
    let theta0 = theta0(cfg, &problem)?;
    let schedule = schedule(cfg)?;
    let sa = sa_config(cfg, &problem, &schedule)?;
    let names = problem.names();
    let m = cfg.estimator.replicates;
    let seeds: Vec<u64> = (0..m as u64).map(|i| replicate_seed(cfg.run.seed, i)).collect();
    let results: Vec<Result<EstimateRecord, String>> = thread_pool(cfg.run.workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                with_model!(problem, model => umsa_single(model, &theta0, &schedule, &sa, &problem.data, s))
                    .map_err(|e| e.to_string())
            })
            .collect()
    });

    let out = &cfg.run.out;
    std::fs::create_dir_all(out)?;
    let done: Vec<(usize, &EstimateRecord)> =
        results.iter().enumerate().filter_map(|(i, r)| r.as_ref().ok().map(|r| (i, r))).collect();
    let failures: Vec<Value> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| json!({ "index": i, "seed": seeds[i], "error": e })))
        .collect();
    write_records(&out.join("records.csv"), &names, &done)?;

    let owned: Vec<EstimateRecord> = done.iter().map(|(_, r)| (*r).clone()).collect();
    let total_cost: u64 = owned.iter().map(|r| r.cost).sum();
    let mut summary = json!({ "parameters": names, "n_records": owned.len() });
    if !owned.is_empty() {
        let s = pool_estimates(&owned, cfg.estimator.group_size.min(owned.len()))?;
        summary = json!({
            "parameters": names,
            "n_records": s.n_records,
            "group_size": cfg.estimator.group_size,
            "mean": s.mean,
            "variance": s.variance,
            "std_error": s.std_error,
            "ci95_low": s.ci_low,
            "ci95_high": s.ci_high,
            "group_means": s.group_means,
            "total_cost": s.total_cost,
        });
    }
    if let Some(opt) = problem.kalman_optimum(&theta0) {
        summary["exact_optimum"] = json!(opt);
    }
    write_json(&out.join("summary.json"), &summary)?;

    let manifest = json!({
        "command": "run",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "root_seed": cfg.run.seed,
        "workers": cfg.run.workers,
        "theta0": theta0,
        "seeds": seeds,
        "replicates_requested": m,
        "replicates_completed": owned.len(),
        "complete": failures.is_empty(),
        "failures": failures,
        "total_cost": total_cost,
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    if !failures.is_empty() {
        return Err(Failure::new(
            "incomplete",
            format!("{} of {m} replicates failed; partial results kept in {}", failures.len(), out.display()),
        ));
    }
    Ok(summary)
}

/// MSE against group size from an existing records file.
pub fn mse(cfg: &ExperimentConfig) -> Result<Value, Failure> {
    let mc = cfg.mse.as_ref().ok_or_else(|| Failure::config("missing [mse] section"))?;
    let problem = Problem::load(cfg)?;
    let (names, records) = read_records(&cfg.run.out.join("records.csv"))?;
    if names != problem.names() {
        return Err(Failure::config("records do not match the configured model"));
    }
    let theta_ref = match &mc.theta_ref {
        Some(t) => t.clone(),
        None => {
            let start = theta0(cfg, &problem)?;
            problem
                .kalman_optimum(&start)
                .ok_or_else(|| Failure::config("theta_ref is required for this model"))?
        }
    };
    let mut w = csv::Writer::from_path(cfg.run.out.join("mse.csv"))?;
    let mut header = vec!["group_size".to_string(), "groups".into(), "cost".into()];
    header.extend(names.iter().map(|n| format!("eps2_{n}")));
    w.write_record(&header)?;
    let mut rows = vec![];
    for &g in &mc.group_sizes {
        let e = estimate_mse(&records, &theta_ref, g)?;
        let mut row = vec![g.to_string(), e.groups.to_string(), e.cost.to_string()];
        row.extend(e.eps2.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
        rows.push(e);
    }
    w.flush()?;
    let mut result = json!({
        "theta_ref": theta_ref,
        "rows": rows.iter().map(|e| json!({
            "group_size": e.m_group, "groups": e.groups, "cost": e.cost, "eps2": e.eps2,
        })).collect::<Vec<_>>(),
    });
    if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|e| e.cost.ln()).collect();
        let slopes: Vec<f64> = (0..names.len())
            .map(|i| slope(&x, &rows.iter().map(|e| e.eps2[i].ln()).collect::<Vec<_>>()))
            .collect();
        result["log_log_slopes"] = json!(slopes);
    }
    write_json(&cfg.run.out.join("mse.json"), &result)?;
    Ok(result)
}

fn score_chain<M: DiffusionModel>(
    model: &M,
    data: &StateSpaceData,
    theta: &[f64],
    level: u32,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<f64>>, Failure> {
    let sc = cfg.score_check.as_ref().expect("checked by caller");
    let mut rng = rng_from_seed(replicate_seed(cfg.run.seed, level as u64));
    let n = cfg.estimator.n_particles;
    let variant = cfg.variant()?;
    let mut z = initial_trajectory(model, theta, data, level, &mut rng)?;
    let mut hs = Vec::with_capacity(sc.sweeps);
    for s in 0..sc.burn_in + sc.sweeps {
        z = cpf_bs_sweep(model, theta, level, &z, data, n, &mut rng, variant)?;
        if s >= sc.burn_in {
            hs.push(h_l(model, theta, &z, data, cfg.estimator.fd_step)?);
        }
    }
    Ok(hs)
}

/// Average `h_l` over a particle chain at fixed `θ`, per level, against the
/// exact score when one exists.
pub fn score_check(cfg: &ExperimentConfig) -> Result<Value, Failure> {
    let sc = cfg.score_check.as_ref().ok_or_else(|| Failure::config("missing [score_check] section"))?;
    if sc.sweeps < 2 {
        return Err(Failure::config("score_check needs at least 2 sweeps"));
    }
    let problem = Problem::load(cfg)?;
    problem.check_theta("score_check.theta", &sc.theta)?;
    let names = problem.names();
    let exact = match &problem.model {
        LoadedModel::Ou(m) => Some(kalman_score_oracle(&sc.theta, m.x0, &problem.data)?.1),
        LoadedModel::Logistic(_) => None,
    };
    let levels: Vec<Result<Vec<Vec<f64>>, Failure>> = thread_pool(cfg.run.workers)?.install(|| {
        sc.levels
            .par_iter()
            .map(|&l| with_model!(problem, m => score_chain(m, &problem.data, &sc.theta, l, cfg)))
            .collect()
    });
    std::fs::create_dir_all(&cfg.run.out)?;
    let mut w = csv::Writer::from_path(cfg.run.out.join("score_check.csv"))?;
    w.write_record(["level", "parameter", "mean", "std_error", "exact"])?;
    let mut rows = vec![];
    for (&level, hs) in sc.levels.iter().zip(levels) {
        let hs = hs?;
        for (i, name) in names.iter().enumerate() {
            let xs: Vec<f64> = hs.iter().map(|h| h[i]).collect();
            let (mean, se) = batch_means(&xs, sc.batches);
            let ex = exact.as_ref().map(|e| e[i]);
            w.write_record([
                level.to_string(),
                name.clone(),
                mean.to_string(),
                se.to_string(),
                ex.map_or(String::new(), |v| v.to_string()),
            ])?;
            rows.push(json!({ "level": level, "parameter": name, "mean": mean, "std_error": se, "exact": ex }));
        }
    }
    w.flush()?;
    let result = json!({ "theta": sc.theta, "exact_score": exact, "rows": rows });
    write_json(&cfg.run.out.join("score_check.json"), &result)?;
    Ok(result)
}

fn update_rate<M: DiffusionModel>(
    model: &M,
    data: &StateSpaceData,
    cfg: &ExperimentConfig,
    n: usize,
    variant: Variant,
    k: usize,
    seed: u64,
) -> Result<f64, Failure> {
    let mc = cfg.mixing.as_ref().expect("checked by caller");
    let mut rng = rng_from_seed(seed);
    let mut z = initial_trajectory(model, &mc.theta, data, mc.level, &mut rng)?;
    let mut moved = 0usize;
    for _ in 0..mc.sweeps {
        let next = cpf_bs_sweep(model, &mc.theta, mc.level, &z, data, n, &mut rng, variant)?;
        moved += (next.state(k) != z.state(k)) as usize;
        z = next;
    }
    Ok(moved as f64 / mc.sweeps as f64)
}

/// Fraction of sweeps that move the tracked state, for both path
/// selection variants and each particle count.
pub fn mixing(cfg: &ExperimentConfig) -> Result<Value, Failure> {
    let mc = cfg.mixing.as_ref().ok_or_else(|| Failure::config("missing [mixing] section"))?;
    let problem = Problem::load(cfg)?;
    problem.check_theta("mixing.theta", &mc.theta)?;
    let t = problem.data.n_intervals();
    let k = mc.time_index.unwrap_or(t.div_ceil(2));
    if k > t || mc.sweeps == 0 || mc.particles.iter().any(|&n| n < 2) {
        return Err(Failure::config("mixing needs time_index ≤ T, sweeps ≥ 1 and particles ≥ 2"));
    }
    let jobs: Vec<(usize, Variant)> = mc
        .particles
        .iter()
        .flat_map(|&n| [(n, Variant::Backward), (n, Variant::Ancestral)])
        .collect();
    let rates: Vec<Result<f64, Failure>> = thread_pool(cfg.run.workers)?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, &(n, v))| {
                // Both variants at one N start from the same trajectory.
                let seed = replicate_seed(cfg.run.seed, (i / 2) as u64);
                with_model!(problem, m => update_rate(m, &problem.data, cfg, n, v, k, seed))
            })
            .collect()
    });
    std::fs::create_dir_all(&cfg.run.out)?;
    let mut w = csv::Writer::from_path(cfg.run.out.join("mixing.csv"))?;
    w.write_record(["n_particles", "variant", "update_rate"])?;
    let mut rows = vec![];
    for ((n, v), rate) in jobs.iter().zip(rates) {
        let rate = rate?;
        let name = match v {
            Variant::Backward => "backward",
            Variant::Ancestral => "ancestral",
        };
        w.write_record([n.to_string(), name.to_string(), rate.to_string()])?;
        rows.push(json!({ "n_particles": n, "variant": name, "update_rate": rate }));
    }
    w.flush()?;
    let result = json!({ "time_index": k, "level": mc.level, "sweeps": mc.sweeps, "rows": rows });
    write_json(&cfg.run.out.join("mixing.json"), &result)?;
    Ok(result)
}
