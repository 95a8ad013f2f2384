//! Experiment configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use umsa_core::sa::LogBase;
use umsa_core::{ScheduleKind, ScheduleOverrides, Variant};

use crate::failure::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub mse: Option<MseConfig>,
    #[serde(default)]
    pub score_check: Option<ScoreCheckConfig>,
    #[serde(default)]
    pub mixing: Option<MixingConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ou,
    Logistic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Observation CSV, relative to the config file.
    pub data: PathBuf,
    /// OU start state.
    #[serde(default)]
    pub x0: f64,
    /// OU time of the known start state.
    #[serde(default)]
    pub t0: f64,
    /// OU auxiliary reversion rate; omitted means the exact auxiliary.
    #[serde(default)]
    pub aux_reversion: Option<f64>,
    /// Logistic initial law: "displayed" or "stationary".
    #[serde(default)]
    pub gamma_convention: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Randomized level and iteration count.
    #[default]
    Umsa,
    /// Fixed level and iteration count.
    Msa,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta0Box {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub mode: Mode,
    pub n_particles: usize,
    #[serde(default = "default_variant")]
    pub variant: String,
    pub replicates: usize,
    #[serde(default = "one")]
    pub group_size: usize,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub theta0_box: Option<Theta0Box>,
    /// Finite-difference step for the path score; defaults to `2^{−l}`.
    #[serde(default)]
    pub fd_step: Option<f64>,
    /// Projection box; defaults to the model's.
    #[serde(default)]
    pub projection_lo: Option<Vec<f64>>,
    #[serde(default)]
    pub projection_hi: Option<Vec<f64>>,
    /// Level and iteration index for `mode = "msa"`.
    #[serde(default)]
    pub level: Option<u32>,
    #[serde(default)]
    pub p: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// "paper_ou", "paper_logistic" or "theory"; defaults by model.
    #[serde(default)]
    pub kind: Option<String>,
    pub q: Option<f64>,
    pub l0: Option<u32>,
    pub l_max: Option<u32>,
    pub p_min: Option<u32>,
    pub p_max: Option<u32>,
    pub n0: Option<u64>,
    pub gamma0: Option<Vec<f64>>,
    pub exponent: Option<f64>,
    pub offset: Option<f64>,
    /// "two" or "natural".
    pub log_base: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            out: default_out(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseConfig {
    /// Reference parameter; omitted for OU means the Kalman maximizer.
    #[serde(default)]
    pub theta_ref: Option<Vec<f64>>,
    pub group_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreCheckConfig {
    pub theta: Vec<f64>,
    pub levels: Vec<u32>,
    pub sweeps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub theta: Vec<f64>,
    pub level: u32,
    pub sweeps: usize,
    pub particles: Vec<usize>,
    /// Observation index whose state is tracked; defaults to `⌈T/2⌉`.
    #[serde(default)]
    pub time_index: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_variant() -> String {
    "backward".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_batches() -> usize {
    50
}

impl ExperimentConfig {
    /// Parse a config file. Relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Failure::config(e.to_string()))?;
        if cfg.model.data.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.model.data = dir.join(&cfg.model.data);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let e = &self.estimator;
        if !self.model.data.is_file() {
            return Err(Failure::config(format!(
                "data file {} does not exist",
                self.model.data.display()
            )));
        }
        if e.replicates == 0 || e.group_size == 0 || e.group_size > e.replicates {
            return Err(Failure::config(format!(
                "need replicates ≥ group_size ≥ 1, got {} and {}",
                e.replicates, e.group_size
            )));
        }
        if e.n_particles < 2 {
            return Err(Failure::config("n_particles must be at least 2"));
        }
        if self.run.workers == 0 {
            return Err(Failure::config("workers must be at least 1"));
        }
        if e.theta0.is_some() == e.theta0_box.is_some() {
            return Err(Failure::config("give exactly one of theta0 and theta0_box"));
        }
        if e.mode == Mode::Msa && (e.level.is_none() || e.p.is_none()) {
            return Err(Failure::config("mode = \"msa\" needs level and p"));
        }
        if e.projection_lo.is_some() != e.projection_hi.is_some() {
            return Err(Failure::config("give both projection_lo and projection_hi or neither"));
        }
        self.variant()?;
        self.schedule_kind()?;
        self.overrides()?;
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant, Failure> {
        match self.estimator.variant.as_str() {
            "backward" => Ok(Variant::Backward),
            "ancestral" => Ok(Variant::Ancestral),
            v => Err(Failure::config(format!("unknown variant {v:?}"))),
        }
    }

    pub fn schedule_kind(&self) -> Result<ScheduleKind, Failure> {
        let default = match self.model.kind {
            ModelKind::Ou => "paper_ou",
            ModelKind::Logistic => "paper_logistic",
        };
        match self.schedule.kind.as_deref().unwrap_or(default) {
            "paper_ou" => Ok(ScheduleKind::PaperOu),
            "paper_logistic" => Ok(ScheduleKind::PaperLogistic),
            "theory" => Ok(ScheduleKind::Theory),
            k => Err(Failure::config(format!("unknown schedule kind {k:?}"))),
        }
    }

    pub fn overrides(&self) -> Result<ScheduleOverrides, Failure> {
        let s = &self.schedule;
        let log_base = match s.log_base.as_deref() {
            None => None,
            Some("two") => Some(LogBase::Two),
            Some("natural") => Some(LogBase::Natural),
            Some(b) => return Err(Failure::config(format!("unknown log base {b:?}"))),
        };
        Ok(ScheduleOverrides {
            q: s.q,
            l0: s.l0,
            l_max: s.l_max,
            p_min: s.p_min,
            p_max: s.p_max,
            n0: s.n0,
            gamma0: s.gamma0.clone(),
            exponent: s.exponent,
            offset: s.offset,
            log_base,
        })
    }
}
