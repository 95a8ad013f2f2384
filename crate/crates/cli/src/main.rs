//! `umsa`: run and analyse unbiased parameter estimation experiments.

mod config;
mod experiment;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use failure::Failure;

#[derive(Parser)]
#[command(name = "umsa", version, about = "Unbiased parameter estimation for partially observed diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run M independent estimators and pool them.
    Run(Common),
    /// MSE against cost from the records of a previous run.
    Mse(Common),
    /// Compare averaged h_l with the exact score.
    ScoreCheck(Common),
    /// Per-sweep update rates of backward sampling and ancestral tracing.
    Mixing(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.run.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.run.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<serde_json::Value, Failure> {
    match cli.command {
        Command::Run(c) => experiment::run(&c.load()?),
        Command::Mse(c) => experiment::mse(&c.load()?),
        Command::ScoreCheck(c) => experiment::score_check(&c.load()?),
        Command::Mixing(c) => experiment::mixing(&c.load()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", Failure::new("usage", e.to_string().trim()).to_json());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::FAILURE
        }
    }
}
