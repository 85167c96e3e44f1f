//! Command-line front end: `run`, `validate` and `sweep`.
//!
//! Exit codes: 0 success, 1 invalid configuration or usage, 2 I/O failure,
//! 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::{
    emit_csv, run_experiment, sweep, workers_from_env, Algorithm, ExperimentConfig,
    ExperimentResult, Variant,
};
use crate::validation::{
    lemma3_width_sum_check, lemma4_event_coverage, probe_directions, proposition1_growth,
    theorem1_coverage, ucb_glm_trajectories, znorm_bound_check, SampleSpec,
};

#[derive(Debug, Parser)]
#[command(name = "glm-bandit", version, about = "Generalized linear contextual bandit simulations")]
pub struct Cli {
    /// Worker threads (overrides GLM_BANDIT_THREADS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured algorithms and write CSV traces and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one Monte Carlo check and write its report as JSON.
    Validate {
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every algorithm once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Theorem1,
    Prop1,
    Lemma4,
    Znorm,
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::Theorem1 => "theorem1",
            Check::Prop1 => "prop1",
            Check::Lemma4 => "lemma4",
            Check::Znorm => "znorm",
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Messages go to `out` and errors to `err`.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn workers(cli: &Cli) -> Result<usize> {
    match cli.workers {
        Some(0) => Err(Error::invalid("--workers must be at least 1")),
        Some(n) => Ok(n),
        None => workers_from_env(),
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let workers = workers(cli)?;
    match &cli.command {
        Command::Run { config, seed, out: dir } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(s) = seed {
                cfg.master_seed = *s;
            }
            if let Some(d) = dir {
                cfg.out_dir = d.clone();
            }
            let result = run_experiment(&cfg, workers)?;
            emit_csv(&result, &cfg.out_dir)?;
            report(&result, &cfg.out_dir, out)
        }
        Command::Sweep {
            config,
            param,
            values,
            out: dir,
        } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(d) = dir {
                cfg.out_dir = d.clone();
            }
            let result = sweep(&cfg, param, values, workers)?;
            emit_csv(&result, &cfg.out_dir)?;
            report(&result, &cfg.out_dir, out)
        }
        Command::Validate { check, config, out: dir } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(d) = dir {
                cfg.out_dir = d.clone();
            }
            let value = validate(*check, &cfg, workers)?;
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
            let path = cfg.out_dir.join(format!("validate_{}.json", check.name()));
            let text = serde_json::to_string_pretty(&value).expect("report serializes") + "\n";
            std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
            write!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn report(result: &ExperimentResult, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let mut w = || -> std::io::Result<()> {
        for v in &result.variants {
            writeln!(
                out,
                "{:<32} mean R_T = {:>12.4}  reps = {}",
                v.label(),
                v.mean_final_regret(),
                v.traces.len()
            )?;
        }
        writeln!(out, "wrote {}", dir.display())
    };
    w().map_err(|e| Error::io("<stdout>", e))
}

/// θ* for the fixed-design checks: the configured vector, else
/// `theta_star_norm·e_1`.
fn fixed_theta(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.theta_star.clone().unwrap_or_else(|| {
        let mut v = vec![0.0; cfg.d];
        v[0] = cfg.theta_star_norm;
        v
    })
}

fn sample_spec(cfg: &ExperimentConfig) -> Result<SampleSpec> {
    Ok(SampleSpec {
        link: cfg.link,
        d: cfg.d,
        n: cfg.n.unwrap_or(cfg.horizon),
        noise: cfg.noise()?,
        theta_star: fixed_theta(cfg),
        contexts: cfg.context_distribution()?,
        delta: cfg.delta,
        replications: cfg.replications,
        master_seed: cfg.master_seed,
    })
}

/// Runs `check` as configured and returns its JSON report.
pub fn validate(check: Check, cfg: &ExperimentConfig, workers: usize) -> Result<serde_json::Value> {
    cfg.validate()?;
    Ok(match check {
        Check::Theorem1 => {
            let spec = sample_spec(cfg)?;
            let dirs = probe_directions(cfg.d, cfg.random_directions, cfg.master_seed);
            let r = theorem1_coverage(&spec, &dirs, workers)?;
            json!({
                "report": r.coverage,
                "within_tolerance": r.coverage.within_tolerance(),
                "basis_hits": r.basis_hits,
                "directions": r.directions,
                "eigen_threshold": r.eigen_threshold,
            })
        }
        Check::Znorm => {
            let r = znorm_bound_check(&sample_spec(cfg)?, workers)?;
            json!({ "report": r, "within_tolerance": r.within_tolerance() })
        }
        Check::Prop1 => {
            let grid = cfg
                .n_grid
                .clone()
                .unwrap_or_else(|| vec![cfg.n.unwrap_or(cfg.horizon)]);
            let r = proposition1_growth(
                &cfg.context_distribution()?,
                cfg.d,
                &grid,
                cfg.replications,
                cfg.master_seed,
                workers,
            )?;
            json!({ "report": r })
        }
        Check::Lemma4 => {
            let tuning = Variant::new(Algorithm::UcbGlm, cfg.clone()).tuning()?;
            let policy = tuning.policy.clone().expect("UCB-GLM is tuned");
            let c = tuning.constants;
            let trajs = ucb_glm_trajectories(
                &cfg.environment()?,
                &policy,
                cfg.replications,
                cfg.master_seed,
                (c.sigma, c.kappa, cfg.delta),
                workers,
            )?;
            let r = lemma4_event_coverage(&trajs, cfg.delta);
            let widths: Vec<_> = trajs
                .iter()
                .map(|t| lemma3_width_sum_check(&t.played, t.tau))
                .collect();
            json!({
                "report": r,
                "within_tolerance": r.within_tolerance(),
                "alpha": policy.alpha,
                "tau": policy.tau,
                "max_delta_ratio": trajs.iter().map(|t| t.max_delta_ratio).fold(0.0, f64::max),
                "width_sum": {
                    "runs_checked": widths.iter().filter(|w| w.applicable).count(),
                    "violations": widths.iter().map(|w| w.violations).sum::<usize>(),
                    "max_ratio": widths.iter().map(|w| w.max_ratio).fold(0.0, f64::max),
                },
            })
        }
    })
}

