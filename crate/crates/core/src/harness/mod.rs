//! Seeded experiments: build environments and policies from a config, run
//! replications in parallel, aggregate regret and write CSV and JSON.
//!
//! Work units are `(variant, replication)` pairs. Each owns its
//! environment, policy and random streams, so outputs depend only on the
//! config and master seed, never on the worker count.

mod config;
mod output;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    Algorithm, ContextKind, DerivedConstants, ExperimentConfig, NoiseKind, TauRuleName,
};
pub use output::{emit_csv, write_summary, SUMMARY_HEADER};

use crate::environment::{argmax, Environment};
use crate::error::{Error, Result};
use crate::linalg::FeatureVector;
use crate::policy::{
    num_stages, Decision, EpsilonGreedy, Policy, PolicyConfig, SupCbGlm, UcbGlm, UniformRandom, UpdateOutcome,
};
use crate::rng::{Purpose, SeedStreams, StreamRng};
use crate::trace::TraceRow;

/// Environment variable bounding the worker count.
pub const THREADS_ENV: &str = "GLM_BANDIT_THREADS";

/// Knows θ* and always plays the best arm.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    theta_star: DVector<f64>,
}

impl OraclePolicy {
    pub fn new(theta_star: DVector<f64>) -> Self {
        OraclePolicy { theta_star }
    }
}

impl Policy for OraclePolicy {
    fn select(&mut self, _t: usize, contexts: &[FeatureVector], _rng: &mut StreamRng) -> Result<Decision> {
        Ok(Decision::plain(argmax(
            contexts.iter().map(|x| x.dot(&self.theta_star)),
        )))
    }

    fn update(
        &mut self,
        _t: usize,
        _contexts: &[FeatureVector],
        _decision: &Decision,
        _reward: f64,
    ) -> Result<UpdateOutcome> {
        Ok(UpdateOutcome {
            mle_converged: true,
        })
    }
}

/// One algorithm under one configuration, labelled for output.
#[derive(Debug, Clone)]
pub struct Variant {
    pub label: String,
    pub algorithm: Algorithm,
    pub config: ExperimentConfig,
}

/// Resolved tuning of a variant, echoed into `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantTuning {
    pub label: String,
    pub algorithm: Algorithm,
    pub constants: DerivedConstants,
    /// `None` for algorithms without α/τ.
    pub policy: Option<PolicyConfig>,
    pub alpha_rule: Option<crate::policy::AlphaRule>,
    pub tau_rule: Option<crate::policy::TauRule>,
    /// True when τ came from the initialization rule with the default
    /// universal constant.
    pub tau_constant_is_default: bool,
    /// SupCB-GLM's S.
    pub num_stages: Option<usize>,
}

impl Variant {
    pub fn new(algorithm: Algorithm, config: ExperimentConfig) -> Self {
        Variant {
            label: algorithm.name().to_string(),
            algorithm,
            config,
        }
    }

    pub fn tuning(&self) -> Result<VariantTuning> {
        let cfg = &self.config;
        let constants = cfg.constants()?;
        let (policy, alpha_rule, tau_rule) = if self.algorithm.is_tuned() {
            let alpha_rule = cfg.alpha_rule_for(self.algorithm);
            let tau_rule = cfg.tau_rule_for(self.algorithm)?;
            let mut pc =
                PolicyConfig::new(alpha_rule, cfg.alpha, tau_rule, &cfg.tuning_inputs()?, cfg.link)?;
            pc.ridge = cfg.ridge;
            pc.validate()?;
            (Some(pc), Some(alpha_rule), Some(tau_rule))
        } else {
            (None, None, None)
        };
        let num_stages = match self.algorithm {
            Algorithm::SupcbGlm => Some(num_stages(cfg.horizon)),
            _ => None,
        };
        Ok(VariantTuning {
            label: self.label.clone(),
            algorithm: self.algorithm,
            constants,
            tau_constant_is_default: matches!(tau_rule, Some(crate::policy::TauRule::Theorem2 { constant })
                if constant == crate::policy::DEFAULT_TAU_CONSTANT),
            policy,
            alpha_rule,
            tau_rule,
            num_stages,
        })
    }

    fn build_policy(&self, tuning: &VariantTuning, env: &Environment) -> Result<Box<dyn Policy>> {
        let cfg = &self.config;
        let plain = || PolicyConfig {
            horizon: cfg.horizon,
            d: cfg.d,
            k: cfg.k,
            alpha: 0.0,
            tau: 0,
            kappa: tuning.constants.kappa,
            sigma: tuning.constants.sigma,
            delta: cfg.delta,
            alpha_rule: crate::policy::AlphaRule::Explicit,
            link: cfg.link,
            ridge: cfg.ridge,
            mle: Default::default(),
        };
        Ok(match self.algorithm {
            Algorithm::UcbGlm => Box::new(UcbGlm::new(tuning.policy.clone().expect("tuned"))?),
            Algorithm::SupcbGlm => Box::new(SupCbGlm::new(tuning.policy.clone().expect("tuned"))?),
            Algorithm::UniformRandom => Box::new(UniformRandom::new(cfg.k)?),
            Algorithm::EpsilonGreedy => Box::new(EpsilonGreedy::new(&plain(), cfg.epsilon)?),
            Algorithm::PureGreedy => Box::new(EpsilonGreedy::new(&plain(), 0.0)?),
            Algorithm::Oracle => Box::new(OraclePolicy::new(env.theta_star().clone())),
        })
    }
}

/// Trace of one replication. Cumulative regret is accumulated every round
/// even when rows are thinned.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub final_regret: f64,
    /// Rounds whose selection or update hit the MLE iteration cap.
    pub nonconverged_rounds: usize,
}

/// Plays `horizon` rounds of `policy` in `env`, recording every
/// `record_every`-th round and the last one. `after_round` sees the policy
/// after each update along with that round's decision.
pub fn simulate<P: Policy + ?Sized>(
    env: &mut Environment,
    policy: &mut P,
    horizon: usize,
    record_every: usize,
    rng: &mut StreamRng,
    mut after_round: impl FnMut(usize, &P, &Decision, &TraceRow),
) -> Result<RunTrace> {
    let mut rows = Vec::with_capacity(horizon / record_every.max(1) + 1);
    let mut cum = 0.0;
    let mut nonconverged = 0;
    for t in 1..=horizon {
        let contexts = env.sample_contexts();
        let optimal = env.optimal_arm(&contexts);
        let decision = policy.select(t, &contexts, rng)?;
        let reward = env.sample_reward(t, &contexts[decision.arm]);
        let inst = env.instantaneous_regret(&contexts, decision.arm);
        cum += inst;
        let outcome = policy.update(t, &contexts, &decision, reward)?;
        let converged = decision.mle_converged && outcome.mle_converged;
        if !converged {
            nonconverged += 1;
        }
        let row = TraceRow {
            t,
            arm: decision.arm,
            optimal_arm: optimal,
            reward,
            inst_regret: inst,
            cum_regret: cum,
            mle_converged: converged,
            stage: decision.stage,
        };
        after_round(t, policy, &decision, &row);
        if t % record_every == 0 || t == horizon {
            rows.push(row);
        }
    }
    Ok(RunTrace {
        rows,
        final_regret: cum,
        nonconverged_rounds: nonconverged,
    })
}

/// Runs replication `rep` of `variant`.
pub fn run_replication(variant: &Variant, tuning: &VariantTuning, rep: usize) -> Result<RunTrace> {
    let cfg = &variant.config;
    let seeds = SeedStreams::new(cfg.master_seed, rep as u64);
    let mut env = Environment::new(cfg.environment()?, &seeds)?;
    let mut policy = variant.build_policy(tuning, &env)?;
    let mut rng = seeds.stream(Purpose::Policy);
    simulate(
        &mut env,
        policy.as_mut(),
        cfg.horizon,
        cfg.record_every,
        &mut rng,
        |_, _, _, _| {},
    )
}

/// Cross-replication statistics at one recorded round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub t: usize,
    pub mean_cum_regret: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for one replication).
    pub std_cum_regret: f64,
    pub min: f64,
    pub max: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub tuning: VariantTuning,
    /// Indexed by replication.
    pub traces: Vec<RunTrace>,
    pub summary: Vec<SummaryRow>,
}

impl VariantResult {
    pub fn label(&self) -> &str {
        &self.tuning.label
    }

    /// Mean final cumulative regret.
    pub fn mean_final_regret(&self) -> f64 {
        self.traces.iter().map(|r| r.final_regret).sum::<f64>() / self.traces.len() as f64
    }

    pub fn nonconverged_rounds(&self) -> usize {
        self.traces.iter().map(|r| r.nonconverged_rounds).sum()
    }

    /// Mean cumulative regret at recorded round `t`, if recorded.
    pub fn mean_regret_at(&self, t: usize) -> Option<f64> {
        self.summary.iter().find(|s| s.t == t).map(|s| s.mean_cum_regret)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub variants: Vec<VariantResult>,
}

impl ExperimentResult {
    pub fn variant(&self, label: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.label() == label)
    }
}

/// Aggregates traces recorded on the same rounds.
pub fn aggregate(label: &str, traces: &[RunTrace]) -> Vec<SummaryRow> {
    let n = traces.len();
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    (0..first.rows.len())
        .map(|i| {
            let vals: Vec<f64> = traces.iter().map(|r| r.rows[i].cum_regret).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SummaryRow {
                algorithm: label.to_string(),
                t: first.rows[i].t,
                mean_cum_regret: mean,
                std_cum_regret: var.sqrt(),
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n_reps: n,
            }
        })
        .collect()
}

/// Worker count from `GLM_BANDIT_THREADS`, or the available parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::invalid(format!(
                "{THREADS_ENV} must be an integer >= 1, got {s:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every variant for every replication on `workers` threads.
pub fn run_variants(variants: &[Variant], workers: usize) -> Result<Vec<VariantResult>> {
    let tunings = variants
        .iter()
        .map(Variant::tuning)
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, usize)> = variants
        .iter()
        .enumerate()
        .flat_map(|(v, var)| (0..var.config.replications).map(move |r| (v, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    // `collect` keeps unit order, so results line up with `units`.
    let traces: Vec<RunTrace> = pool.install(|| {
        units
            .par_iter()
            .map(|&(v, r)| run_replication(&variants[v], &tunings[v], r))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut traces = traces.into_iter();
    Ok(variants
        .iter()
        .zip(tunings)
        .map(|(var, tuning)| {
            let runs: Vec<RunTrace> = traces.by_ref().take(var.config.replications).collect();
            let summary = aggregate(&var.label, &runs);
            VariantResult {
                tuning,
                traces: runs,
                summary,
            }
        })
        .collect())
}

/// One variant per configured algorithm.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    config.validate()?;
    let variants: Vec<Variant> = config
        .algorithms
        .iter()
        .map(|&a| Variant::new(a, config.clone()))
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        variants: run_variants(&variants, workers)?,
    })
}

/// One variant per (algorithm, value), labelled `<alg>@<param>=<value>`.
pub fn sweep(
    config: &ExperimentConfig,
    param: &str,
    values: &[String],
    workers: usize,
) -> Result<ExperimentResult> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let mut variants = Vec::new();
    for v in values {
        let cfg = config.with_param(param, v)?;
        for &a in &cfg.algorithms {
            variants.push(Variant {
                label: format!("{}@{param}={v}", a.name()),
                algorithm: a,
                config: cfg.clone(),
            });
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        variants: run_variants(&variants, workers)?,
    })
}
