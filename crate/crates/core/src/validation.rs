//! Monte Carlo checks of the finite-sample confidence statements.
//!
//! Each check replays seeded replications and counts how often an
//! inequality held. A report's coverage is compared with its nominal level
//! up to 3 binomial standard errors; a single probe set or horizon can only
//! falsify a statement, never prove it.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{invert_spd, DesignState, Observation};
use crate::environment::{ContextDistribution, Environment, EnvironmentConfig, NoiseModel, ThetaStar};
use crate::error::{Error, Result};
use crate::harness::simulate;
use crate::link::{compute_kappa, LinkFunction};
use crate::linalg::{min_eigenvalue, quadratic_form, FeatureVector};
use crate::mle::{mle_fit, MleOptions};
use crate::policy::{PolicyConfig, UcbGlm};
use crate::rng::{Purpose, SeedStreams};

/// Absolute round-off allowance when comparing an error with its bound.
pub const BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub check: String,
    /// Replications that entered the coverage count.
    pub replications: usize,
    pub hits: usize,
    pub empirical_coverage: f64,
    pub nominal: f64,
    /// True iff the precondition held on every counted replication.
    pub condition_satisfied: bool,
    pub condition_met_replications: usize,
    /// Replications dropped because an MLE hit its iteration cap.
    pub nonconvergent: usize,
    /// `√(p(1 − p)/n)` at the nominal level p.
    pub binomial_stderr: f64,
}

impl CoverageReport {
    fn new(check: &str, hits: usize, replications: usize, nominal: f64) -> Self {
        let n = replications.max(1) as f64;
        CoverageReport {
            check: check.to_string(),
            replications,
            hits,
            empirical_coverage: if replications == 0 { 0.0 } else { hits as f64 / n },
            nominal,
            condition_satisfied: true,
            condition_met_replications: replications,
            nonconvergent: 0,
            binomial_stderr: (nominal * (1.0 - nominal) / n).sqrt(),
        }
    }

    /// `coverage ≥ nominal − 3·SE`.
    pub fn within_tolerance(&self) -> bool {
        self.replications > 0
            && self.empirical_coverage >= self.nominal - 3.0 * self.binomial_stderr
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// A fixed-design sample: `n` iid contexts with GLM rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub link: LinkFunction,
    pub d: usize,
    pub n: usize,
    pub noise: NoiseModel,
    pub theta_star: Vec<f64>,
    pub contexts: ContextDistribution,
    pub delta: f64,
    pub replications: usize,
    pub master_seed: u64,
}

impl SampleSpec {
    fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n < self.d {
            return Err(Error::invalid(format!("need n >= d, got n = {} and d = {}", self.n, self.d)));
        }
        self.environment().validate()
    }

    fn environment(&self) -> EnvironmentConfig {
        EnvironmentConfig {
            d: self.d,
            k: 1,
            link: self.link,
            noise: self.noise,
            contexts: self.contexts.clone(),
            theta_star: ThetaStar::Given(self.theta_star.clone()),
        }
    }

    /// Draws replication `rep`'s observations.
    pub fn draw(&self, rep: usize) -> Result<(Environment, Vec<Observation>)> {
        let mut env = Environment::new(self.environment(), &SeedStreams::new(self.master_seed, rep as u64))?;
        let obs = (1..=self.n)
            .map(|t| {
                let x = env.sample_contexts().pop().expect("K = 1");
                let y = env.sample_reward(t, &x);
                Observation { x, y }
            })
            .collect();
        Ok((env, obs))
    }

    pub fn kappa(&self) -> f64 {
        compute_kappa(self.link, self.theta_star.iter().map(|c| c * c).sum::<f64>().sqrt())
    }
}

/// The standard basis followed by `random` seeded unit vectors.
pub fn probe_directions(d: usize, random: usize, master_seed: u64) -> Vec<FeatureVector> {
    let mut rng = SeedStreams::new(master_seed, 0).stream(Purpose::Validation);
    (0..d)
        .map(|i| FeatureVector::basis(d, i))
        .chain((0..random).map(|_| ContextDistribution::Sphere.sample(d, 0, &mut rng)))
        .collect()
}

/// The λ_min(V_n) needed before the normality bound applies. For the
/// identity link the curvature term vanishes and the consistency threshold
/// `16σ²(d + log(1/δ))/κ²` is used instead.
pub fn theorem1_eigen_condition(link: LinkFunction, d: usize, sigma: f64, kappa: f64, delta: f64) -> f64 {
    let log_inv = (1.0 / delta).ln();
    if link == LinkFunction::Identity {
        16.0 * sigma * sigma * (d as f64 + log_inv) / (kappa * kappa)
    } else {
        let m = link.curvature_bound();
        512.0 * m * m * sigma * sigma / kappa.powi(4) * ((d * d) as f64 + log_inv)
    }
}

/// Outcome of one replication of [`theorem1_coverage`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Replication {
    pub hit_all: bool,
    /// Hit on the standard-basis probes only.
    pub hit_basis: bool,
    pub condition_met: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub coverage: CoverageReport,
    pub basis_hits: usize,
    pub directions: usize,
    pub eigen_threshold: f64,
    pub replications: Vec<Theorem1Replication>,
}

/// Per replication: fit the MLE on `n` iid draws and test
/// `|x'(θ̂ − θ*)| ≤ (3σ/κ)√log(1/δ)·‖x‖_{V^{-1}}` on every probe direction.
/// The first `d` directions are taken as the basis probes.
pub fn theorem1_coverage(
    spec: &SampleSpec,
    directions: &[FeatureVector],
    workers: usize,
) -> Result<Theorem1Report> {
    spec.validate()?;
    if directions.iter().any(|x| x.dim() != spec.d) {
        return Err(Error::invalid("probe directions must have length d"));
    }
    let sigma = spec.noise.sigma();
    let kappa = spec.kappa();
    let radius = 3.0 * sigma / kappa * (1.0 / spec.delta).ln().sqrt();
    let threshold = theorem1_eigen_condition(spec.link, spec.d, sigma, kappa, spec.delta);
    let theta_star = DVector::from_vec(spec.theta_star.clone());

    let one = |rep: usize| -> Result<Theorem1Replication> {
        let (_, obs) = spec.draw(rep)?;
        let design = DesignState::from_observations(spec.d, 0.0, obs.iter().cloned());
        let condition_met = design.min_eigenvalue() >= threshold;
        let fit = mle_fit(spec.link, &obs, &DVector::zeros(spec.d), &MleOptions::default())?;
        let v_inv = design.inverse().ok_or_else(|| Error::SingularDesign {
            min_eigenvalue: design.min_eigenvalue(),
        })?;
        let delta = &fit.theta_hat - &theta_star;
        let holds = |x: &FeatureVector| {
            x.dot(&delta).abs() <= radius * quadratic_form(x.as_vector(), v_inv).max(0.0).sqrt() + BOUND_SLACK
        };
        Ok(Theorem1Replication {
            hit_all: directions.iter().all(holds),
            hit_basis: directions.iter().take(spec.d).all(holds),
            condition_met,
            converged: fit.converged,
        })
    };
    let reps: Vec<Theorem1Replication> = pool(workers)?
        .install(|| (0..spec.replications).into_par_iter().map(one).collect::<Result<_>>())?;

    let counted: Vec<_> = reps.iter().filter(|r| r.converged).collect();
    let hits = counted.iter().filter(|r| r.hit_all).count();
    let mut coverage = CoverageReport::new("theorem1", hits, counted.len(), 1.0 - 3.0 * spec.delta);
    coverage.nonconvergent = reps.len() - counted.len();
    coverage.condition_met_replications = counted.iter().filter(|r| r.condition_met).count();
    coverage.condition_satisfied = coverage.condition_met_replications == counted.len();
    Ok(Theorem1Report {
        basis_hits: counted.iter().filter(|r| r.hit_basis).count(),
        directions: directions.len(),
        eigen_threshold: threshold,
        coverage,
        replications: reps,
    })
}

/// Order statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Quantiles {
            min: v[0],
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub n: usize,
    pub lambda_min: Quantiles,
    /// Quantiles of `λ_min(V_n)/n`; absent at n = 0.
    pub ratio: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub distribution: String,
    pub d: usize,
    pub replications: usize,
    /// λ_min of the per-context second moment.
    pub sigma_min: f64,
    pub points: Vec<GrowthPoint>,
    /// Median ratio at the largest n within 10% of `sigma_min`.
    pub linear_growth_ok: bool,
    /// λ_min(V_n) never decreased along a sample path.
    pub monotone_paths: bool,
}

/// Empirical λ_min(V_n) on iid contexts at every n of an increasing grid.
pub fn proposition1_growth(
    dist: &ContextDistribution,
    d: usize,
    n_grid: &[usize],
    replications: usize,
    master_seed: u64,
    workers: usize,
) -> Result<GrowthReport> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_grid must be nonempty and strictly increasing"));
    }
    if replications == 0 || d == 0 {
        return Err(Error::invalid("replications and d must be positive"));
    }
    let path = |rep: usize| -> Vec<f64> {
        let mut rng = SeedStreams::new(master_seed, rep as u64).stream(Purpose::Contexts);
        let mut v = DMatrix::zeros(d, d);
        let mut drawn = 0;
        n_grid
            .iter()
            .map(|&n| {
                while drawn < n {
                    let x = dist.sample(d, 0, &mut rng);
                    v.ger(1.0, x.as_vector(), x.as_vector(), 1.0);
                    drawn += 1;
                }
                if n == 0 {
                    0.0
                } else {
                    min_eigenvalue(&v)
                }
            })
            .collect()
    };
    let paths: Vec<Vec<f64>> =
        pool(workers)?.install(|| (0..replications).into_par_iter().map(path).collect());

    let monotone_paths = paths
        .iter()
        .all(|p| p.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0)));
    let points: Vec<GrowthPoint> = n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let lam: Vec<f64> = paths.iter().map(|p| p[i]).collect();
            GrowthPoint {
                n,
                lambda_min: Quantiles::of(&lam),
                ratio: (n > 0).then(|| {
                    Quantiles::of(&lam.iter().map(|l| l / n as f64).collect::<Vec<_>>())
                }),
            }
        })
        .collect();
    let sigma_min = dist.second_moment_min_eigenvalue(d);
    let last = points.last().and_then(|p| p.ratio).map(|q| q.median);
    Ok(GrowthReport {
        distribution: dist.name().to_string(),
        d,
        replications,
        sigma_min,
        linear_growth_ok: last.is_some_and(|m| (m - sigma_min).abs() <= 0.1 * sigma_min),
        monotone_paths,
        points,
    })
}

/// Right side of the `‖θ̂_t − θ*‖_{V_t}` bound at round index t.
pub fn lemma4_radius(sigma: f64, kappa: f64, d: usize, t: usize, delta: f64) -> f64 {
    let df = d as f64;
    sigma / kappa * ((df / 2.0) * (1.0 + 2.0 * t as f64 / df).ln() + (1.0 / delta).ln()).sqrt()
}

/// `√(2nd·log((n + m)/d))`.
pub fn lemma3_bound(n: usize, m: usize, d: usize) -> f64 {
    (2.0 * (n * d) as f64 * ((n + m) as f64 / d as f64).ln()).sqrt()
}

/// One logged UCB-GLM run.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbTrajectory {
    pub tau: usize,
    /// λ_min(V_{τ+1}).
    pub lambda_min_after_init: f64,
    /// Bound held at every round index t ≥ τ + 1.
    pub delta_hit: bool,
    /// Largest `‖Δ_t‖_{V_t}` over its bound.
    pub max_delta_ratio: f64,
    pub nonconverged_rounds: usize,
    /// Played contexts X_1..X_T.
    pub played: Vec<FeatureVector>,
}

/// Runs UCB-GLM `replications` times and checks `‖θ̂_t − θ*‖_{V_t}`
/// against its radius after every update, using the known θ*.
///
/// `sigma`, `kappa` and `delta` are those of the radius; the policy keeps its
/// own tuning in `policy`.
pub fn ucb_glm_trajectories(
    env: &EnvironmentConfig,
    policy: &PolicyConfig,
    replications: usize,
    master_seed: u64,
    radius: (f64, f64, f64),
    workers: usize,
) -> Result<Vec<UcbTrajectory>> {
    let (sigma, kappa, delta) = radius;
    check_delta(delta)?;
    let one = |rep: usize| -> Result<UcbTrajectory> {
        let seeds = SeedStreams::new(master_seed, rep as u64);
        let mut e = Environment::new(env.clone(), &seeds)?;
        let theta_star = e.theta_star().clone();
        let mut p = UcbGlm::new(policy.clone())?;
        let mut rng = seeds.stream(Purpose::Policy);
        let mut played = Vec::with_capacity(policy.horizon);
        let mut hit = true;
        let mut max_ratio: f64 = 0.0;
        let mut lambda_init = 0.0;
        let tau = policy.tau;
        let trace = simulate(&mut e, &mut p, policy.horizon, policy.horizon, &mut rng, |t, p: &UcbGlm, _, _| {
            // The state now holds V_{t+1} and θ̂_{t+1}.
            let x = p.design().observations().last().expect("just updated").x.clone();
            played.push(x);
            if t == tau {
                lambda_init = p.design().min_eigenvalue();
            }
            if let (Some(th), true) = (p.theta_hat(), t >= tau) {
                let diff = th - &theta_star;
                let norm = quadratic_form(&diff, p.design().gram()).max(0.0).sqrt();
                let r = lemma4_radius(sigma, kappa, env.d, t + 1, delta);
                max_ratio = max_ratio.max(norm / r);
                if norm > r + BOUND_SLACK {
                    hit = false;
                }
            }
        })?;
        Ok(UcbTrajectory {
            tau,
            lambda_min_after_init: lambda_init,
            delta_hit: hit,
            max_delta_ratio: max_ratio,
            nonconverged_rounds: trace.nonconverged_rounds,
            played,
        })
    };
    pool(workers)?.install(|| (0..replications).into_par_iter().map(one).collect())
}

/// Coverage of the all-t event over trajectories with λ_min(V_{τ+1}) ≥ 1.
pub fn lemma4_event_coverage(trajectories: &[UcbTrajectory], delta: f64) -> CoverageReport {
    let counted: Vec<_> = trajectories
        .iter()
        .filter(|t| t.lambda_min_after_init >= 1.0 && t.nonconverged_rounds == 0)
        .collect();
    let hits = counted.iter().filter(|t| t.delta_hit).count();
    let mut r = CoverageReport::new("lemma4", hits, counted.len(), 1.0 - delta);
    r.nonconvergent = trajectories.iter().filter(|t| t.nonconverged_rounds > 0).count();
    r.condition_met_replications = trajectories
        .iter()
        .filter(|t| t.lambda_min_after_init >= 1.0)
        .count();
    r.condition_satisfied = r.condition_met_replications == trajectories.len();
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthSumReport {
    /// False when λ_min(V_{m+1}) < 1 and nothing was checked.
    pub applicable: bool,
    pub checked: usize,
    pub violations: usize,
    /// Largest sum over its bound.
    pub max_ratio: f64,
}

/// Checks `Σ_{t=m+1}^{m+n} ‖X_t‖_{V_t^{-1}} ≤ √(2nd·log((n+m)/d))` for every
/// n, where `V_t = Σ_{s<t} X_s X_s'` is rebuilt from `played`.
pub fn lemma3_width_sum_check(played: &[FeatureVector], m: usize) -> WidthSumReport {
    let d = played.first().map_or(0, FeatureVector::dim);
    let mut v = DMatrix::zeros(d, d);
    for x in &played[..m.min(played.len())] {
        v.ger(1.0, x.as_vector(), x.as_vector(), 1.0);
    }
    if d == 0 || min_eigenvalue(&v) < 1.0 {
        return WidthSumReport {
            applicable: false,
            checked: 0,
            violations: 0,
            max_ratio: 0.0,
        };
    }
    let mut v_inv = invert_spd(&v).expect("λ_min ≥ 1");
    let mut sum = 0.0;
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for (i, x) in played[m..].iter().enumerate() {
        let xv = x.as_vector();
        let q = quadratic_form(xv, &v_inv).max(0.0);
        sum += q.sqrt();
        let bound = lemma3_bound(i + 1, m, d);
        max_ratio = max_ratio.max(sum / bound);
        if sum > bound + BOUND_SLACK {
            violations += 1;
        }
        let u = &v_inv * xv;
        v_inv.ger(-1.0 / (1.0 + q), &u, &u, 1.0);
    }
    WidthSumReport {
        applicable: true,
        checked: played.len() - m,
        violations,
        max_ratio,
    }
}

/// `‖Z‖_{V^{-1}} ≤ 4σ√(d + log(1/δ))` for `Z = Σ ε_i X_i`.
pub fn znorm_hit(z: &DVector<f64>, v: &DMatrix<f64>, sigma: f64, delta: f64) -> Result<bool> {
    let v_inv = invert_spd(v).ok_or_else(|| Error::SingularDesign {
        min_eigenvalue: min_eigenvalue(v),
    })?;
    let lhs = quadratic_form(z, &v_inv).max(0.0).sqrt();
    let rhs = 4.0 * sigma * (z.len() as f64 + (1.0 / delta).ln()).sqrt();
    Ok(lhs <= rhs + BOUND_SLACK)
}

/// Per replication: `Z = Σ ε_i X_i` with the realized noise of `n` iid draws.
pub fn znorm_bound_check(spec: &SampleSpec, workers: usize) -> Result<CoverageReport> {
    spec.validate()?;
    let sigma = spec.noise.sigma();
    let one = |rep: usize| -> Result<bool> {
        let (env, obs) = spec.draw(rep)?;
        let mut z = DVector::zeros(spec.d);
        let mut v = DMatrix::zeros(spec.d, spec.d);
        for o in &obs {
            let eps = o.y - env.mean_reward(&o.x);
            z.axpy(eps, o.x.as_vector(), 1.0);
            v.ger(1.0, o.x.as_vector(), o.x.as_vector(), 1.0);
        }
        znorm_hit(&z, &v, sigma, spec.delta)
    };
    let hits: Vec<bool> = pool(workers)?
        .install(|| (0..spec.replications).into_par_iter().map(one).collect::<Result<_>>())?;
    Ok(CoverageReport::new(
        "znorm",
        hits.iter().filter(|&&h| h).count(),
        hits.len(),
        1.0 - spec.delta,
    ))
}
