//! Synthetic ground truth: context distribution, GLM rewards and regret.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::linalg::{min_eigenvalue, FeatureVector};
use crate::rng::{Purpose, RoundStreams, SeedStreams, StreamRng};

/// Reward noise around the GLM mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    /// `Y ~ Bernoulli(μ(x'θ*))`; logistic link only. Sub-Gaussian with σ = 1/2.
    Bernoulli,
    /// `Y = μ(x'θ*) + N(0, σ²)`. Not clipped.
    Gaussian { sigma: f64 },
}

impl NoiseModel {
    /// Sub-Gaussian scale of the noise.
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::Bernoulli => 0.5,
            NoiseModel::Gaussian { sigma } => *sigma,
        }
    }
}

/// The distribution ν each per-arm context is drawn from, iid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextDistribution {
    /// Uniform on the unit ball; second moment `I/(d+2)`.
    UniformBall,
    /// Uniform on the unit sphere; second moment `I/d`.
    Sphere,
    /// `N(0, I/d)` radially clipped into the unit ball.
    GaussianNormalized,
    /// The same K vectors every round, arm `a` always showing entry `a`.
    Fixed(Vec<FeatureVector>),
}

impl ContextDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            ContextDistribution::UniformBall => "uniform_ball",
            ContextDistribution::Sphere => "sphere",
            ContextDistribution::GaussianNormalized => "gaussian_normalized",
            ContextDistribution::Fixed(_) => "fixed",
        }
    }

    /// Draws one context vector. For `Fixed`, `arm` picks the entry.
    pub fn sample(&self, d: usize, arm: usize, rng: &mut impl Rng) -> FeatureVector {
        match self {
            ContextDistribution::UniformBall => {
                let dir = gaussian_direction(d, rng);
                let u: f64 = rng.random();
                FeatureVector::from_unit_ball(dir * u.powf(1.0 / d as f64))
            }
            ContextDistribution::Sphere => FeatureVector::from_unit_ball(gaussian_direction(d, rng)),
            ContextDistribution::GaussianNormalized => {
                let g: DVector<f64> =
                    DVector::from_fn(d, |_, _| StandardNormal.sample(rng)) / (d as f64).sqrt();
                let n = g.norm();
                FeatureVector::from_unit_ball(if n > 1.0 { g / n } else { g })
            }
            ContextDistribution::Fixed(list) => list[arm].clone(),
        }
    }

    /// σ₀²: `λ_min(E[(1/K) Σ_a x_a x_a'])`.
    pub fn second_moment_min_eigenvalue(&self, d: usize) -> f64 {
        let df = d as f64;
        match self {
            ContextDistribution::UniformBall => 1.0 / (df + 2.0),
            ContextDistribution::Sphere => 1.0 / df,
            ContextDistribution::GaussianNormalized => {
                // ‖x‖² = min(Q, 1) with Q ~ χ²_d / d, and
                // E[Q; Q ≤ 1] = P(χ²_{d+2} ≤ d).
                let below = ChiSquared::new(df + 2.0).map(|c| c.cdf(df)).unwrap_or(0.0);
                let above = ChiSquared::new(df).map(|c| c.sf(df)).unwrap_or(0.0);
                (below + above) / df
            }
            ContextDistribution::Fixed(list) => {
                let mut m = DMatrix::zeros(d, d);
                for x in list {
                    m += x.as_vector() * x.as_vector().transpose();
                }
                min_eigenvalue(&(m / list.len() as f64)).max(0.0)
            }
        }
    }
}

fn gaussian_direction(d: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let g: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// How θ* is chosen for a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaStar {
    Given(Vec<f64>),
    /// Uniform on the sphere of the given radius.
    RandomSphere { radius: f64 },
}

impl ThetaStar {
    /// The norm of θ*, known without drawing it.
    pub fn norm(&self) -> f64 {
        match self {
            ThetaStar::Given(v) => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            ThetaStar::RandomSphere { radius } => *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub d: usize,
    pub k: usize,
    pub link: LinkFunction,
    pub noise: NoiseModel,
    pub contexts: ContextDistribution,
    pub theta_star: ThetaStar,
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::invalid("d and K must be positive"));
        }
        if matches!(self.noise, NoiseModel::Bernoulli) && self.link != LinkFunction::Logistic {
            return Err(Error::invalid("bernoulli noise requires the logistic link"));
        }
        if let NoiseModel::Gaussian { sigma } = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("gaussian noise sigma must be finite and >= 0"));
            }
        }
        match &self.theta_star {
            ThetaStar::Given(v) if v.len() != self.d => {
                return Err(Error::invalid(format!(
                    "theta_star has {} coordinates, expected d = {}",
                    v.len(),
                    self.d
                )))
            }
            ThetaStar::Given(v) if v.iter().any(|c| !c.is_finite()) => {
                return Err(Error::invalid("theta_star must be finite"))
            }
            ThetaStar::RandomSphere { radius } if !(*radius >= 0.0 && radius.is_finite()) => {
                return Err(Error::invalid("theta_star_norm must be finite and >= 0"))
            }
            _ => {}
        }
        if let ContextDistribution::Fixed(list) = &self.contexts {
            if list.len() != self.k {
                return Err(Error::invalid(format!(
                    "fixed_contexts has {} vectors, expected K = {}",
                    list.len(),
                    self.k
                )));
            }
            if list.iter().any(|x| x.dim() != self.d) {
                return Err(Error::invalid("fixed_contexts vectors must have length d"));
            }
        }
        Ok(())
    }

    pub fn sigma0_squared(&self) -> f64 {
        self.contexts.second_moment_min_eigenvalue(self.d)
    }
}

/// One replication's world. The only holder of θ*.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvironmentConfig,
    theta_star: DVector<f64>,
    contexts: StreamRng,
    rewards: RoundStreams,
}

impl Environment {
    pub fn new(config: EnvironmentConfig, seeds: &SeedStreams) -> Result<Self> {
        config.validate()?;
        let theta_star = match &config.theta_star {
            ThetaStar::Given(v) => DVector::from_vec(v.clone()),
            ThetaStar::RandomSphere { radius } => {
                let mut rng = seeds.stream(Purpose::Instance);
                gaussian_direction(config.d, &mut rng) * *radius
            }
        };
        Ok(Environment {
            theta_star,
            contexts: seeds.stream(Purpose::Contexts),
            rewards: RoundStreams::new(seeds.stream(Purpose::Rewards)),
            config,
        })
    }

    pub fn config(&self) -> &EnvironmentConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn link(&self) -> LinkFunction {
        self.config.link
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    /// Draws the K contexts of the next round.
    pub fn sample_contexts(&mut self) -> Vec<FeatureVector> {
        let d = self.config.d;
        (0..self.config.k)
            .map(|a| self.config.contexts.sample(d, a, &mut self.contexts))
            .collect()
    }

    /// `μ(x'θ*)`.
    pub fn mean_reward(&self, x: &FeatureVector) -> f64 {
        self.config.link.eval(x.dot(&self.theta_star))
    }

    /// Realized reward for playing `x` in round `t`.
    pub fn sample_reward(&mut self, t: usize, x: &FeatureVector) -> f64 {
        let mean = self.mean_reward(x);
        let rng = self.rewards.at_round(t);
        match self.config.noise {
            NoiseModel::Bernoulli => {
                let u: f64 = rng.random();
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sigma * z
            }
        }
    }

    /// Best arm, computed on the linear scale; lowest index on ties.
    pub fn optimal_arm(&self, contexts: &[FeatureVector]) -> usize {
        argmax(contexts.iter().map(|x| x.dot(&self.theta_star)))
    }

    /// `max_a μ(x_a'θ*) − μ(x_chosen'θ*)`.
    pub fn instantaneous_regret(&self, contexts: &[FeatureVector], chosen: usize) -> f64 {
        let best = contexts
            .iter()
            .map(|x| self.mean_reward(x))
            .fold(f64::NEG_INFINITY, f64::max);
        (best - self.mean_reward(&contexts[chosen])).max(0.0)
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(d: usize, k: usize, link: LinkFunction, noise: NoiseModel) -> EnvironmentConfig {
        EnvironmentConfig {
            d,
            k,
            link,
            noise,
            contexts: ContextDistribution::UniformBall,
            theta_star: ThetaStar::RandomSphere { radius: 1.0 },
        }
    }

    fn fv(c: &[f64]) -> FeatureVector {
        FeatureVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn sphere_in_one_dimension_is_plus_minus_one() {
        let mut cfg = config(1, 6, LinkFunction::Identity, NoiseModel::Gaussian { sigma: 1.0 });
        cfg.contexts = ContextDistribution::Sphere;
        let mut env = Environment::new(cfg, &SeedStreams::new(1, 0)).unwrap();
        for _ in 0..50 {
            for x in env.sample_contexts() {
                assert!(x.as_slice()[0] == 1.0 || x.as_slice()[0] == -1.0);
            }
        }
    }

    #[test]
    fn sampled_norms_stay_in_the_unit_ball() {
        for dist in [
            ContextDistribution::UniformBall,
            ContextDistribution::Sphere,
            ContextDistribution::GaussianNormalized,
        ] {
            let mut cfg = config(4, 5, LinkFunction::Logistic, NoiseModel::Bernoulli);
            cfg.contexts = dist;
            let mut env = Environment::new(cfg, &SeedStreams::new(2, 0)).unwrap();
            for _ in 0..2000 {
                for x in env.sample_contexts() {
                    assert!(x.norm() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_ball_second_moment() {
        let d = 3;
        let mut env = Environment::new(
            config(d, 1, LinkFunction::Identity, NoiseModel::Gaussian { sigma: 1.0 }),
            &SeedStreams::new(3, 0),
        )
        .unwrap();
        let n = 100_000;
        let mut m = DMatrix::zeros(d, d);
        for _ in 0..n {
            let x = env.sample_contexts().remove(0);
            m += x.as_vector() * x.as_vector().transpose();
        }
        let lmin = min_eigenvalue(&(m / n as f64));
        assert!((lmin - 0.2).abs() <= 0.02, "λ_min = {lmin}");
    }

    #[test]
    fn gaussian_normalized_second_moment_matches_closed_form() {
        let d = 4;
        let dist = ContextDistribution::GaussianNormalized;
        let mut rng = SeedStreams::new(9, 0).stream(Purpose::Contexts);
        let n = 200_000;
        let mean_sq: f64 =
            (0..n).map(|_| dist.sample(d, 0, &mut rng).norm().powi(2)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(dist.second_moment_min_eigenvalue(d), mean_sq / d as f64, epsilon = 2e-3);
    }

    #[test]
    fn bernoulli_rewards_have_the_glm_mean() {
        let mut cfg = config(1, 1, LinkFunction::Logistic, NoiseModel::Bernoulli);
        cfg.theta_star = ThetaStar::Given(vec![0.0]);
        let mut env = Environment::new(cfg.clone(), &SeedStreams::new(4, 0)).unwrap();
        let x = fv(&[1.0]);
        let n = 100_000;
        let avg: f64 = (0..n).map(|t| env.sample_reward(t, &x)).sum::<f64>() / n as f64;
        assert!((avg - 0.5).abs() <= 0.01);

        cfg.theta_star = ThetaStar::Given(vec![3f64.ln()]);
        let mut env = Environment::new(cfg, &SeedStreams::new(4, 1)).unwrap();
        let rewards: Vec<f64> = (0..n).map(|t| env.sample_reward(t, &x)).collect();
        assert!(rewards.iter().all(|&r| r == 0.0 || r == 1.0));
        let avg = rewards.iter().sum::<f64>() / n as f64;
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((avg - 0.75).abs() <= 0.01);
        assert!((avg - 0.75).abs() <= 3.0 * se);
    }

    #[test]
    fn noiseless_gaussian_reward_is_exact() {
        let mut cfg = config(2, 1, LinkFunction::Identity, NoiseModel::Gaussian { sigma: 0.0 });
        cfg.theta_star = ThetaStar::Given(vec![0.4, -0.2]);
        let mut env = Environment::new(cfg, &SeedStreams::new(5, 0)).unwrap();
        let x = fv(&[0.5, 0.5]);
        assert_eq!(env.sample_reward(0, &x), 0.5 * 0.4 - 0.5 * 0.2);
    }

    #[test]
    fn regret_examples() {
        let mut cfg = config(2, 2, LinkFunction::Identity, NoiseModel::Gaussian { sigma: 1.0 });
        cfg.theta_star = ThetaStar::Given(vec![1.0, 0.0]);
        let env = Environment::new(cfg.clone(), &SeedStreams::new(6, 0)).unwrap();
        let ctx = vec![fv(&[1.0, 0.0]), fv(&[0.0, 1.0])];
        assert_eq!(env.instantaneous_regret(&ctx, 0), 0.0);
        assert_eq!(env.instantaneous_regret(&ctx, 1), 1.0);

        cfg.link = LinkFunction::Logistic;
        let env = Environment::new(cfg, &SeedStreams::new(6, 0)).unwrap();
        let ctx = vec![fv(&[1.0, 0.0]), fv(&[-1.0, 0.0])];
        assert_abs_diff_eq!(env.instantaneous_regret(&ctx, 1), (0.5f64).tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(env.instantaneous_regret(&ctx, 1), 0.46212, epsilon = 1e-5);
    }

    #[test]
    fn linear_and_link_scale_optima_agree() {
        for link in [LinkFunction::Identity, LinkFunction::Logistic, LinkFunction::Probit] {
            let noise = if link == LinkFunction::Logistic {
                NoiseModel::Bernoulli
            } else {
                NoiseModel::Gaussian { sigma: 0.1 }
            };
            let mut env =
                Environment::new(config(3, 7, link, noise), &SeedStreams::new(8, 0)).unwrap();
            for _ in 0..500 {
                let ctx = env.sample_contexts();
                let linear = env.optimal_arm(&ctx);
                let mean_scale = argmax(ctx.iter().map(|x| env.mean_reward(x)));
                assert_eq!(linear, mean_scale);
                assert_eq!(env.instantaneous_regret(&ctx, linear), 0.0);
                for a in 0..ctx.len() {
                    assert!(env.instantaneous_regret(&ctx, a) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = config(2, 2, LinkFunction::Identity, NoiseModel::Bernoulli);
        assert!(Environment::new(bad, &SeedStreams::new(0, 0)).is_err());
        let mut bad = config(2, 2, LinkFunction::Logistic, NoiseModel::Bernoulli);
        bad.theta_star = ThetaStar::Given(vec![1.0]);
        assert!(bad.validate().is_err());
        let mut bad = config(2, 2, LinkFunction::Logistic, NoiseModel::Bernoulli);
        bad.contexts = ContextDistribution::Fixed(vec![fv(&[1.0, 0.0])]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_theta_star_has_the_configured_norm() {
        let env = Environment::new(
            config(5, 2, LinkFunction::Logistic, NoiseModel::Bernoulli),
            &SeedStreams::new(10, 2),
        )
        .unwrap();
        assert_abs_diff_eq!(env.theta_star().norm(), 1.0, epsilon = 1e-12);
    }
}
