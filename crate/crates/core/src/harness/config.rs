//! The flat JSON experiment file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::{ContextDistribution, EnvironmentConfig, NoiseModel, ThetaStar};
use crate::error::{Error, Result};
use crate::link::{compute_kappa, LinkFunction};
use crate::linalg::FeatureVector;
use crate::policy::{AlphaRule, TauRule, TuningInputs, DEFAULT_TAU_CONSTANT};

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    UcbGlm,
    SupcbGlm,
    UniformRandom,
    EpsilonGreedy,
    PureGreedy,
    /// Plays the best arm under θ*; regret is zero by construction.
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::UcbGlm,
        Algorithm::SupcbGlm,
        Algorithm::UniformRandom,
        Algorithm::EpsilonGreedy,
        Algorithm::PureGreedy,
        Algorithm::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::UcbGlm => "ucb_glm",
            Algorithm::SupcbGlm => "supcb_glm",
            Algorithm::UniformRandom => "uniform_random",
            Algorithm::EpsilonGreedy => "epsilon_greedy",
            Algorithm::PureGreedy => "pure_greedy",
            Algorithm::Oracle => "oracle",
        }
    }

    /// Whether α and τ mean anything for this algorithm.
    pub fn is_tuned(self) -> bool {
        matches!(self, Algorithm::UcbGlm | Algorithm::SupcbGlm)
    }

    fn default_alpha_rule(self) -> AlphaRule {
        match self {
            Algorithm::SupcbGlm => AlphaRule::Theorem3,
            _ => AlphaRule::Theorem2,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::invalid(format!("unknown algorithm {s:?} (known: {})", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRuleName {
    Explicit,
    Theorem2,
    Theorem3,
    Theorem4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Bernoulli,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    UniformBall,
    Sphere,
    GaussianNormalized,
    Fixed,
}

fn one() -> usize {
    1
}
fn default_link() -> LinkFunction {
    LinkFunction::Logistic
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::UcbGlm]
}
fn default_norm() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.05
}
fn default_tau_constant() -> f64 {
    DEFAULT_TAU_CONSTANT
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_directions() -> usize {
    100
}
fn default_out() -> PathBuf {
    PathBuf::from("glm-bandit-out")
}

/// Every knob of an experiment or validation run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub horizon: usize,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_link")]
    pub link: LinkFunction,
    /// Defaults to bernoulli for the logistic link and gaussian otherwise.
    #[serde(default)]
    pub noise: Option<NoiseKind>,
    /// Gaussian noise scale (default 0.5). Fixed at 1/2 for bernoulli.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub context_dist: Option<ContextKind>,
    #[serde(default)]
    pub fixed_contexts: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default = "default_norm")]
    pub theta_star_norm: f64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub alpha_rule: Option<AlphaRule>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tau: Option<usize>,
    #[serde(default)]
    pub tau_rule: Option<TauRuleName>,
    #[serde(default = "default_tau_constant")]
    pub tau_constant: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Overrides `μ̇(‖θ*‖ + 1)`.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Overrides the σ₀² of the context distribution.
    #[serde(default)]
    pub sigma0_sq: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Sample size for the fixed-design validation checks.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_directions")]
    pub random_directions: usize,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
}

/// Problem constants after defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub sigma: f64,
    pub kappa: f64,
    pub kappa_from_config: bool,
    pub sigma0_sq: f64,
    pub sigma0_sq_from_config: bool,
    pub lipschitz: f64,
    pub curvature: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::invalid(format!("{}: {e}", path.display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.horizon == 0 {
            return Err(Error::invalid("d, k and horizon must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms must name at least one algorithm"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must lie in [0, 1]"));
        }
        if self.tau_rule == Some(TauRuleName::Explicit) && self.tau.is_none() {
            return Err(Error::invalid("tau_rule explicit needs tau"));
        }
        if self.alpha_rule == Some(AlphaRule::Explicit) && self.alpha.is_none() {
            return Err(Error::invalid("alpha_rule explicit needs alpha"));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid("kappa must be positive"));
            }
        }
        self.environment()?.validate()
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        let kind = self.noise.unwrap_or(if self.link == LinkFunction::Logistic {
            NoiseKind::Bernoulli
        } else {
            NoiseKind::Gaussian
        });
        match kind {
            NoiseKind::Bernoulli => match self.sigma {
                Some(s) if s != 0.5 => Err(Error::invalid(
                    "bernoulli noise has sigma = 0.5; remove the sigma key or use gaussian noise",
                )),
                _ => Ok(NoiseModel::Bernoulli),
            },
            NoiseKind::Gaussian => Ok(NoiseModel::Gaussian {
                sigma: self.sigma.unwrap_or(0.5),
            }),
        }
    }

    pub fn context_distribution(&self) -> Result<ContextDistribution> {
        let kind = self.context_dist.unwrap_or(if self.fixed_contexts.is_some() {
            ContextKind::Fixed
        } else {
            ContextKind::UniformBall
        });
        Ok(match kind {
            ContextKind::UniformBall => ContextDistribution::UniformBall,
            ContextKind::Sphere => ContextDistribution::Sphere,
            ContextKind::GaussianNormalized => ContextDistribution::GaussianNormalized,
            ContextKind::Fixed => {
                let list = self
                    .fixed_contexts
                    .as_ref()
                    .ok_or_else(|| Error::invalid("context_dist fixed needs fixed_contexts"))?;
                ContextDistribution::Fixed(
                    list.iter()
                        .map(|v| FeatureVector::new(v.clone()))
                        .collect::<Result<_>>()?,
                )
            }
        })
    }

    pub fn environment(&self) -> Result<EnvironmentConfig> {
        Ok(EnvironmentConfig {
            d: self.d,
            k: self.k,
            link: self.link,
            noise: self.noise()?,
            contexts: self.context_distribution()?,
            theta_star: match &self.theta_star {
                Some(v) => ThetaStar::Given(v.clone()),
                None => ThetaStar::RandomSphere {
                    radius: self.theta_star_norm,
                },
            },
        })
    }

    pub fn constants(&self) -> Result<DerivedConstants> {
        let env = self.environment()?;
        Ok(DerivedConstants {
            sigma: env.noise.sigma(),
            kappa: self
                .kappa
                .unwrap_or_else(|| compute_kappa(self.link, env.theta_star.norm())),
            kappa_from_config: self.kappa.is_some(),
            sigma0_sq: self.sigma0_sq.unwrap_or_else(|| env.sigma0_squared()),
            sigma0_sq_from_config: self.sigma0_sq.is_some(),
            lipschitz: self.link.lipschitz_bound(),
            curvature: self.link.curvature_bound(),
        })
    }

    pub fn tuning_inputs(&self) -> Result<TuningInputs> {
        let c = self.constants()?;
        Ok(TuningInputs {
            horizon: self.horizon,
            d: self.d,
            k: self.k,
            delta: self.delta,
            sigma: c.sigma,
            kappa: c.kappa,
            lipschitz: c.lipschitz,
            sigma0_sq: c.sigma0_sq,
        })
    }

    /// α rule for `alg`: the configured one, explicit when only `alpha` is
    /// given, else the algorithm's own default.
    pub fn alpha_rule_for(&self, alg: Algorithm) -> AlphaRule {
        match (self.alpha_rule, self.alpha) {
            (Some(r), _) => r,
            (None, Some(_)) => AlphaRule::Explicit,
            (None, None) => alg.default_alpha_rule(),
        }
    }

    /// τ rule for `alg`, resolved the same way as [`Self::alpha_rule_for`].
    pub fn tau_rule_for(&self, alg: Algorithm) -> Result<TauRule> {
        let name = match (self.tau_rule, self.tau) {
            (Some(r), _) => r,
            (None, Some(_)) => TauRuleName::Explicit,
            (None, None) if alg == Algorithm::SupcbGlm => TauRuleName::Theorem3,
            (None, None) => TauRuleName::Theorem2,
        };
        Ok(match name {
            TauRuleName::Explicit => TauRule::Explicit(
                self.tau
                    .ok_or_else(|| Error::invalid("tau_rule explicit needs tau"))?,
            ),
            TauRuleName::Theorem2 => TauRule::Theorem2 {
                constant: self.tau_constant,
            },
            TauRuleName::Theorem3 => TauRule::Theorem3,
            TauRuleName::Theorem4 => TauRule::Theorem4,
        })
    }

    /// Returns a copy with the top-level key `param` replaced by `value`,
    /// parsed as JSON when possible and as a string otherwise.
    pub fn with_param(&self, param: &str, value: &str) -> Result<Self> {
        let mut obj = serde_json::to_value(self).expect("config serializes");
        let map = obj.as_object_mut().expect("config is an object");
        if !map.contains_key(param) {
            return Err(Error::invalid(format!("unknown sweep parameter {param:?}")));
        }
        let parsed = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        map.insert(param.to_string(), parsed);
        if param == "alpha" {
            map.insert("alpha_rule".into(), serde_json::json!("explicit"));
        }
        if param == "tau" {
            map.insert("tau_rule".into(), serde_json::json!("explicit"));
        }
        let cfg: ExperimentConfig = serde_json::from_value(obj)
            .map_err(|e| Error::invalid(format!("{param}={value}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(s, Path::new("test.json"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(r#"{"d": 3, "k": 4, "horizon": 100}"#).unwrap();
        assert_eq!(c.replications, 1);
        assert_eq!(c.link, LinkFunction::Logistic);
        assert_eq!(c.noise().unwrap(), NoiseModel::Bernoulli);
        assert_eq!(c.algorithms, vec![Algorithm::UcbGlm]);
        assert_eq!(c.alpha_rule_for(Algorithm::UcbGlm), AlphaRule::Theorem2);
        assert_eq!(c.alpha_rule_for(Algorithm::SupcbGlm), AlphaRule::Theorem3);
        assert_eq!(c.tau_rule_for(Algorithm::SupcbGlm).unwrap(), TauRule::Theorem3);
        let k = c.constants().unwrap();
        assert!((k.kappa - 0.104994).abs() < 1e-6);
        assert!((k.sigma0_sq - 0.2).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse(r#"{"d": 3, "k": 4, "horizon": 100, "alpah": 1}"#).unwrap_err();
        assert!(matches!(e, Error::InvalidConfig(ref m) if m.contains("alpah")));
    }

    #[test]
    fn invalid_combinations() {
        for bad in [
            r#"{"d": 3, "k": 4, "horizon": 100, "replications": 0}"#,
            r#"{"d": 3, "k": 4, "horizon": 100, "link": "identity", "noise": "bernoulli"}"#,
            r#"{"d": 3, "k": 4, "horizon": 100, "sigma": 1.0}"#,
            r#"{"d": 2, "k": 2, "horizon": 10, "context_dist": "fixed"}"#,
            r#"{"d": 2, "k": 2, "horizon": 10, "theta_star": [1, 0, 0]}"#,
            r#"{"d": 2, "k": 2, "horizon": 10, "algorithms": ["linucb"]}"#,
            r#"{"d": 2, "k": 2, "horizon": 10, "record_every": 0}"#,
        ] {
            assert!(matches!(parse(bad), Err(Error::InvalidConfig(_))), "{bad}");
        }
    }

    #[test]
    fn explicit_alpha_wins_without_a_rule() {
        let c = parse(r#"{"d": 2, "k": 2, "horizon": 10, "alpha": 0.3, "tau": 4}"#).unwrap();
        assert_eq!(c.alpha_rule_for(Algorithm::UcbGlm), AlphaRule::Explicit);
        assert_eq!(c.tau_rule_for(Algorithm::UcbGlm).unwrap(), TauRule::Explicit(4));
    }

    #[test]
    fn with_param_overrides_one_key() {
        let c = parse(r#"{"d": 2, "k": 2, "horizon": 10}"#).unwrap();
        let c2 = c.with_param("alpha", "0.5").unwrap();
        assert_eq!(c2.alpha, Some(0.5));
        assert_eq!(c2.alpha_rule_for(Algorithm::UcbGlm), AlphaRule::Explicit);
        let c3 = c.with_param("link", "probit").unwrap();
        assert_eq!(c3.link, LinkFunction::Probit);
        assert!(c.with_param("nonsense", "1").is_err());
    }
}
