use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Decision, GlmEstimator, Policy, PolicyConfig, UpdateOutcome};
use crate::environment::argmax;
use crate::error::{Error, Result};
use crate::linalg::FeatureVector;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BaselineKind {
    UniformRandom,
    EpsilonGreedy { epsilon: f64 },
    PureGreedy,
}

impl BaselineKind {
    pub fn epsilon(self) -> f64 {
        match self {
            BaselineKind::UniformRandom => 1.0,
            BaselineKind::EpsilonGreedy { epsilon } => epsilon,
            BaselineKind::PureGreedy => 0.0,
        }
    }
}

/// One baseline draw. `theta_hat` is `None` before the estimate exists, in
/// which case greedy variants play uniformly.
///
/// Exactly one uniform `u` is drawn per call for ε-greedy so the stream
/// position does not depend on the branch taken.
pub fn baseline_select(
    kind: BaselineKind,
    theta_hat: Option<&DVector<f64>>,
    contexts: &[FeatureVector],
    rng: &mut StreamRng,
) -> usize {
    let k = contexts.len();
    let explore = match kind {
        BaselineKind::UniformRandom => true,
        BaselineKind::EpsilonGreedy { epsilon } => rng.random::<f64>() < epsilon,
        BaselineKind::PureGreedy => false,
    };
    match theta_hat {
        Some(th) if !explore => argmax(contexts.iter().map(|x| x.dot(th))),
        _ => rng.random_range(0..k),
    }
}

/// Uniformly random arm every round.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    k: usize,
}

impl UniformRandom {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be positive"));
        }
        Ok(UniformRandom { k })
    }
}

impl Policy for UniformRandom {
    fn select(
        &mut self,
        _t: usize,
        contexts: &[FeatureVector],
        rng: &mut StreamRng,
    ) -> Result<Decision> {
        if contexts.len() != self.k {
            return Err(Error::invalid(format!(
                "expected {} contexts, got {}",
                self.k,
                contexts.len()
            )));
        }
        Ok(Decision::plain(baseline_select(
            BaselineKind::UniformRandom,
            None,
            contexts,
            rng,
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

/// ε-greedy on the MLE mean; ε = 0 is pure greedy. Plays uniformly until the
/// design is invertible.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    epsilon: f64,
    k: usize,
    estimator: GlmEstimator,
}

impl EpsilonGreedy {
    pub fn new(config: &PolicyConfig, epsilon: f64) -> Result<Self> {
        config.validate()?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(EpsilonGreedy {
            epsilon,
            k: config.k,
            estimator: GlmEstimator::new(config.link, config.d, config.ridge, config.mle_options()),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn theta_hat(&self) -> Option<&DVector<f64>> {
        self.estimator.theta_hat()
    }

    pub fn nonconverged_fits(&self) -> usize {
        self.estimator.nonconverged_fits()
    }
}

impl Policy for EpsilonGreedy {
    fn select(
        &mut self,
        _t: usize,
        contexts: &[FeatureVector],
        rng: &mut StreamRng,
    ) -> Result<Decision> {
        if contexts.len() != self.k {
            return Err(Error::invalid(format!(
                "expected {} contexts, got {}",
                self.k,
                contexts.len()
            )));
        }
        let theta = self.estimator.ready().ok().map(|(th, _)| th);
        let kind = BaselineKind::EpsilonGreedy {
            epsilon: self.epsilon,
        };
        Ok(Decision::plain(baseline_select(kind, theta, contexts, rng)))
    }

    fn update(
        &mut self,
        _t: usize,
        contexts: &[FeatureVector],
        decision: &Decision,
        reward: f64,
    ) -> Result<UpdateOutcome> {
        let converged = self
            .estimator
            .absorb(contexts[decision.arm].clone(), reward, true)?;
        Ok(UpdateOutcome {
            mle_converged: converged,
        })
    }
}
