use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{ArmScores, Decision, GlmEstimator, Policy, PolicyConfig, UpdateOutcome};
use crate::design::DesignState;
use crate::environment::argmax;
use crate::error::{Error, Result};
use crate::linalg::{quadratic_form, FeatureVector};
use crate::rng::StreamRng;

/// `argmax_a x_a'θ̂ + α‖x_a‖_{V^{-1}}`, lowest index on ties.
pub fn ucb_glm_select(
    theta_hat: &DVector<f64>,
    v_inv: &DMatrix<f64>,
    alpha: f64,
    contexts: &[FeatureVector],
) -> usize {
    argmax(ArmScores::compute(contexts, theta_hat, v_inv, alpha).upper_bounds())
}

/// UCB-GLM: τ uniformly random rounds, then the arm maximizing the
/// optimistic index under the MLE refit on every past observation.
#[derive(Debug, Clone)]
pub struct UcbGlm {
    config: PolicyConfig,
    estimator: GlmEstimator,
}

impl UcbGlm {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let estimator =
            GlmEstimator::new(config.link, config.d, config.ridge, config.mle_options());
        Ok(UcbGlm { config, estimator })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// `V_t` and the observation log.
    pub fn design(&self) -> &DesignState {
        self.estimator.design()
    }

    /// θ̂_t, present once the initialization phase is over.
    pub fn theta_hat(&self) -> Option<&DVector<f64>> {
        self.estimator.theta_hat()
    }

    pub fn nonconverged_fits(&self) -> usize {
        self.estimator.nonconverged_fits()
    }

    /// Optimistic scores for the current round. `SingularDesign` before the
    /// first estimate exists or while `V` is singular.
    pub fn scores(&self, contexts: &[FeatureVector]) -> Result<ArmScores> {
        let (theta, inv) = self.estimator.ready()?;
        Ok(ArmScores::compute(contexts, theta, inv, self.config.alpha))
    }
}

impl Policy for UcbGlm {
    fn select(
        &mut self,
        t: usize,
        contexts: &[FeatureVector],
        rng: &mut StreamRng,
    ) -> Result<Decision> {
        if contexts.len() != self.config.k {
            return Err(Error::invalid(format!(
                "expected {} contexts, got {}",
                self.config.k,
                contexts.len()
            )));
        }
        if t <= self.config.tau {
            return Ok(Decision::plain(rng.random_range(0..self.config.k)));
        }
        let (theta, inv) = self.estimator.ready()?;
        let arm = ucb_glm_select(theta, inv, self.config.alpha, contexts);
        let width = quadratic_form(contexts[arm].as_vector(), inv).max(0.0).sqrt();
        Ok(Decision {
            width: Some(width),
            ..Decision::plain(arm)
        })
    }

    fn update(
        &mut self,
        t: usize,
        contexts: &[FeatureVector],
        decision: &Decision,
        reward: f64,
    ) -> Result<UpdateOutcome> {
        // θ̂_{t+1} is needed from round τ+1 on, i.e. after absorbing round τ.
        let refit = t >= self.config.tau;
        let converged =
            self.estimator
                .absorb(contexts[decision.arm].clone(), reward, refit)?;
        Ok(UpdateOutcome {
            mle_converged: converged,
        })
    }
}
