//! Bandit policies behind one select/update interface.
//!
//! - [`UcbGlm`]: optimistic MLE with a `V^{-1}` width bonus after a uniform
//!   initialization phase.
//! - [`SupCbGlm`]: staged elimination where each stage fits on its own round
//!   set, so rewards inside a stage stay conditionally independent.
//! - [`UniformRandom`] and [`EpsilonGreedy`] baselines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignState;
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::linalg::{quadratic_form, FeatureVector};
use crate::mle::{mle_fit, MleOptions};
use crate::rng::StreamRng;

mod baseline;
mod supcb_glm;
mod ucb_glm;

pub use baseline::{baseline_select, BaselineKind, EpsilonGreedy, UniformRandom};
pub use supcb_glm::{cb_glm_scores, eliminate, num_stages, StageFit, StagePartition, SupCbGlm};
pub use ucb_glm::{ucb_glm_select, UcbGlm};

/// How the exploration width α is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// Use the configured value as is.
    Explicit,
    /// `(σ/κ)√((d/2)·log(1 + 2T/d) + log(1/δ))`, the UCB-GLM choice.
    Theorem2,
    /// `(3σ/κ)√(2·log(TK/δ))`, the SupCB-GLM choice.
    Theorem3,
    /// `L_μσ/κ`, the largest width allowed by the eigenvalue-growth tuning.
    Theorem4,
}

/// How the number of uniform initialization rounds τ is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRule {
    Explicit(usize),
    /// `⌈C·(d + log(1/δ))/σ₀²⌉`, floored at d.
    Theorem2 { constant: f64 },
    /// `⌈√(dT)⌉`.
    Theorem3,
    /// `⌈(8σ²/κ²)·d·log T⌉`.
    Theorem4,
}

/// Default universal constant C in the UCB-GLM initialization length.
pub const DEFAULT_TAU_CONSTANT: f64 = 16.0;

/// Problem constants that the tuning rules read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningInputs {
    pub horizon: usize,
    pub d: usize,
    pub k: usize,
    pub delta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub lipschitz: f64,
    /// σ₀², the minimum eigenvalue of the per-round context second moment.
    pub sigma0_sq: f64,
}

impl TuningInputs {
    fn check_positive(&self) -> Result<()> {
        let named = [
            ("T", self.horizon as f64),
            ("d", self.d as f64),
            ("K", self.k as f64),
            ("sigma", self.sigma),
            ("kappa", self.kappa),
            ("L_mu", self.lipschitz),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// α for the given rule. `explicit` is returned unchanged for
/// [`AlphaRule::Explicit`] and ignored otherwise.
pub fn alpha_from_rule(rule: AlphaRule, inputs: &TuningInputs, explicit: Option<f64>) -> Result<f64> {
    if rule == AlphaRule::Explicit {
        let alpha = explicit.ok_or_else(|| Error::invalid("alpha_rule explicit needs alpha"))?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        return Ok(alpha);
    }
    inputs.check_positive()?;
    let TuningInputs {
        horizon,
        d,
        k,
        delta,
        sigma,
        kappa,
        lipschitz,
        ..
    } = *inputs;
    let (t, d, k) = (horizon as f64, d as f64, k as f64);
    Ok(match rule {
        AlphaRule::Theorem2 => {
            (sigma / kappa) * ((d / 2.0) * (1.0 + 2.0 * t / d).ln() + (1.0 / delta).ln()).sqrt()
        }
        AlphaRule::Theorem3 => (3.0 * sigma / kappa) * (2.0 * (t * k / delta).ln()).sqrt(),
        AlphaRule::Theorem4 => lipschitz * sigma / kappa,
        AlphaRule::Explicit => unreachable!(),
    })
}

/// τ for the given rule; errors when it exceeds the horizon.
pub fn tau_from_rule(rule: TauRule, inputs: &TuningInputs) -> Result<usize> {
    let TuningInputs {
        horizon,
        d,
        delta,
        sigma,
        kappa,
        sigma0_sq,
        ..
    } = *inputs;
    let tau = match rule {
        TauRule::Explicit(n) => n,
        TauRule::Theorem2 { constant } => {
            if !(sigma0_sq > 0.0) {
                return Err(Error::invalid(
                    "the context distribution has a singular second moment (sigma0^2 = 0); set tau explicitly",
                ));
            }
            if !(delta > 0.0 && delta < 1.0) || !(constant > 0.0) {
                return Err(Error::invalid("tau rule needs delta in (0,1) and a positive constant"));
            }
            let raw = constant * (d as f64 + (1.0 / delta).ln()) / sigma0_sq;
            (raw.ceil() as usize).max(d)
        }
        TauRule::Theorem3 => ((d * horizon) as f64).sqrt().ceil() as usize,
        TauRule::Theorem4 => {
            if !(sigma > 0.0 && kappa > 0.0) {
                return Err(Error::invalid("tau rule needs positive sigma and kappa"));
            }
            let raw = 8.0 * sigma * sigma / (kappa * kappa) * d as f64 * (horizon as f64).ln();
            raw.ceil() as usize
        }
    };
    if tau > horizon {
        return Err(Error::invalid(format!(
            "initialization length tau = {tau} exceeds the horizon T = {horizon}"
        )));
    }
    Ok(tau)
}

/// Resolved settings for one policy instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub horizon: usize,
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub tau: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub delta: f64,
    pub alpha_rule: AlphaRule,
    pub link: LinkFunction,
    /// Optional `ridge·I` starting design (and matching MLE penalty).
    pub ridge: f64,
    pub mle: MleOptionsConfig,
}

/// Serializable mirror of [`MleOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptionsConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MleOptionsConfig {
    fn default() -> Self {
        let d = MleOptions::default();
        MleOptionsConfig {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
        }
    }
}

impl PolicyConfig {
    /// Builds a config, deriving α from `alpha_rule` unless it is explicit.
    pub fn new(
        alpha_rule: AlphaRule,
        explicit_alpha: Option<f64>,
        tau_rule: TauRule,
        inputs: &TuningInputs,
        link: LinkFunction,
    ) -> Result<Self> {
        let alpha = alpha_from_rule(alpha_rule, inputs, explicit_alpha)?;
        let tau = tau_from_rule(tau_rule, inputs)?;
        let cfg = PolicyConfig {
            horizon: inputs.horizon,
            d: inputs.d,
            k: inputs.k,
            alpha,
            tau,
            kappa: inputs.kappa,
            sigma: inputs.sigma,
            delta: inputs.delta,
            alpha_rule,
            link,
            ridge: 0.0,
            mle: MleOptionsConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.horizon == 0 {
            return Err(Error::invalid("T, d and K must be positive"));
        }
        if self.tau > self.horizon {
            return Err(Error::invalid("tau must not exceed T"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and >= 0"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid("ridge must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn mle_options(&self) -> MleOptions {
        MleOptions {
            tolerance: self.mle.tolerance,
            max_iterations: self.mle.max_iterations,
            l2_penalty: self.ridge,
        }
    }
}

/// Which round set a SupCB-GLM round joins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageAssignment {
    /// The uniform initialization set F.
    Init,
    /// Ψ_s. `Stage(0)` is the exploit set Ψ_0.
    Stage(usize),
}

/// A policy's choice for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub arm: usize,
    /// SupCB-GLM stage s_t at which the arm was chosen.
    pub stage: Option<usize>,
    pub assignment: Option<StageAssignment>,
    /// Width of the chosen arm at selection time (α-scaled for SupCB-GLM,
    /// unscaled `‖x‖_{V^{-1}}` for UCB-GLM).
    pub width: Option<f64>,
    /// False if any MLE solved during selection hit its iteration cap.
    pub mle_converged: bool,
}

impl Decision {
    pub fn plain(arm: usize) -> Self {
        Decision {
            arm,
            stage: None,
            assignment: None,
            width: None,
            mle_converged: true,
        }
    }
}

/// Result of absorbing a reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub mle_converged: bool,
}

pub trait Policy: Send {
    /// Chooses an arm for round `t` (1-based).
    fn select(
        &mut self,
        t: usize,
        contexts: &[FeatureVector],
        rng: &mut StreamRng,
    ) -> Result<Decision>;

    /// Absorbs the reward of the decision returned for round `t`.
    fn update(
        &mut self,
        t: usize,
        contexts: &[FeatureVector],
        decision: &Decision,
        reward: f64,
    ) -> Result<UpdateOutcome>;
}

/// Per-arm means `m_a = x_a'θ̂` and widths `w_a`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArmScores {
    pub means: Vec<f64>,
    pub widths: Vec<f64>,
}

impl ArmScores {
    /// `m_a = x_a'θ̂`, `w_a = α‖x_a‖_{V^{-1}}`.
    pub fn compute(
        contexts: &[FeatureVector],
        theta_hat: &DVector<f64>,
        v_inv: &DMatrix<f64>,
        alpha: f64,
    ) -> Self {
        let means = contexts.iter().map(|x| x.dot(theta_hat)).collect();
        let widths = contexts
            .iter()
            .map(|x| alpha * quadratic_form(x.as_vector(), v_inv).max(0.0).sqrt())
            .collect();
        ArmScores { means, widths }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// `m_a + w_a` per arm.
    pub fn upper_bounds(&self) -> impl Iterator<Item = f64> + '_ {
        self.means.iter().zip(&self.widths).map(|(m, w)| m + w)
    }
}

/// Index of the first maximum among `arms`.
pub(crate) fn argmax_over(arms: &[usize], value: impl Fn(usize) -> f64) -> usize {
    let mut best = arms[0];
    let mut best_v = value(best);
    for &a in &arms[1..] {
        let v = value(a);
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    best
}

/// Design plus MLE, refit on demand with a warm start.
#[derive(Debug, Clone)]
pub struct GlmEstimator {
    link: LinkFunction,
    design: DesignState,
    theta_hat: Option<DVector<f64>>,
    opts: MleOptions,
    nonconverged_fits: usize,
}

impl GlmEstimator {
    pub fn new(link: LinkFunction, d: usize, ridge: f64, opts: MleOptions) -> Self {
        GlmEstimator {
            link,
            design: DesignState::with_ridge(d, ridge),
            theta_hat: None,
            opts,
            nonconverged_fits: 0,
        }
    }

    pub fn design(&self) -> &DesignState {
        &self.design
    }

    pub fn theta_hat(&self) -> Option<&DVector<f64>> {
        self.theta_hat.as_ref()
    }

    pub fn nonconverged_fits(&self) -> usize {
        self.nonconverged_fits
    }

    /// Adds an observation; refits when asked and the design is invertible.
    /// Returns whether the refit (if any) converged.
    pub fn absorb(&mut self, x: FeatureVector, y: f64, refit: bool) -> Result<bool> {
        self.design.rank_one_update(x, y);
        if refit && self.design.is_invertible() {
            self.refit()
        } else {
            Ok(true)
        }
    }

    /// Re-solves the MLE on the full log from the previous estimate.
    pub fn refit(&mut self) -> Result<bool> {
        let warm = self
            .theta_hat
            .take()
            .unwrap_or_else(|| DVector::zeros(self.design.dim()));
        let fit = mle_fit(self.link, self.design.observations(), &warm, &self.opts)?;
        if !fit.converged {
            self.nonconverged_fits += 1;
        }
        self.theta_hat = Some(fit.theta_hat);
        Ok(fit.converged)
    }

    /// θ̂ and `V^{-1}`, or `SingularDesign` while either is unavailable.
    pub fn ready(&self) -> Result<(&DVector<f64>, &DMatrix<f64>)> {
        match (self.theta_hat.as_ref(), self.design.inverse()) {
            (Some(th), Some(inv)) => Ok((th, inv)),
            _ => Err(Error::SingularDesign {
                min_eigenvalue: self.design.min_eigenvalue(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn inputs() -> TuningInputs {
        TuningInputs {
            horizon: 2,
            d: 2,
            k: 1,
            delta: (-1.0f64).exp(),
            sigma: 1.0,
            kappa: 1.0,
            lipschitz: 0.25,
            sigma0_sq: 0.25,
        }
    }

    #[test]
    fn theorem2_alpha_example() {
        let a = alpha_from_rule(AlphaRule::Theorem2, &inputs(), None).unwrap();
        assert_abs_diff_eq!(a, (3f64.ln() + 1.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(a, 1.4487, epsilon = 1e-4);
    }

    #[test]
    fn theorem3_alpha_example() {
        // 3σ/κ = 1 and TK/δ = e².
        let inp = TuningInputs {
            horizon: 1,
            k: 1,
            delta: (-2.0f64).exp(),
            sigma: 1.0 / 3.0,
            kappa: 1.0,
            ..inputs()
        };
        let a = alpha_from_rule(AlphaRule::Theorem3, &inp, None).unwrap();
        assert_abs_diff_eq!(a, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn theorem4_alpha_example() {
        let inp = TuningInputs {
            sigma: 2.0,
            kappa: 0.5,
            lipschitz: 0.25,
            ..inputs()
        };
        assert_eq!(alpha_from_rule(AlphaRule::Theorem4, &inp, None).unwrap(), 1.0);
    }

    #[test]
    fn explicit_alpha_passes_through() {
        assert_eq!(
            alpha_from_rule(AlphaRule::Explicit, &inputs(), Some(0.37)).unwrap(),
            0.37
        );
        assert!(alpha_from_rule(AlphaRule::Explicit, &inputs(), None).is_err());
        assert!(alpha_from_rule(AlphaRule::Explicit, &inputs(), Some(-1.0)).is_err());
    }

    #[test]
    fn nonpositive_inputs_are_invalid() {
        for bad in [
            TuningInputs { sigma: 0.0, ..inputs() },
            TuningInputs { kappa: -1.0, ..inputs() },
            TuningInputs { delta: 1.0, ..inputs() },
            TuningInputs { horizon: 0, ..inputs() },
        ] {
            assert!(matches!(
                alpha_from_rule(AlphaRule::Theorem2, &bad, None),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn tau_rules() {
        let inp = TuningInputs {
            horizon: 10_000,
            d: 5,
            k: 10,
            delta: 0.05,
            sigma: 0.5,
            kappa: 0.25,
            lipschitz: 0.25,
            sigma0_sq: 1.0 / 7.0,
        };
        let t2 = tau_from_rule(TauRule::Theorem2 { constant: 16.0 }, &inp).unwrap();
        assert_eq!(t2, (16.0 * 7.0 * (5.0 + 20f64.ln())).ceil() as usize);
        assert_eq!(tau_from_rule(TauRule::Theorem3, &inp).unwrap(), 224);
        let t4 = tau_from_rule(TauRule::Theorem4, &inp).unwrap();
        assert_eq!(t4, (8.0 * 4.0 * 5.0 * 10_000f64.ln()).ceil() as usize);
        assert_eq!(tau_from_rule(TauRule::Explicit(7), &inp).unwrap(), 7);
        assert!(tau_from_rule(TauRule::Explicit(10_001), &inp).is_err());
        // floored at d
        let tiny = TuningInputs {
            sigma0_sq: 1e6,
            ..inp
        };
        assert_eq!(tau_from_rule(TauRule::Theorem2 { constant: 16.0 }, &tiny).unwrap(), 5);
    }

    #[test]
    fn policy_config_stores_the_derived_alpha() {
        let inp = inputs();
        let cfg = PolicyConfig::new(
            AlphaRule::Theorem2,
            Some(123.0),
            TauRule::Explicit(1),
            &inp,
            LinkFunction::Identity,
        )
        .unwrap();
        assert_eq!(cfg.alpha, alpha_from_rule(AlphaRule::Theorem2, &inp, None).unwrap());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_over(&[0, 1, 2], |a| [1.0, 3.0, 3.0][a]), 1);
        assert_eq!(argmax_over(&[2, 0], |a| [5.0, 0.0, 5.0][a]), 2);
    }
}
