use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{
    argmax_over, ArmScores, Decision, Policy, PolicyConfig, StageAssignment, UpdateOutcome,
};
use crate::design::{invert_spd, Observation};
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::linalg::{min_eigenvalue, FeatureVector};
use crate::mle::{mle_fit, MleOptions};
use crate::rng::StreamRng;

/// MLE and inverse design restricted to a set of rounds.
#[derive(Debug, Clone)]
pub struct StageFit {
    pub theta_hat: DVector<f64>,
    pub v_inv: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_score_norm: f64,
}

impl StageFit {
    /// Fits on the observations of `rounds` (1-based indices into `log`).
    pub fn fit(
        link: LinkFunction,
        log: &[Observation],
        rounds: &[usize],
        warm_start: &DVector<f64>,
        opts: &MleOptions,
    ) -> Result<StageFit> {
        let d = warm_start.len();
        let mut v = DMatrix::zeros(d, d);
        for &r in rounds {
            let x = log[r - 1].x.as_vector();
            v.ger(1.0, x, x, 1.0);
        }
        let v_inv = invert_spd(&v).ok_or_else(|| Error::SingularDesign {
            min_eigenvalue: min_eigenvalue(&v),
        })?;
        let fit = mle_fit(link, rounds.iter().map(|&r| &log[r - 1]), warm_start, opts)?;
        Ok(StageFit {
            theta_hat: fit.theta_hat,
            v_inv,
            converged: fit.converged,
            iterations: fit.iterations,
            final_score_norm: fit.final_score_norm,
        })
    }

    pub fn scores(&self, contexts: &[FeatureVector], alpha: f64) -> ArmScores {
        ArmScores::compute(contexts, &self.theta_hat, &self.v_inv, alpha)
    }
}

/// Means and α-scaled widths of every context, fitted on exactly the rounds
/// in `index_set`.
pub fn cb_glm_scores(
    index_set: &[usize],
    contexts: &[FeatureVector],
    alpha: f64,
    log: &[Observation],
    link: LinkFunction,
) -> Result<ArmScores> {
    if index_set.is_empty() {
        return Err(Error::invalid("CB-GLM needs a nonempty index set"));
    }
    let d = contexts
        .first()
        .map(FeatureVector::dim)
        .ok_or_else(|| Error::invalid("CB-GLM needs at least one context"))?;
    let fit = StageFit::fit(link, log, index_set, &DVector::zeros(d), &MleOptions::default())?;
    if !fit.converged {
        return Err(Error::NonConvergent {
            iterations: fit.iterations,
            score_norm: fit.final_score_norm,
        });
    }
    Ok(fit.scores(contexts, alpha))
}

/// The initialization set F and the stage sets Ψ_0..Ψ_S, as 1-based rounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StagePartition {
    pub init: Vec<usize>,
    /// `stages[s]` is Ψ_s; `stages.len() == S + 1`.
    pub stages: Vec<Vec<usize>>,
}

impl StagePartition {
    pub fn new(num_stages: usize) -> Self {
        StagePartition {
            init: Vec::new(),
            stages: vec![Vec::new(); num_stages + 1],
        }
    }

    fn insert(&mut self, assignment: StageAssignment, t: usize) {
        match assignment {
            StageAssignment::Init => self.init.push(t),
            StageAssignment::Stage(s) => self.stages[s].push(t),
        }
    }

    /// True iff the sets are pairwise disjoint and their union is `{1..t}`.
    pub fn covers_exactly(&self, t: usize) -> bool {
        let mut seen = vec![false; t + 1];
        let all = self.init.iter().chain(self.stages.iter().flatten());
        let mut count = 0;
        for &r in all {
            if r == 0 || r > t || seen[r] {
                return false;
            }
            seen[r] = true;
            count += 1;
        }
        count == t
    }
}

/// S = ⌊log₂ T⌋, at least one stage so T = 1 still has a ladder.
pub fn num_stages(horizon: usize) -> usize {
    (usize::BITS - 1 - horizon.max(1).leading_zeros()).max(1) as usize
}

/// SupCB-GLM with CB-GLM stage scoring.
///
/// Stage `s` fits on Ψ_s ∪ F; fits are cached and only redone when Ψ_s
/// gains a round. Since `V(Ψ_s ∪ F) ⪰ V(F)`, a singular stage design means F
/// itself is singular and selection fails with `SingularDesign`.
#[derive(Debug, Clone)]
pub struct SupCbGlm {
    config: PolicyConfig,
    num_stages: usize,
    partition: StagePartition,
    log: Vec<Observation>,
    stage_fits: Vec<Option<StageFit>>,
    init_fit: Option<StageFit>,
    nonconverged_fits: usize,
}

impl SupCbGlm {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let num_stages = num_stages(config.horizon);
        Ok(SupCbGlm {
            partition: StagePartition::new(num_stages),
            log: Vec::with_capacity(config.horizon),
            stage_fits: vec![None; num_stages + 1],
            init_fit: None,
            nonconverged_fits: 0,
            num_stages,
            config,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// S.
    pub fn num_stages(&self) -> usize {
        self.num_stages
    }

    pub fn partition(&self) -> &StagePartition {
        &self.partition
    }

    pub fn observations(&self) -> &[Observation] {
        &self.log
    }

    pub fn nonconverged_fits(&self) -> usize {
        self.nonconverged_fits
    }

    fn ensure_init_fit(&mut self) -> Result<()> {
        if self.init_fit.is_none() {
            let warm = DVector::zeros(self.config.d);
            let fit = StageFit::fit(
                self.config.link,
                &self.log,
                &self.partition.init,
                &warm,
                &self.config.mle_options(),
            )?;
            if !fit.converged {
                self.nonconverged_fits += 1;
            }
            self.init_fit = Some(fit);
        }
        Ok(())
    }

    fn stage_fit(&mut self, s: usize) -> Result<&StageFit> {
        if self.stage_fits[s].is_none() {
            let fit = if self.partition.stages[s].is_empty() {
                self.ensure_init_fit()?;
                self.init_fit.clone().expect("init fit present")
            } else {
                let rounds: Vec<usize> = self
                    .partition
                    .init
                    .iter()
                    .chain(&self.partition.stages[s])
                    .copied()
                    .collect();
                let warm = self
                    .init_fit
                    .as_ref()
                    .map(|f| f.theta_hat.clone())
                    .unwrap_or_else(|| DVector::zeros(self.config.d));
                let fit = StageFit::fit(
                    self.config.link,
                    &self.log,
                    &rounds,
                    &warm,
                    &self.config.mle_options(),
                )?;
                if !fit.converged {
                    self.nonconverged_fits += 1;
                }
                fit
            };
            self.stage_fits[s] = Some(fit);
        }
        Ok(self.stage_fits[s].as_ref().expect("just filled"))
    }

    /// Runs the stage ladder for round `t > τ` and returns the decision with
    /// the set the round will join.
    pub fn select_staged(&mut self, contexts: &[FeatureVector]) -> Result<Decision> {
        let alpha = self.config.alpha;
        let exploit_width = 1.0 / (self.config.horizon as f64).sqrt();
        let mut active: Vec<usize> = (0..contexts.len()).collect();
        let mut converged = true;
        let mut s = 1;
        loop {
            let fit = self.stage_fit(s)?;
            converged &= fit.converged;
            let scores = fit.scores(contexts, alpha);
            let level = 0.5f64.powi(s as i32);

            // 2b: explore the first arm that is still too uncertain.
            if let Some(&a) = active.iter().find(|&&a| scores.widths[a] > level) {
                return Ok(Decision {
                    arm: a,
                    stage: Some(s),
                    assignment: Some(StageAssignment::Stage(s)),
                    width: Some(scores.widths[a]),
                    mle_converged: converged,
                });
            }
            let leader = argmax_over(&active, |a| scores.means[a]);
            // 2c: every width below 1/√T, exploit. Past the last stage the
            // same action is forced.
            if active.iter().all(|&a| scores.widths[a] <= exploit_width) || s == self.num_stages {
                return Ok(Decision {
                    arm: leader,
                    stage: Some(s),
                    assignment: Some(StageAssignment::Stage(0)),
                    width: Some(scores.widths[leader]),
                    mle_converged: converged,
                });
            }
            // 2d: keep arms within 2·2^{-s} of the leader and refine.
            let threshold = scores.means[leader] - 2.0 * level;
            active.retain(|&a| scores.means[a] >= threshold);
            s += 1;
        }
    }
}

/// Step 2d filter on its own: arms of `active` whose mean is within
/// `2·2^{-s}` of the best mean in `active`.
pub fn eliminate(active: &[usize], means: &[f64], s: usize) -> Vec<usize> {
    let best = active
        .iter()
        .map(|&a| means[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - 2.0 * 0.5f64.powi(s as i32);
    active
        .iter()
        .copied()
        .filter(|&a| means[a] >= threshold)
        .collect()
}

impl Policy for SupCbGlm {
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
        if t != self.log.len() + 1 {
            return Err(Error::invalid(format!(
                "round {t} selected out of order (expected {})",
                self.log.len() + 1
            )));
        }
        if t <= self.config.tau {
            return Ok(Decision {
                assignment: Some(StageAssignment::Init),
                ..Decision::plain(rng.random_range(0..self.config.k))
            });
        }
        self.select_staged(contexts)
    }

    fn update(
        &mut self,
        t: usize,
        contexts: &[FeatureVector],
        decision: &Decision,
        reward: f64,
    ) -> Result<UpdateOutcome> {
        let assignment = decision
            .assignment
            .ok_or_else(|| Error::invalid("SupCB-GLM decision without a stage assignment"))?;
        self.log.push(Observation {
            x: contexts[decision.arm].clone(),
            y: reward,
        });
        self.partition.insert(assignment, t);
        match assignment {
            StageAssignment::Init => {
                self.init_fit = None;
                self.stage_fits.iter_mut().for_each(|f| *f = None);
            }
            StageAssignment::Stage(0) => {}
            StageAssignment::Stage(s) => self.stage_fits[s] = None,
        }
        Ok(UpdateOutcome {
            mle_converged: true,
        })
    }
}
