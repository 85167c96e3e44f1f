//! Newton MLE on simulated logistic data, compared with the truth.
//!
//! Run with `cargo run --example mle_fit`.

use glm_bandit::environment::{ContextDistribution, Environment, EnvironmentConfig, NoiseModel, ThetaStar};
use glm_bandit::mle::{log_likelihood, MleOptions};
use glm_bandit::{mle_fit, DesignState, LinkFunction, Observation, SeedStreams};
use nalgebra::DVector;

fn main() -> glm_bandit::Result<()> {
    let config = EnvironmentConfig {
        d: 3,
        k: 1,
        link: LinkFunction::Logistic,
        noise: NoiseModel::Bernoulli,
        contexts: ContextDistribution::UniformBall,
        theta_star: ThetaStar::Given(vec![1.5, -0.5, 0.25]),
    };
    let mut env = Environment::new(config, &SeedStreams::new(7, 0))?;
    for n in [100, 1_000, 10_000] {
        let obs: Vec<Observation> = (1..=n)
            .map(|t| {
                let x = env.sample_contexts().remove(0);
                let y = env.sample_reward(t, &x);
                Observation { x, y }
            })
            .collect();
        let fit = mle_fit(LinkFunction::Logistic, &obs, &DVector::zeros(3), &MleOptions::default())?
            .require_converged()?;
        let design = DesignState::from_observations(3, 0.0, obs.iter().cloned());
        let err = &fit.theta_hat - env.theta_star();
        println!(
            "n = {n:>6}: θ̂ = [{:+.3}, {:+.3}, {:+.3}]  ‖θ̂ − θ*‖ = {:.4}  λ_min(V) = {:>8.1}  iterations = {}  loglik = {:.2}",
            fit.theta_hat[0],
            fit.theta_hat[1],
            fit.theta_hat[2],
            err.norm(),
            design.min_eigenvalue(),
            fit.iterations,
            log_likelihood(LinkFunction::Logistic, &obs, &fit.theta_hat, 0.0),
        );
    }
    Ok(())
}
