//! SupCB-GLM stage ladder: which accuracy level each round settled at.
//!
//! Run with `cargo run --release --example supcb_glm_stages`.

use glm_bandit::environment::{ContextDistribution, NoiseModel, ThetaStar};
use glm_bandit::harness::simulate;
use glm_bandit::policy::{AlphaRule, TauRule, TuningInputs};
use glm_bandit::{compute_kappa, Environment, EnvironmentConfig, LinkFunction, PolicyConfig, Purpose, SeedStreams, SupCbGlm};

fn main() -> glm_bandit::Result<()> {
    let (d, k, horizon) = (3, 5, 5000);
    let env_cfg = EnvironmentConfig {
        d,
        k,
        link: LinkFunction::Identity,
        noise: NoiseModel::Gaussian { sigma: 0.1 },
        contexts: ContextDistribution::UniformBall,
        theta_star: ThetaStar::RandomSphere { radius: 1.0 },
    };
    let inputs = TuningInputs {
        horizon,
        d,
        k,
        delta: 0.05,
        sigma: 0.1,
        kappa: compute_kappa(LinkFunction::Identity, 1.0),
        lipschitz: 1.0,
        sigma0_sq: env_cfg.sigma0_squared(),
    };
    let cfg = PolicyConfig::new(AlphaRule::Theorem3, None, TauRule::Theorem3, &inputs, LinkFunction::Identity)?;
    println!("α = {:.3}, τ = {}", cfg.alpha, cfg.tau);

    let seeds = SeedStreams::new(3, 0);
    let mut env = Environment::new(env_cfg, &seeds)?;
    let mut policy = SupCbGlm::new(cfg)?;
    let mut rng = seeds.stream(Purpose::Policy);
    let trace = simulate(&mut env, &mut policy, horizon, 1000, &mut rng, |t, p: &SupCbGlm, _, _| {
        debug_assert!(p.partition().covers_exactly(t));
    })?;

    let part = policy.partition();
    println!("S = {}, |F| = {}", policy.num_stages(), part.init.len());
    for (s, rounds) in part.stages.iter().enumerate() {
        if !rounds.is_empty() {
            let label = if s == 0 { "exploit".to_string() } else { format!("2^-{s}") };
            println!("Ψ_{s:<2} ({label:>7}): {:>5} rounds", rounds.len());
        }
    }
    for row in &trace.rows {
        println!("t = {:>5}: cumulative regret {:.2}", row.t, row.cum_regret);
    }
    Ok(())
}
