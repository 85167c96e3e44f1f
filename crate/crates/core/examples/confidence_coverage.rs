//! Monte Carlo coverage of the MLE confidence statements.
//!
//! Run with `cargo run --release --example confidence_coverage`.

use glm_bandit::environment::{ContextDistribution, NoiseModel};
use glm_bandit::validation::{probe_directions, theorem1_coverage, znorm_bound_check, SampleSpec};
use glm_bandit::LinkFunction;

fn main() -> glm_bandit::Result<()> {
    let identity = SampleSpec {
        link: LinkFunction::Identity,
        d: 3,
        n: 2000,
        noise: NoiseModel::Gaussian { sigma: 0.1 },
        theta_star: vec![0.6, -0.3, 0.2],
        contexts: ContextDistribution::UniformBall,
        delta: 0.05,
        replications: 300,
        master_seed: 11,
    };
    let logistic = SampleSpec {
        link: LinkFunction::Logistic,
        d: 2,
        n: 5000,
        noise: NoiseModel::Bernoulli,
        theta_star: vec![0.5, 0.0],
        replications: 200,
        ..identity.clone()
    };
    for spec in [&identity, &logistic] {
        let dirs = probe_directions(spec.d, 100, spec.master_seed);
        let r = theorem1_coverage(spec, &dirs, 1)?;
        let c = &r.coverage;
        println!(
            "{:<9} per-direction bound: {}/{} covered ({:.3} vs nominal {:.2}), eigenvalue condition met in {} (needs λ_min ≥ {:.1})",
            spec.link.name(),
            c.hits,
            c.replications,
            c.empirical_coverage,
            c.nominal,
            c.condition_met_replications,
            r.eigen_threshold,
        );
    }
    let z = znorm_bound_check(&SampleSpec { n: 500, replications: 500, noise: NoiseModel::Gaussian { sigma: 1.0 }, d: 2, theta_star: vec![0.3, 0.3], ..identity }, 1)?;
    println!("noise norm bound: {}/{} covered (nominal {:.2})", z.hits, z.replications, z.nominal);
    Ok(())
}
