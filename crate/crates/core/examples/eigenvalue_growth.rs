//! Linear growth of λ_min(V_n) under iid contexts.
//!
//! Run with `cargo run --release --example eigenvalue_growth`.

use glm_bandit::environment::ContextDistribution;
use glm_bandit::validation::proposition1_growth;

fn main() -> glm_bandit::Result<()> {
    for dist in [ContextDistribution::UniformBall, ContextDistribution::Sphere, ContextDistribution::GaussianNormalized] {
        let r = proposition1_growth(&dist, 3, &[10, 100, 1000, 10_000], 50, 5, 1)?;
        println!("{} (λ_min(Σ) = {:.4})", r.distribution, r.sigma_min);
        for p in &r.points {
            let q = p.ratio.expect("n > 0");
            println!("  n = {:>6}: λ_min(V_n)/n median {:.4}  [q05 {:.4}, q95 {:.4}]", p.n, q.median, q.q05, q.q95);
        }
    }
    Ok(())
}
