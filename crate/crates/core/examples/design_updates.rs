//! Incremental inverse of the design matrix and the widths it produces.
//!
//! Run with `cargo run --example design_updates`.

use glm_bandit::environment::ContextDistribution;
use glm_bandit::linalg::identity_residual;
use glm_bandit::{DesignState, Purpose, SeedStreams};

fn main() -> glm_bandit::Result<()> {
    let d = 10;
    let mut rng = SeedStreams::new(1, 0).stream(Purpose::Contexts);
    let mut design = DesignState::new(d);
    let probe = ContextDistribution::Sphere.sample(d, 0, &mut rng);
    for n in 1..=10_000 {
        design.rank_one_update(ContextDistribution::UniformBall.sample(d, 0, &mut rng), 0.0);
        if [10, 100, 1_000, 10_000].contains(&n) {
            let inv = design.inverse().expect("full rank after d draws");
            println!(
                "n = {n:>5}: ‖x‖_(V^-1) = {:.4}  λ_min(V)/n = {:.4}  ‖V·V⁻¹ − I‖∞ = {:.2e}",
                design.width(probe.as_vector())?,
                design.min_eigenvalue() / n as f64,
                identity_residual(design.gram(), inv),
            );
        }
    }
    Ok(())
}
