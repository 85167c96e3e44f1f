//! UCB-GLM against uniform play and ε-greedy on a logistic bandit.
//!
//! Run with `cargo run --release --example ucb_glm_regret`.

use glm_bandit::harness::{run_experiment, ExperimentConfig};
use std::path::Path;

fn main() -> glm_bandit::Result<()> {
    let config = ExperimentConfig::from_json(
        r#"{
            "d": 4, "k": 8, "horizon": 3000, "replications": 4,
            "algorithms": ["uniform_random", "epsilon_greedy", "ucb_glm"],
            "record_every": 500
        }"#,
        Path::new("inline"),
    )?;
    let result = run_experiment(&config, 1)?;
    for v in &result.variants {
        if let Some(p) = &v.tuning.policy {
            println!("{}: α = {:.2}, τ = {}", v.label(), p.alpha, p.tau);
        }
    }
    println!("{:<16} {}", "t", "mean cumulative regret");
    for row in result.variants.iter().flat_map(|v| &v.summary) {
        println!("{:<16} {:>5} {:>10.2} ± {:.2}", row.algorithm, row.t, row.mean_cum_regret, row.std_cum_regret);
    }
    Ok(())
}
