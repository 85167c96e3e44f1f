//! A seeded experiment and an α sweep written as CSV.
//!
//! Run with `cargo run --release --example experiment_csv -- [OUT_DIR]`.

use glm_bandit::harness::{emit_csv, run_experiment, sweep, ExperimentConfig};
use std::path::{Path, PathBuf};

fn main() -> glm_bandit::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("glm-bandit-example"));
    let config = ExperimentConfig::from_json(
        r#"{
            "d": 2, "k": 2, "horizon": 2000, "replications": 3,
            "link": "identity", "sigma": 0.2,
            "fixed_contexts": [[1, 0], [0, 1]], "theta_star": [1, 0],
            "algorithms": ["uniform_random", "ucb_glm", "oracle"],
            "tau": 20, "record_every": 100
        }"#,
        Path::new("inline"),
    )?;
    let run = run_experiment(&config, 2)?;
    emit_csv(&run, &out.join("run"))?;
    for v in &run.variants {
        println!("{:<16} R_T/T = {:.4}", v.label(), v.mean_final_regret() / config.horizon as f64);
    }

    let logistic = ExperimentConfig::from_json(
        r#"{"d": 3, "k": 5, "horizon": 2000, "replications": 3, "tau": 30, "record_every": 100}"#,
        Path::new("inline"),
    )?;
    let values: Vec<String> = ["0", "0.5", "2", "8"].map(String::from).to_vec();
    let swept = sweep(&logistic, "alpha", &values, 2)?;
    emit_csv(&swept, &out.join("sweep"))?;
    for v in &swept.variants {
        println!("{:<16} R_T = {:.2}", v.label(), v.mean_final_regret());
    }
    println!("wrote {}", out.display());
    Ok(())
}
