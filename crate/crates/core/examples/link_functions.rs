//! Link functions and the constants that scale every confidence width.
//!
//! Run with `cargo run --example link_functions`.

use glm_bandit::{compute_kappa, LinkFunction};

fn main() {
    println!("{:<10} {:>8} {:>8} {:>8} {:>10} {:>10}", "link", "mu(0.5)", "L_mu", "M_mu", "kappa(1)", "kappa(2)");
    for link in [LinkFunction::Identity, LinkFunction::Logistic, LinkFunction::Probit] {
        println!(
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>10.5} {:>10.5}",
            link.name(),
            link.eval(0.5),
            link.lipschitz_bound(),
            link.curvature_bound(),
            compute_kappa(link, 1.0),
            compute_kappa(link, 2.0),
        );
    }
    // A larger ‖θ*‖ pushes the logistic curve into its flat tails: κ shrinks
    // and every width derived from σ/κ grows with it.
    for norm in [0.0, 1.0, 2.0, 4.0] {
        let k = compute_kappa(LinkFunction::Logistic, norm);
        println!("logistic ‖θ*‖ = {norm}: κ = {k:.5}, 1/κ = {:.1}", 1.0 / k);
    }
}
