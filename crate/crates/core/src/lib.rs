//! Generalized linear contextual bandits.
//!
//! The crate covers the GLM estimation core (links, design matrices,
//! Newton MLE), the UCB-GLM and SupCB-GLM policies with simple baselines, a
//! synthetic environment, Monte Carlo checks of the finite-sample confidence
//! statements, and a harness that runs seeded experiments and writes CSV.
//!
//! ```
//! use glm_bandit::{compute_kappa, LinkFunction};
//! let kappa = compute_kappa(LinkFunction::Logistic, 1.0);
//! assert!((kappa - 0.104994).abs() < 1e-6);
//! ```

pub mod cli;
pub mod design;
pub mod environment;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod link;
pub mod mle;
pub mod policy;
pub mod rng;
pub mod trace;
pub mod validation;

pub use design::{DesignState, Observation};
pub use environment::{ContextDistribution, Environment, EnvironmentConfig, NoiseModel, ThetaStar};
pub use error::{Error, Result};
pub use linalg::{min_eigenvalue, weighted_norm, FeatureVector};
pub use link::{compute_kappa, link_eval, LinkFunction};
pub use mle::{mle_fit, MleOptions, MleResult};
pub use policy::{
    alpha_from_rule, tau_from_rule, AlphaRule, Decision, Policy, PolicyConfig, SupCbGlm, TauRule,
    UcbGlm,
};
pub use rng::{Purpose, SeedStreams};
