//! Maximum-likelihood estimation for generalized linear models.
//!
//! The estimate solves the score equation `Σ (Y_i − μ(X_i'θ)) X_i = 0` by
//! damped Newton iterations whose step matrix is the Fisher information
//! `Σ μ̇(X_i'θ) X_i X_i'`. A step is halved until the Euclidean score norm
//! decreases; convergence is declared on the ℓ∞ score norm.

use nalgebra::{DMatrix, DVector};

use crate::design::Observation;
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::linalg::min_eigenvalue;

/// Minimum eigenvalue below which the Fisher step matrix is singular.
pub const FISHER_EIGEN_FLOOR: f64 = 1e-10;
/// Ridge added to the Fisher matrix before giving up on it.
pub const FISHER_RIDGE: f64 = 1e-8;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Target ℓ∞ norm of the score.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Optional `½λ‖θ‖²` penalty. Zero gives the plain MLE.
    pub l2_penalty: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            l2_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub theta_hat: DVector<f64>,
    /// Newton steps taken.
    pub iterations: usize,
    pub converged: bool,
    /// ℓ∞ norm of the score at `theta_hat`.
    pub final_score_norm: f64,
}

impl MleResult {
    /// Turns a non-converged fit into [`Error::NonConvergent`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergent {
                iterations: self.iterations,
                score_norm: self.final_score_norm,
            })
        }
    }
}

/// Fits the GLM on `observations`, starting Newton from `warm_start`.
///
/// Running out of iterations is not an error here: the last iterate comes
/// back with `converged = false` so callers can keep going with it, or call
/// [`MleResult::require_converged`].
pub fn mle_fit<'a, I>(
    link: LinkFunction,
    observations: I,
    warm_start: &DVector<f64>,
    opts: &MleOptions,
) -> Result<MleResult>
where
    I: IntoIterator<Item = &'a Observation>,
    I::IntoIter: Clone,
{
    let obs = observations.into_iter();
    let d = warm_start.len();
    if obs.clone().next().is_none() {
        return Err(Error::SingularFisher { min_eigenvalue: 0.0 });
    }
    if let Some(bad) = obs.clone().find(|o| o.x.dim() != d) {
        return Err(Error::invalid(format!(
            "observation has dimension {} but warm start has {d}",
            bad.x.dim()
        )));
    }

    let mut theta = warm_start.clone();
    let mut score = score_vector(link, obs.clone(), &theta, opts.l2_penalty);
    let mut iterations = 0;
    let mut fisher = DMatrix::zeros(d, d);

    while score.amax() > opts.tolerance {
        if iterations == opts.max_iterations {
            break;
        }
        fisher_matrix(link, obs.clone(), &theta, opts.l2_penalty, &mut fisher);
        let direction = newton_direction(&fisher, &score)?;

        let current = score.norm();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &theta + &direction * step;
            let cand_score = score_vector(link, obs.clone(), &candidate, opts.l2_penalty);
            if cand_score.norm() < current {
                accepted = Some((candidate, cand_score));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((t, s)) => {
                theta = t;
                score = s;
            }
            // No decrease at any step length: round-off floor reached.
            None => break,
        }
    }

    let final_score_norm = score.amax();
    Ok(MleResult {
        theta_hat: theta,
        iterations,
        converged: final_score_norm <= opts.tolerance,
        final_score_norm,
    })
}

/// `Σ (Y_i − μ(X_i'θ)) X_i − λθ`.
pub fn score_vector<'a>(
    link: LinkFunction,
    observations: impl IntoIterator<Item = &'a Observation>,
    theta: &DVector<f64>,
    l2_penalty: f64,
) -> DVector<f64> {
    let d = theta.len();
    let th = theta.as_slice();
    let mut g = vec![0.0; d];
    for o in observations {
        let x = o.x.as_slice();
        let z = dot(x, th);
        let r = o.y - link.eval(z);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += r * xi;
        }
    }
    let mut g = DVector::from_vec(g);
    if l2_penalty != 0.0 {
        g.axpy(-l2_penalty, theta, 1.0);
    }
    g
}

/// Quasi-log-likelihood `Σ [Y_i X_i'θ − m(X_i'θ)] − ½λ‖θ‖²`.
pub fn log_likelihood<'a>(
    link: LinkFunction,
    observations: impl IntoIterator<Item = &'a Observation>,
    theta: &DVector<f64>,
    l2_penalty: f64,
) -> f64 {
    let ll: f64 = observations
        .into_iter()
        .map(|o| {
            let z = o.x.dot(theta);
            o.y * z - link.log_partition(z)
        })
        .sum();
    ll - 0.5 * l2_penalty * theta.norm_squared()
}

fn fisher_matrix<'a>(
    link: LinkFunction,
    observations: impl IntoIterator<Item = &'a Observation>,
    theta: &DVector<f64>,
    l2_penalty: f64,
    out: &mut DMatrix<f64>,
) {
    let d = theta.len();
    let th = theta.as_slice();
    out.fill(0.0);
    let h = out.as_mut_slice();
    for o in observations {
        let x = o.x.as_slice();
        let w = link.derivative(dot(x, th));
        // upper triangle, column-major
        for j in 0..d {
            let wx = w * x[j];
            if wx == 0.0 {
                continue;
            }
            let col = &mut h[j * d..j * d + j + 1];
            for (i, hij) in col.iter_mut().enumerate() {
                *hij += wx * x[i];
            }
        }
    }
    for j in 0..d {
        for i in 0..j {
            out[(j, i)] = out[(i, j)];
        }
        out[(j, j)] += l2_penalty;
    }
}

fn newton_direction(fisher: &DMatrix<f64>, score: &DVector<f64>) -> Result<DVector<f64>> {
    let mut step_matrix = fisher.clone();
    let mut lambda_min = min_eigenvalue(&step_matrix);
    if lambda_min < FISHER_EIGEN_FLOOR {
        for i in 0..step_matrix.nrows() {
            step_matrix[(i, i)] += FISHER_RIDGE;
        }
        lambda_min = min_eigenvalue(&step_matrix);
        if lambda_min < FISHER_EIGEN_FLOOR || !lambda_min.is_finite() {
            return Err(Error::SingularFisher {
                min_eigenvalue: lambda_min,
            });
        }
    }
    let chol = step_matrix.cholesky().ok_or(Error::SingularFisher {
        min_eigenvalue: lambda_min,
    })?;
    Ok(chol.solve(score))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
