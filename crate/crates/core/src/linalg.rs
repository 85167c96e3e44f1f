//! Feature vectors and the small amount of dense linear algebra the
//! policies need: weighted norms and symmetric minimum eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the unit-ball constraint for accumulated round-off.
pub const NORM_SLACK: f64 = 1e-12;

/// A context vector `x_{t,a}` with Euclidean norm at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    /// Wraps `coords`, rejecting non-finite entries or norms above one.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("feature vector must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("feature vector has a non-finite coordinate"));
        }
        let v = DVector::from_vec(coords);
        let norm = v.norm();
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::invalid(format!(
                "feature vector norm {norm} exceeds the unit ball"
            )));
        }
        Ok(FeatureVector(v))
    }

    /// Builds a feature vector without checking the norm. Callers must
    /// guarantee `‖coords‖ ≤ 1`.
    pub(crate) fn from_unit_ball(v: DVector<f64>) -> Self {
        debug_assert!(v.norm() <= 1.0 + NORM_SLACK);
        FeatureVector(v)
    }

    pub fn zeros(d: usize) -> Self {
        FeatureVector(DVector::zeros(d))
    }

    /// The `i`-th standard basis vector in dimension `d`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        FeatureVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dot(&self, theta: &DVector<f64>) -> f64 {
        self.0.dot(theta)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(x: FeatureVector) -> Self {
        x.0.as_slice().to_vec()
    }
}

/// `‖x‖_A = √(x'Ax)`.
///
/// Tiny negative quadratic forms (down to `-1e-12`) are treated as zero.
pub fn weighted_norm(x: &DVector<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let q = quadratic_form(x, a);
    if q < -1e-12 {
        return Err(Error::NonPositiveDefinite { quadratic_form: q });
    }
    Ok(q.max(0.0).sqrt())
}

/// `x'Ax` without allocating.
pub fn quadratic_form(x: &DVector<f64>, a: &DMatrix<f64>) -> f64 {
    let d = x.len();
    debug_assert_eq!(a.nrows(), d);
    let mut acc = 0.0;
    for j in 0..d {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = a.column(j);
        let mut s = 0.0;
        for i in 0..d {
            s += x[i] * col[i];
        }
        acc += s * xj;
    }
    acc
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Uses the symmetric QR eigensolver; only the lower triangle is read.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest absolute entry of `a·b − I`.
pub fn identity_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let p = a * b;
    let mut worst: f64 = 0.0;
    for j in 0..p.ncols() {
        for i in 0..p.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - target).abs());
        }
    }
    worst
}
