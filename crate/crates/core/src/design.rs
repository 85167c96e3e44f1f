//! The design matrix `V = Σ X_i X_i'` with an incrementally maintained
//! inverse and the observation log needed to refit the MLE.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, quadratic_form, FeatureVector};

/// Below this minimum eigenvalue the design is treated as singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-10;

/// Number of Sherman–Morrison updates between full refactorizations.
pub const REFACTOR_INTERVAL: usize = 1000;

/// Sherman–Morrison carries forward the rounding error of the inverse it
/// starts from, which is roughly `cond(V)·ε`. Until a factorization with
/// `λ_min/λ_max` at least this large exists, every update refactors.
pub const WELL_CONDITIONED_RATIO: f64 = 1e-4;

/// One absorbed `(X_i, Y_i)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: FeatureVector,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct DesignState {
    dim: usize,
    ridge: f64,
    gram: DMatrix<f64>,
    inverse: Option<DMatrix<f64>>,
    log: Vec<Observation>,
    since_refactor: usize,
    well_conditioned: bool,
}

impl DesignState {
    /// Empty design, `V = 0`. The inverse appears once `V` becomes nonsingular.
    pub fn new(dim: usize) -> Self {
        Self::with_ridge(dim, 0.0)
    }

    /// Design started at `V = ridge·I`. A positive ridge makes the inverse
    /// available from the first round.
    pub fn with_ridge(dim: usize, ridge: f64) -> Self {
        assert!(ridge >= 0.0, "ridge must be nonnegative");
        let gram = DMatrix::identity(dim, dim) * ridge;
        let inverse = (ridge > 0.0).then(|| DMatrix::identity(dim, dim) / ridge);
        DesignState {
            dim,
            ridge,
            gram,
            inverse,
            log: Vec::new(),
            since_refactor: 0,
            well_conditioned: ridge > 0.0,
        }
    }

    pub fn from_observations(
        dim: usize,
        ridge: f64,
        observations: impl IntoIterator<Item = Observation>,
    ) -> Self {
        let mut state = Self::with_ridge(dim, ridge);
        for obs in observations {
            state.rank_one_update(obs.x, obs.y);
        }
        state
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Number of absorbed observations.
    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn inverse(&self) -> Option<&DMatrix<f64>> {
        self.inverse.as_ref()
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.log
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.gram)
    }

    /// Absorbs `(x, y)`: `V ← V + xx'`, the inverse via Sherman–Morrison, and
    /// a full refactorization every [`REFACTOR_INTERVAL`] updates.
    pub fn rank_one_update(&mut self, x: FeatureVector, y: f64) {
        assert_eq!(x.dim(), self.dim, "feature dimension mismatch");
        let v = x.as_vector();
        self.gram.ger(1.0, v, v, 1.0);
        self.since_refactor += 1;

        match self.inverse.as_mut() {
            Some(inv) if self.well_conditioned && self.since_refactor < REFACTOR_INTERVAL => {
                let u = &*inv * v;
                let denom = 1.0 + v.dot(&u);
                inv.ger(-1.0 / denom, &u, &u, 1.0);
            }
            _ => self.refactor(),
        }
        self.log.push(Observation { x, y });
    }

    /// Recomputes the inverse from `V` directly. Leaves the inverse absent if
    /// `V` is numerically singular.
    pub fn refactor(&mut self) {
        self.since_refactor = 0;
        let eig = SymmetricEigen::new(self.gram.clone()).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(0.0, f64::max);
        self.inverse = invert_spd_with_min(&self.gram, lo);
        self.well_conditioned = self.inverse.is_some() && lo >= WELL_CONDITIONED_RATIO * hi;
    }

    /// `‖x‖_{V^{-1}}`, the exploration width of `x`.
    pub fn width(&self, x: &DVector<f64>) -> Result<f64> {
        let inv = self.inverse.as_ref().ok_or_else(|| Error::SingularDesign {
            min_eigenvalue: self.min_eigenvalue(),
        })?;
        Ok(quadratic_form(x, inv).max(0.0).sqrt())
    }

    /// Adds `eps` to every entry of the maintained inverse. Exists so tests
    /// can check that periodic refactorization removes accumulated drift.
    #[doc(hidden)]
    pub fn perturb_inverse(&mut self, eps: f64) {
        if let Some(inv) = self.inverse.as_mut() {
            inv.add_scalar_mut(eps);
        }
    }
}

/// Inverse of a symmetric matrix whose minimum eigenvalue is at least
/// [`SINGULAR_EIGENVALUE`]; `None` otherwise.
pub fn invert_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    invert_spd_with_min(a, min_eigenvalue(a))
}

fn invert_spd_with_min(a: &DMatrix<f64>, min_eigenvalue: f64) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 || min_eigenvalue < SINGULAR_EIGENVALUE {
        return None;
    }
    let mut inv = a.clone().cholesky()?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
