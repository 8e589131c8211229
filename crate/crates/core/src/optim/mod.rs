//! Dense linear and convex quadratic programming.
//!
//! Everything downstream (set emptiness, support functions, redundancy
//! removal, MPC, supervision overrides) funnels into these two entry points.
//! Problems are tiny (tens of variables, at most a few hundred rows), so both
//! solvers are dense and favor determinism over speed: the simplex uses
//! Bland's rule throughout and the QP active-set method breaks ties by lowest
//! constraint index, so a given problem always yields the same pivot sequence.

mod lp;
mod qp;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use lp::{solve_lp, solve_lp_with_dual};
pub use qp::solve_qp;

/// Linear program `min cᵀx subject to Ax ≤ b`, `x` free.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LpProblem {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, OptimError> {
        if a.ncols() != c.len() || a.nrows() != b.len() {
            return Err(OptimError::DimensionMismatch {
                what: "LpProblem",
                detail: format!(
                    "c has {} entries, A is {}x{}, b has {}",
                    c.len(),
                    a.nrows(),
                    a.ncols(),
                    b.len()
                ),
            });
        }
        if c.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(OptimError::NonFinite("LpProblem"));
        }
        Ok(Self { c, a, b })
    }
}

/// Convex quadratic program
/// `min ½xᵀHx + fᵀx subject to Ax ≤ b, A_eq x = b_eq`.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

/// Largest allowed asymmetry in a QP cost matrix.
pub const QP_SYMMETRY_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as "positive semidefinite".
pub const QP_PSD_TOL: f64 = -1e-8;

impl QpProblem {
    /// Builds an inequality-constrained QP. `H` must be symmetric within
    /// [`QP_SYMMETRY_TOL`] and PSD within [`QP_PSD_TOL`].
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self, OptimError> {
        Self::with_equalities(h, f, a, b, DMatrix::zeros(0, 0), DVector::zeros(0))
    }

    pub fn with_equalities(
        h: DMatrix<f64>,
        f: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
    ) -> Result<Self, OptimError> {
        let n = h.nrows();
        if h.ncols() != n || f.len() != n {
            return Err(OptimError::DimensionMismatch {
                what: "QpProblem",
                detail: format!("H is {}x{}, f has {}", h.nrows(), h.ncols(), f.len()),
            });
        }
        let a_eq = if a_eq.nrows() == 0 { DMatrix::zeros(0, n) } else { a_eq };
        let a = if a.nrows() == 0 { DMatrix::zeros(0, n) } else { a };
        if a.ncols() != n || a.nrows() != b.len() || a_eq.ncols() != n || a_eq.nrows() != b_eq.len()
        {
            return Err(OptimError::DimensionMismatch {
                what: "QpProblem",
                detail: "constraint blocks do not match the variable count".into(),
            });
        }
        let asym = (&h - h.transpose()).abs().max();
        if asym > QP_SYMMETRY_TOL {
            return Err(OptimError::NotSymmetric(asym));
        }
        let min_eig = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        if min_eig < QP_PSD_TOL {
            return Err(OptimError::NotPsd(min_eig));
        }
        if h
            .iter()
            .chain(f.iter())
            .chain(a.iter())
            .chain(b.iter())
            .chain(a_eq.iter())
            .chain(b_eq.iter())
            .any(|v| !v.is_finite())
        {
            return Err(OptimError::NonFinite("QpProblem"));
        }
        Ok(Self { h, f, a, b, a_eq, b_eq })
    }
}

/// Outcome of an LP or QP solve.
#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Optimal { x: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn optimal(self) -> Option<(DVector<f64>, f64)> {
        match self {
            SolveStatus::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, SolveStatus::Optimal { .. })
    }
}

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("{what}: inconsistent dimensions ({detail})")]
    DimensionMismatch { what: &'static str, detail: String },
    #[error("{0}: non-finite entries")]
    NonFinite(&'static str),
    #[error("QP cost matrix asymmetric (max |H - Hᵀ| = {0:.3e})")]
    NotSymmetric(f64),
    #[error("QP cost matrix not PSD (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("LP solver returned {status:?} while {context}")]
    UnexpectedStatus { status: SolveStatus, context: &'static str },
}
