use std::fmt;

use serde::Serialize;

pub type Result<T> = std::result::Result<T, Error>;

/// Which strict-feasibility assumption a failure points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    /// Strict feasibility of the relaxation (a positive definite X with M1⋅X < 0, M2⋅X < 0).
    PrimalSlater,
    /// Strict feasibility of the dual (y1, y2 > 0 with M0 − y0·I00 + y1·M1 + y2·M2 ≻ 0).
    DualSlater,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::PrimalSlater => f.write_str("primal Slater condition"),
            Assumption::DualSlater => f.write_str("dual Slater condition"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("quadratic index {0} out of range (expected 0, 1 or 2)")]
    InvalidIndex(usize),
    #[error("homogeneous coordinate |t| = {t:e} is not above tolerance {tol:e}")]
    DegenerateHomogeneous { t: f64, tol: f64 },
    #[error("invalid cone program: {0}")]
    InvalidProgram(String),
    #[error("interior-point solver hit the iteration limit ({iterations}); residuals p={primal_infeas:e} d={dual_infeas:e} gap={relative_gap:e}")]
    MaxIterations {
        iterations: usize,
        primal_infeas: f64,
        dual_infeas: f64,
        relative_gap: f64,
    },
    #[error("relaxation appears primal infeasible after {iterations} iterations ({hint} likely fails)")]
    PrimalInfeasible { iterations: usize, hint: Assumption },
    #[error("relaxation appears dual infeasible after {iterations} iterations ({hint} likely fails)")]
    DualInfeasible { iterations: usize, hint: Assumption },
    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("rotation needs form values of opposite sign, got {first:e} and {second:e}")]
    SameSignPair { first: f64, second: f64 },
    #[error("decomposition precondition violated: {0}")]
    DecompositionPrecondition(String),
    #[error("balanced decomposition stalled with {unmet} vector(s) above tolerance (G⋅X = {total:e})")]
    DecompositionStall { unmet: usize, total: f64 },
    #[error("no real vector in the range zeroes both quadratic forms at tolerance {tol:e}")]
    NoCommonIsotropicVector { tol: f64 },
    #[error("property report carries no rank-two decomposition")]
    MissingDecomposition,
    #[error("every candidate recovery vector has |t| <= {tol:e} (largest {largest:e})")]
    DegenerateT { largest: f64, tol: f64 },
    #[error("{assumption} violated: {detail}")]
    AssumptionViolated {
        assumption: Assumption,
        detail: String,
    },
    #[error("no feasible grid point in the search box")]
    NoFeasiblePointInBox,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
