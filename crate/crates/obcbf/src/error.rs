//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector field evaluated to a non-finite value at tau = {tau}")]
    NonFiniteField { tau: f64 },

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("matrix is not symmetric (max |S - S^T| = {defect:.3e})")]
    NotSymmetric { defect: f64 },

    #[error("{what} is not positive definite (min eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("observer matrix A - LC is not Hurwitz: {details}")]
    NotHurwitz { details: String },

    #[error("certification inequality '{name}' failed: lhs {lhs:.6e} vs rhs {rhs:.6e}")]
    CertificationFailed { name: String, lhs: f64, rhs: f64 },

    #[error("(A, C) pair is not observable (observability rank {rank} < {n})")]
    NotObservable { rank: usize, n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("estimate covariance lost positive definiteness at t = {t} (min eigenvalue {min_eigenvalue:.3e})")]
    CovarianceNotPd { t: f64, min_eigenvalue: f64 },

    #[error("quadratic program solver failed: {0}")]
    QpSolver(String),

    #[error("simulation aborted at t = {t}: {reason}")]
    SimulationAborted { t: f64, reason: String },
}
