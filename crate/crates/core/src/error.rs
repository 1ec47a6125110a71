//! Error types shared across the solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition stated by the operation contract was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Floating-point overflow or loss of representability.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A linear system was too ill-conditioned to solve reliably.
    #[error("near-singular solve: condition estimate {cond:.3e} ({context})")]
    NearSingular { cond: f64, context: String },

    /// An iterative method failed to converge.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// Quadrature refinement check failed to settle within tolerance.
    #[error("quadrature non-convergence: rel. change {change:.3e} exceeds {tol:.3e}")]
    QuadratureNonConvergence { change: f64, tol: f64 },

    /// Frequency too close to a diffraction threshold of the lattice.
    #[error("diffraction threshold proximity: |k - |q+alpha|| = {distance:.3e} at q index {q_index:?}")]
    ThresholdProximity { distance: f64, q_index: [i64; 3] },
}

pub type Result<T> = std::result::Result<T, Error>;
