use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// A determinant or linear system that must be non-singular vanished.
    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("point is {margin:e} from the cube boundary, at least {required:e} required")]
    Margin { margin: f64, required: f64 },

    #[error("unknown symmetry kind `{0}`")]
    InvalidKind(String),

    #[error("invariant subspace violated: {0}")]
    InvarianceViolation(String),
}
