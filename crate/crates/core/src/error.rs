use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("zero pivot at row {row} during factorization")]
    SingularPivot { row: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("interior residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    InteriorResidual { residual: f64, tol: f64 },

    #[error("deflation vector is not an eigenvector (residual {residual:.3e})")]
    NotAnEigenvector { residual: f64 },

    #[error("constraint rank {rank} does not match expected {expected}")]
    ConstraintRank { rank: usize, expected: usize },

    #[error("boundary data violates the solvability condition on subdomain {subdomain} (defect {defect:.3e})")]
    Incompatible { subdomain: usize, defect: f64 },

    #[error("partition is not chi-nodal: {0}")]
    NotChiNodal(String),

    #[error("canonical system residual {residual:.3e} exceeds tolerance")]
    CanonicalResidual { residual: f64 },

    #[error("branch matching unresolved near sigma = {sigma:.6e}")]
    UnresolvableMatching { sigma: f64 },

    #[error("nodal set not aligned with the mesh: a fraction {fraction:.3} of cells is ambiguous")]
    MisalignedNodalSet { fraction: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidPartition(_)
                | Error::EmptyRegion
                | Error::InvalidWeights(_)
                | Error::InvalidMesh(_)
                | Error::InvalidInput(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
