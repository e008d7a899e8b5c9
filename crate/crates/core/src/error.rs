use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("value {value} lies outside [-1, 1]")]
    Domain { value: f64 },

    #[error("basis index {k} out of range for degree {degree}")]
    Index { k: usize, degree: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("locations {a} and {b} coincide within 1e-12")]
    DuplicateLocation { a: f64, b: f64 },

    #[error("reflection collision: t = {0} coincides with its mirror image")]
    ReflectionCollision(f64),

    #[error("separation condition violated: {0}")]
    Separation(String),

    #[error("certificate construction failed: {0}")]
    Construction(String),

    #[error("estimated model order {estimated} exceeds the maximum {max}")]
    OrderEstimation { estimated: usize, max: usize },

    #[error("ill-posed input: {0}")]
    IllPosed(String),

    #[error("degenerate locations: {0}")]
    DegenerateLocations(String),

    #[error("recovery inconsistent: forward residual {residual:e} exceeds {tolerance:e}")]
    RecoveryInconsistent { residual: f64, tolerance: f64 },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("reconstruction inconsistent: {0}")]
    ReconstructionInconsistent(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by a solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Index { .. }
                | Error::Shape(_)
                | Error::InvalidInput(_)
                | Error::DuplicateLocation { .. }
                | Error::ReflectionCollision(_)
                | Error::Separation(_)
        )
    }
}
