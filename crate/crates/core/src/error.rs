use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter vector has length {got}, expected {expected}")]
    ParameterLength { expected: usize, got: usize },

    #[error("invalid delay {0}: delays must be positive and finite")]
    InvalidDelay(f64),

    #[error("resolvent is singular at lambda = {lambda} (transmission pole)")]
    TransmissionPole { lambda: Complex64 },

    #[error("asymptotic block U^T A(theta) V is singular at theta = {theta:?}")]
    SingularAsymptotic { theta: Vec<f64> },

    #[error("U^T A0 V is singular (smallest singular value {sigma_min:.3e}); the system is not causal")]
    NonCausal { sigma_min: f64 },

    #[error(
        "system is not strongly exponentially stable (spectral abscissa {abscissa:.6e}, \
         difference-equation radius {delta_radius:.6})"
    )]
    StrongStabilityViolation { abscissa: f64, delta_radius: f64 },

    #[error("eigenvalue solver failed: {0}")]
    EigenSolver(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("level-set iteration exceeded {0} levels; increase tol or N")]
    IterationCap(usize),

    #[error("certificate is missing singular vectors")]
    MissingVectors,

    #[error("no start produced a strongly stable closed loop; stabilize the plant first")]
    NoStabilizingStart,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
