use thiserror::Error;

/// A single named rule that a scenario or parameter set failed.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    pub rule: String,
    pub detail: String,
}

impl Violation {
    pub fn new(rule: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            rule: rule.into(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds {tolerance:.3e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("defective matrix: eigenvalue {value} has algebraic multiplicity {algebraic} but only {geometric} eigenvectors")]
    Defective {
        value: num_complex::Complex64,
        algebraic: usize,
        geometric: usize,
    },

    #[error("no degenerate eigenvalue found: {0}")]
    NoDegeneracy(String),

    #[error("seed vector is numerically zero (<phi|phi> = {0:.3e})")]
    ZeroVector(f64),

    #[error("trivial transformation: {0}")]
    TrivialTransformation(String),

    #[error(
        "singular restricted matrix (smallest singular value {smallest:.3e}, norm {norm:.3e})"
    )]
    Singular { smallest: f64, norm: f64 },

    #[error("not a projector: |p^2 - p| = {0:.3e}")]
    NotProjector(f64),

    #[error("spectral parameter hits the pole lambda = mu")]
    Pole,

    #[error("F_a(t) too small to invert at t = {t} ({value:.3e})")]
    SingularF { t: f64, value: f64 },

    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),

    #[error("validation failed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "integrator rejected step at t = {t}: error estimate {estimate:.3e} with step {step:.3e}"
    )]
    StepRejected { t: f64, step: f64, estimate: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
