use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: unreadable files, malformed config, wrong shapes.
    Usage,
    /// The numerics failed: no convergence, unstable step, refused regime.
    Numerical,
    /// A modelling hypothesis is violated by the supplied data.
    Hypothesis,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error(
        "kernel unresolved by grid (gamma = {gamma}, h = {h}): operator reduces to diagonal, \
         principal eigenvector positivity lost"
    )]
    KernelUnresolved { gamma: f64, h: f64 },

    #[error("wrap aliasing: kernel diameter 2*gamma = {diameter} exceeds periodic domain length {length}")]
    WrapAliasing { diameter: f64, length: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("t = {t} lies in a bad season; the growth term is only defined on good seasons")]
    BadSeasonEvaluation { t: f64 },

    #[error("interval [{t0}, {t1}] does not lie within a single {season} season")]
    SeasonStraddle { t0: f64, t1: f64, season: &'static str },

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("{what} did not converge after {iterations} iterations (last error {error:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        error: f64,
    },

    #[error(
        "extinction regime: no positive periodic solution \
         (seasonal principal eigenvalue {lambda_p_omega} >= 0)"
    )]
    ExtinctionRegime { lambda_p_omega: f64 },

    #[error("no valid lower solution after {halvings} halvings of eps (last eps {eps:e})")]
    LowerSolution { halvings: usize, eps: f64 },

    #[error("monotonicity violated in {what} at iteration {iteration}: min increment {min_increment:e}")]
    MonotonicityViolation {
        what: &'static str,
        iteration: usize,
        min_increment: f64,
    },

    #[error("order violated: {0}")]
    OrderViolation(String),

    #[error("state must be strictly positive: component {index} is {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("configuration parse error: {0}")]
    ConfigParse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::StepFailure { .. }
            | Error::NotConverged { .. }
            | Error::ExtinctionRegime { .. }
            | Error::LowerSolution { .. }
            | Error::MonotonicityViolation { .. }
            | Error::OrderViolation(_) => ErrorClass::Numerical,
            Error::KernelUnresolved { .. }
            | Error::WrapAliasing { .. }
            | Error::InvalidKernel(_)
            | Error::InvalidGrid(_)
            | Error::InvalidParameter(_)
            | Error::Config(_) => ErrorClass::Hypothesis,
            _ => ErrorClass::Usage,
        }
    }
}
