use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("empty input: no data rows")]
    EmptyInput,

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("model undefined at t = {t} (critical time {tc})")]
    Domain { t: f64, tc: f64 },

    #[error("degenerate basis: normal-equation condition estimate {condition:e}")]
    DegenerateBasis { condition: f64 },

    #[error("jacobian unavailable: both finite-difference sides infeasible for {parameter}")]
    Jacobian { parameter: &'static str },

    #[error("search failure: every visited point was infeasible or degenerate")]
    SearchFailure,

    #[error("fit failure from start (tc={tc}, m={m}, omega={omega}, phi={phi}): {cause}")]
    FitFailure {
        tc: f64,
        m: f64,
        omega: f64,
        phi: f64,
        cause: Box<Error>,
    },

    #[error("window fit failed for all {} starts: {}", causes.len(), causes.join("; "))]
    WindowFit { causes: Vec<String> },

    #[error("ensemble failure at t2 = {t2}: all {n_windows} windows failed")]
    EnsembleFailure { t2: f64, n_windows: usize },

    #[error("data does not cover the requested range: {0}")]
    Coverage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
