use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An invariant of the experiment configuration does not hold.
    #[error("configuration error [{code}]: {message}")]
    Config { code: &'static str, message: String },

    /// A network produced a non-finite output.
    #[error("numeric overflow in experiment {experiment}, network {network}: {detail}")]
    NumericOverflow {
        experiment: usize,
        network: u64,
        detail: String,
    },

    #[error("kernel domain error: {0}")]
    KernelDomain(String),

    #[error("degenerate kernel input: {0}")]
    DegenerateInput(String),

    #[error("wick contraction needs an even number of points, got {0}")]
    OddArity(usize),

    #[error("pairing enumeration limited to n <= {max}, got {n}")]
    SizeLimit { n: usize, max: usize },

    #[error("quadrature did not converge: last estimate {estimate:e}, residual {residual:e}")]
    Quadrature { estimate: f64, residual: f64 },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("insufficient signal: {available} points usable, {required} required")]
    InsufficientSignal { available: usize, required: usize },

    #[error("collinear features: {0}")]
    CollinearFeatures(String),

    #[error("snapshot mismatch: {0}")]
    SnapshotMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(code: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            code,
            message: message.into(),
        }
    }

    /// Stable machine-readable identifier for the error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config { code, .. } => code,
            Error::NumericOverflow { .. } => "numeric-overflow",
            Error::KernelDomain(_) => "kernel-domain",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::OddArity(_) => "odd-arity",
            Error::SizeLimit { .. } => "size-limit",
            Error::Quadrature { .. } => "quadrature-nonconvergence",
            Error::DegenerateMeasure(_) => "degenerate-measure",
            Error::InsufficientSignal { .. } => "insufficient-signal",
            Error::CollinearFeatures(_) => "collinear-features",
            Error::SnapshotMismatch(_) => "snapshot-mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
