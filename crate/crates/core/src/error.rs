use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the characterization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside the valid range [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("phase matching impossible: {0}")]
    PhaseMatchingImpossible(String),

    #[error("transverse wavevector {q} rad/um is evanescent (|k_s| = {k_s} rad/um)")]
    EvanescentSignal { q: f64, k_s: f64 },

    #[error("quadrature did not converge: relative change {achieved:.3e} > {tolerance:.3e} at {nodes} nodes")]
    Accuracy {
        achieved: f64,
        tolerance: f64,
        nodes: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("not measurable: {0}")]
    NotMeasurable(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resource limit: side length {n} exceeds cap {cap}")]
    Resource { n: usize, cap: usize },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::PhaseMatchingImpossible(_) => "phase-matching",
            Error::EvanescentSignal { .. } => "evanescent",
            Error::Accuracy { .. } => "accuracy",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Data(_) => "data",
            Error::Contract(_) => "contract",
            Error::IndexOutOfRange { .. } => "index",
            Error::NotMeasurable(_) => "not-measurable",
            Error::Geometry(_) => "geometry",
            Error::Resource { .. } => "resource",
            Error::Format { .. } | Error::UnsupportedDtype(_) => "format",
            Error::Config(_) => "config",
            Error::InvalidArgument(_) => "argument",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
