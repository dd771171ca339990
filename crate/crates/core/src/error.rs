//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]; the message prefix names the
//! module that raised it so callers (and the CLI) can report the failing
//! subsystem without downcasting.

use thiserror::Error;

/// Errors raised by the simulator, samplers, kernels and training loop.
#[derive(Debug, Error)]
pub enum Error {
    /// A state lost too much norm to truncation to keep sampling unbiased.
    #[error("fock: truncation leakage, squared norm {norm:.6e} below floor {floor:.6e}")]
    TruncationLeakage { norm: f64, floor: f64 },

    /// A mode index was out of range or repeated.
    #[error("{module}: invalid mode indices {modes:?} for {n_modes} modes")]
    InvalidModes {
        module: &'static str,
        modes: Vec<usize>,
        n_modes: usize,
    },

    /// Operand dimensions do not match.
    #[error("{module}: dimension mismatch ({left} vs {right})")]
    DimensionMismatch {
        module: &'static str,
        left: usize,
        right: usize,
    },

    /// A non-Gaussian gate reached the phase-space backend.
    #[error("gaussian: gate {gate} has no symplectic representation")]
    NonGaussianGate { gate: &'static str },

    /// A covariance block stopped being positive definite.
    #[error("gaussian: corrupted state, {context}")]
    CorruptedState { context: String },

    /// A parameter or configuration value violates its invariant.
    #[error("{module}: invalid parameter {name}: {reason}")]
    InvalidParameter {
        module: &'static str,
        name: &'static str,
        reason: String,
    },

    /// The sampling grid does not capture enough probability mass.
    #[error("sampler: grid mass deficit, captured {captured:.6e} of norm {norm:.6e}")]
    GridMassDeficit { captured: f64, norm: f64 },

    /// The unbiased estimator needs at least two samples per side.
    #[error("mmd: insufficient samples (m={m}, n={n}; need at least 2 each)")]
    InsufficientSamples { m: usize, n: usize },

    /// A loss or gradient stopped being finite.
    #[error("trainer: non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    /// Parameter index outside the trainable vector.
    #[error("circuit: parameter index {index} out of range ({len} trainable)")]
    ParamIndexOutOfRange { index: usize, len: usize },

    /// File contents did not parse.
    #[error("dataset: format error in {path} at line {line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },

    /// An I/O failure, annotated with the path involved.
    #[error("dataset: i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
