//! Continuous-variable Born machine toolkit.
//!
//! Simulates parameterized continuous-variable circuits — exactly in phase
//! space for Gaussian gates, in truncated Fock space otherwise — draws
//! homodyne samples from them, and trains the circuit parameters by
//! gradient descent on an unbiased MMD estimator with classical or quantum
//! kernels, optionally through a photon-loss channel.
//!
//! Module map:
//! - [`fock`]: truncated Fock-space operators, gates, states, densities
//! - [`gaussian`]: symplectic phase-space simulation and exact homodyne
//! - [`circuit`]: the gate set, parameter view, shift rules, dispatch
//! - [`sampler`]: gridded inverse-CDF homodyne sampling for Fock states
//! - [`kernel`]: Gaussian RBF and quantum feature-map kernels
//! - [`mmd`]: the unbiased estimator, its gradient, exact-density checks
//! - [`trainer`]: the batch gradient-descent loop
//! - [`dataset`]: target generation and CSV I/O
//! - [`stats`]: KS tests used throughout the test suites

pub mod circuit;
pub mod dataset;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod kernel;
pub mod linalg;
pub mod mmd;
pub mod sampler;
pub mod stats;
pub mod trainer;

pub use circuit::{BackendConfig, BackendSelect, Circuit, Gate, GateKind, ShiftRules};
pub use error::{Error, Result};
pub use fock::{FockConfig, FockState};
pub use gaussian::{GaussianState, LossChannel};
pub use kernel::{Combiner, KernelConfig, KernelKind, KernelSpec};
pub use mmd::{GradientEstimate, MmdEstimate};
pub use sampler::GridSpec;
pub use trainer::{InitMode, TrainConfig, TrainLogEntry, UpdateMode};
