//! Crate-wide error type.
//!
//! Errors fall into two families that the command-line layer maps onto
//! distinct exit codes: *validation* errors (bad geometry, malformed files,
//! inconsistent shapes — exit code 1) and *numerical* errors (singular or
//! ill-conditioned systems, covariance loss — exit code 2).

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- validation -----------------------------------------------------
    #[error("degenerate geometry: hole radius {hole} m must lie strictly inside outer radius {outer} m")]
    DegenerateGeometry { outer: f64, hole: f64 },

    #[error("mesh resolution must be positive and finite, got {0} m")]
    BadResolution(f64),

    #[error("element {element} has non-positive deformed area {area:.3e} m^2")]
    DegenerateElement { element: usize, area: f64 },

    #[error("{context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("non-finite value in field '{field}' at step {step}, node {node}")]
    NonFinite {
        field: String,
        step: usize,
        node: usize,
    },

    #[error("contact inconsistency at step {step}, node {node}: pressure {pressure:.3e} Pa with tool distance {distance:.3e} m")]
    ContactInconsistency {
        step: usize,
        node: usize,
        pressure: f64,
        distance: f64,
    },

    #[error("malformed container header in {path}: {reason}")]
    MalformedHeader { path: String, reason: String },

    #[error("container {path} truncated: step {step} incomplete")]
    TruncatedContainer { path: String, step: usize },

    #[error("sensor {sensor} lies {distance:.3} m from the nearest mesh node (limit {radius:.3} m)")]
    SensorOffPart {
        sensor: usize,
        distance: f64,
        radius: f64,
    },

    #[error("material table '{name}' invalid: {reason}")]
    BadMaterialTable { name: String, reason: String },

    #[error("time grid invalid: {0}")]
    BadTimeGrid(String),

    #[error("configuration invalid: {0}")]
    BadConfig(String),

    #[error("history too short: need at least {needed:.3} s, got {got:.3} s")]
    HistoryTooShort { needed: f64, got: f64 },

    #[error("empty snapshot set: {0}")]
    EmptySnapshots(String),

    #[error("measurement stream ended at step {got} of {expected}")]
    MeasurementStreamEnded { expected: usize, got: usize },

    // ---- numerics --------------------------------------------------------
    #[error("linear solve failed at step {step}: {reason}")]
    SolveFailed { step: usize, reason: String },

    #[error("step matrix ill-conditioned at step {step}")]
    IllConditioned { step: usize },

    #[error("innovation covariance singular at step {step} even after jitter")]
    InnovationSingular { step: usize },

    #[error("covariance lost positive semidefiniteness at step {step} (min eigenvalue {min_eig:.3e}, norm {norm:.3e})")]
    CovarianceNotPsd {
        step: usize,
        min_eig: f64,
        norm: f64,
    },

    // ---- passthrough ------------------------------------------------------
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse config: {0}")]
    TomlParse(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    /// The binary maps these to exit code 2, everything else to 1.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolveFailed { .. }
                | Error::IllConditioned { .. }
                | Error::InnovationSingular { .. }
                | Error::CovarianceNotPsd { .. }
        )
    }
}
