use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DamError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("distance {distance} m is below the reference distance {reference} m")]
    BelowReferenceDistance { distance: f64, reference: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("paths {first} and {second} share discrete delay {tap}; paths are not resolvable")]
    UnresolvablePaths { first: usize, second: usize, tap: usize },

    #[error("matrix {name} is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { name: &'static str, condition: f64 },

    #[error("zero-forcing infeasible: {columns} nulled columns with {antennas} antennas (short by {deficit})")]
    InfeasibleZeroForcing { columns: usize, antennas: usize, deficit: usize },

    #[error("sensing projector removes the line-of-sight steering direction")]
    LosSuppressed,

    #[error("degenerate sensing configuration: {0}")]
    DegenerateSensing(String),

    #[error("estimation failed: wanted {wanted} peaks, found {}", found.len())]
    EstimationFailure { wanted: usize, found: Vec<(f64, f64)> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("subproblem infeasible: constraint family `{family}` violated by {violation:.3e}")]
    Infeasible { family: String, violation: f64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("optimizer start is infeasible: {0}; lower the CRB threshold demand or raise the power budget")]
    InfeasibleStart(String),
}

pub type Result<T> = std::result::Result<T, DamError>;
