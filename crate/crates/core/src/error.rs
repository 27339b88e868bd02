use thiserror::Error;

/// Errors raised by grid construction, calculus, and flow routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not match grid: expected {expected} values, got {got}")]
    FieldSize { expected: usize, got: usize },

    #[error("non-finite value at node {node}: {context}")]
    NonFinite { node: usize, context: &'static str },

    #[error("index out of range: k = {k} for n = {n}")]
    DegreeOutOfRange { k: usize, n: usize },

    #[error("state is not convex: min radius {min_radius:.3e} at node {node}")]
    NotConvex { min_radius: f64, node: usize },

    #[error("W_u leaves the Garding cone Gamma_{k} at node {node}")]
    OutsideGardingCone { k: usize, node: usize },

    #[error("nonpositive value {value:.3e} at node {node} ({context})")]
    NonPositive {
        node: usize,
        value: f64,
        context: &'static str,
    },

    #[error("invalid psi: {0}")]
    InvalidPsi(String),

    #[error("evenness defect {defect:.3e}: psi is not antipodally symmetric")]
    Uneven { defect: f64 },

    #[error("psi is inadmissible: min eigenvalue {min_eigenvalue:.6e} of W_f, f = psi^(1/(1+k alpha))")]
    Inadmissible { min_eigenvalue: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time step underrun: dt = {dt:.3e} < dt_min = {dt_min:.3e} at t = {t:.6}: {reason}")]
    StepUnderrun {
        t: f64,
        dt: f64,
        dt_min: f64,
        reason: String,
    },

    #[error("invariant violated at t = {t:.6}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("non-monotone rescaled time at sample {0}")]
    NonMonotoneTime(usize),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
