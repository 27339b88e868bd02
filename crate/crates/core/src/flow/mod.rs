//! Time integration of the normalized flow
//! `du/dt = psi sigma_k(W_u)^alpha - eta u` and of the raw flow
//! `du/dt = psi sigma_k(W_u)^alpha`.
//!
//! Steps are Heun (RK2) with the embedded Euler solution as error estimate.
//! The step is also capped at a fraction of the explicit stability limit,
//! estimated by power iteration on the linearized right-hand side, and on
//! full `S^2` grids the right-hand side passes through the polar filter so
//! that the limit is set by the equatorial spacing.

mod config;
mod engine;
mod raw;
mod trace;

pub use config::{FlowConfig, InitialSpec, Mode, PsiSource, StepperConfig};
pub use engine::{
    eta, evaluate, evolve, j_functional, normalization_factor, normalized_rhs, prepare, renormalize, Evaluation,
    FlowKind, FlowProblem, FlowRun, FlowState, MonitorSummary, Prepared, RejectReason, RunStatus, StepOutcome,
    ETA_SLACK, EVENNESS_TOL, FLAG_OUTSIDE_THEOREM, MONOTONE_SLACK, VOLUME_TOL,
};
pub use raw::{
    evolve_unnormalized, rescale_raw_to_normalized, sup_distance_over_tau, RawOptions, RawRun, RawSample, RawStatus,
    RescaledSample,
};
pub use trace::{fmt17, FlowTrace, TraceRecord, TRACE_HEADER};
