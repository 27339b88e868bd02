//! Run configuration, command implementations and sweeps behind the
//! `cmflow` binary.
//!
//! Every command returns an [`Outcome`] carrying the printed report and the
//! exit status; library errors map to exit codes through [`exit_code`].

mod commands;
mod config;
mod verify;

pub use commands::{
    check_psi, evolve, evolve_raw, export_mesh, sweep, sweep_threads, write_field, Outcome, SweepRow, SWEEP_HEADER,
    THREADS_ENV,
};
pub use config::{
    FlowSection, GridResolution, GridSection, MeshFormat, OutputSection, Overrides, PsiSection, RawSection, RunConfig,
    SweepPoint, SweepSection, DEFAULT_SWEEP_CAP,
};
pub use verify::{verify, Check, VerifyOptions, VerifyReport};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
/// Inadmissible or uneven `psi`, nonconvex body.
pub const EXIT_REJECTED: i32 = 2;
/// Unreadable or invalid configuration, I/O failure, sweep over its cap.
pub const EXIT_CONFIG: i32 = 3;
/// No convergence by `t_max`, or the step size collapsed.
pub const EXIT_NO_CONVERGENCE: i32 = 4;
/// A monitored invariant failed, or a verification check failed.
pub const EXIT_INVARIANT: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Inadmissible { .. }
        | Error::Uneven { .. }
        | Error::NotConvex { .. }
        | Error::OutsideGardingCone { .. }
        | Error::NonPositive { .. }
        | Error::InvalidPsi(_) => EXIT_REJECTED,
        Error::StepUnderrun { .. } => EXIT_NO_CONVERGENCE,
        Error::InvariantViolation { .. } | Error::NonFinite { .. } | Error::NonMonotoneTime(_) | Error::Oracle(_) => {
            EXIT_INVARIANT
        }
        Error::InvalidGrid(_)
        | Error::FieldSize { .. }
        | Error::DegreeOutOfRange { .. }
        | Error::InvalidConfig(_)
        | Error::Io(_) => EXIT_CONFIG,
    }
}
