//! Support-function solver for the normalized anisotropic expanding flow
//! `du/dt = psi * sigma_k(W_u)^alpha - eta(t) u` on the sphere, whose limits
//! solve the L^p Christoffel-Minkowski equation
//! `u^{1-p} sigma_k(W_u) = c * psi^{-1/alpha}` with `p = 1 + 1/alpha`.
//!
//! `W_u = hess(u) + u g` is the matrix of principal radii of curvature of the
//! convex body whose support function is `u`.
//!
//! Module map:
//!
//! * [`grid`]: sphere grids, quadrature, covariant derivatives, antipodal symmetry.
//! * [`calculus`]: radii spectra, `sigma_k`, mixed volumes, embeddings.
//! * [`psi`]: anisotropy families and the admissibility certificate.
//! * [`flow`]: normalized and raw time integration with runtime monitors.
//! * [`residual`]: stationarity certificate for the limit equation.
//! * [`oracles`]: closed-form round-sphere solutions and refinement studies.
//! * [`harness`]: run configuration, the command implementations, sweeps.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod calculus;
pub mod error;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod oracles;
pub mod psi;
pub mod residual;

pub use error::{Error, Result};
