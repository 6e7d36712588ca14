//! Tail asymptotics for the strain of a one-dimensional elliptic equation
//! with a log-normal random coefficient.
//!
//! The model is `(a(x) v'(x))' = p(x)` on `[0, L]` with `v(0) = v(L) = 0` and
//! `a(x) = exp(-sigma * xi(x))`, where `xi` is a smooth stationary Gaussian
//! process with unit variance. The crate computes closed-form approximations
//! of
//!
//! ```text
//! w(b) = P( max_x |v'(x)| > b )
//! ```
//!
//! for large `b`, and checks them against direct and importance-sampled
//! Monte Carlo of the exact solution.
//!
//! Layout:
//!
//! - [`kernel`]: stationary covariance functions and their spectral moments.
//! - [`field`]: Gaussian path samplers (nominal, pinned, excursion-tilted).
//! - [`solver`]: forcing profiles, the closed-form strain and a finite-volume
//!   oracle.
//! - [`truncnorm`]: moments of a standard normal truncated to `Z <= zeta`.
//! - [`asymptotics`]: level equations, boundary profiles, prefactors and the
//!   assembled tail approximation.
//! - [`rare_event`]: Monte Carlo estimators, location histograms and the
//!   comparison harness.
//! - [`config`]: the flat `key=value` run configuration used by the CLI.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod field;
pub mod kernel;
pub mod normal;
pub mod optimize;
pub mod quadrature;
pub mod rare_event;
pub mod solver;
pub mod truncnorm;

pub use asymptotics::{approximate_tail, ApproxOptions, ApproxReport};
pub use error::{Error, Result};
pub use field::{FieldSampler, Grid, PathSample, SampleMethod};
pub use kernel::StationaryKernel;
pub use rare_event::{mc_direct, mc_tilted, TailEstimate};
pub use solver::{ForcingKind, ForcingProfile, ProblemSpec};
