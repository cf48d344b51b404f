//! Metropolis-adjusted Langevin sampling laboratory.
//!
//! - [`potential`]: targets `pi ∝ exp(-V)` with certified convexity bounds.
//! - [`kernels`]: MALA, ULA, exact Ornstein–Uhlenbeck and fine-step diffusion
//!   transitions, chain drivers and exact separable sampling.
//! - [`oracle1d`]: 1-D quadrature and closed forms used as reference values.
//! - [`diagnostics`]: Monte-Carlo estimators with standard errors.
//! - [`finite_chain`]: exact checks on small finite state spaces.
//! - [`sweep`] and [`verify`]: the experiment drivers behind the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod finite_chain;
pub mod kernels;
pub mod oracle1d;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use potential::Potential;
pub use nalgebra;
