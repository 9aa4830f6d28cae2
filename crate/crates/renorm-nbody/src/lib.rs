//! Gravitational N-body integration in renormalized time.
//!
//! The crate provides:
//!
//! - the N-body vector field with pairwise diagnostics ([`dynamics`]);
//! - the global time-renormalization functions s_0..s_4 and the system
//!   rewritten in fictitious time ([`renorm`]);
//! - lower bounds on the radius of convergence of solutions and the
//!   constants lambda_0, lambda_*, beta derived from them ([`bounds`]);
//! - truncated power-series (jet) arithmetic, Taylor-coefficient generation
//!   for both vector fields, and radius-of-convergence estimation
//!   ([`series`], [`jets`]);
//! - a constant-step Taylor integrator and an embedded explicit
//!   Runge-Kutta engine with the Verner 9(8) pair ([`integrate`]);
//! - problem definitions, JSON ingestion and the experiment pipelines
//!   (radius scan, strip width, step-matched comparison) behind the CLI
//!   ([`problem`], [`experiments`]).

// Numerics idioms: `!(x > 0.0)` deliberately rejects NaN alongside
// non-positives, and index loops mirror the mathematical double sums.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod bounds;
pub mod dd;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod integrate;
pub mod jets;
pub mod problem;
pub mod renorm;
pub mod scalar;
pub mod series;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Real;
