//! A numerical laboratory for the fractional Laplacian `(-Δ)^s`.
//!
//! The crate evaluates the singular integral on lattice-sampled functions,
//! solves `(-Δ)^s u = f(u)` with exterior data, and checks maximum
//! principles and sliding-method monotonicity on the results.
//!
//! Module map:
//! - [`kernel`]: parameters, constants, Poisson and exterior kernels
//! - [`field`]: grid functions with exterior models and shift algebra
//! - [`operator`]: pointwise and assembled discrete operator
//! - [`poisson`]: s-harmonic replacement and the average inequality
//! - [`domains`]: domain predicates, density condition, widths
//! - [`solver`]: damped Newton for bounded and layer problems
//! - [`sliding`]: hypothesis checks, τ scans, principle verifiers
//! - [`scenario`]: JSON scenarios and the command implementations

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domains;
pub mod error;
pub mod field;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod poisson;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod sliding;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use kernel::{make_params, FracParams};
