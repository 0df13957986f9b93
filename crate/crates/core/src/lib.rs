//! Numerical core for experimenting with universal approximation through
//! depth-as-dynamics.
//!
//! Everything here is allocation-only (`alloc`), single-threaded and pure:
//! grid-sampled function spaces and their metrics, piecewise-analytic
//! activations with exact transitivity classification, feed-forward nets
//! and random-feature fitting, the composition operator and its escape
//! dynamics, constrained final-layer assembly, weighted (growth-controlled)
//! approximation, simplex-constrained rate experiments, and the explicit
//! free-space maps. IO, CLI and file formats live in the `uaplab` crate.
#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod activations;
pub mod constrained_approx;
pub mod depth_dynamics;
mod error;
pub mod free_space;
pub mod function_space;
pub mod linalg;
pub mod math;
pub mod network;
pub mod omega_modification;
pub mod rate_bounds;

pub use error::{Error, Result};
