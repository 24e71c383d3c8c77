//! Dispersive estimates for fractional Schrödinger propagators on real
//! hyperbolic spaces and homogeneous trees.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimates;
pub mod hn_geometry;
pub mod hn_kernel;
pub mod hn_phase;
pub mod nls_tree;
pub mod oscquad;
pub mod specfun;
pub mod tree;

pub use error::{Error, Result};
