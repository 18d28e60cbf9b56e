//! Neural power-method and inverse-power-method eigensolvers for linear
//! differential operators, with classical finite-difference baselines.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod fdm;
pub mod harness;
pub mod io;
pub mod network;
pub mod problems;
pub mod runtime;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
