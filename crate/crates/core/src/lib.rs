//! G-expectation, degenerate Hamiltonian G-SDEs, coupling by change of measure
//! and numerical checks of the resulting Harnack and gradient estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coupling;
pub mod error;
pub mod gcore;
pub mod gsde;
pub mod hjb;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
