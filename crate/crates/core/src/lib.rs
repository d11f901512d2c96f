//! Simulation of chiral excitation routing in spin networks.
//!
//! The crate has an abstract layer (flux triangles, chains and routers built
//! from single-excitation hopping Hamiltonians) and a Rydberg-atom layer
//! (dipole matrix elements, effective triangle couplings and the full
//! multilevel router).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod error;
mod quad;
pub mod interaction;
pub mod nelder_mead;
pub mod fullmodel;
pub mod network;
pub mod protocols;
pub mod triangle;
pub mod units;

pub use error::{Error, Result};
