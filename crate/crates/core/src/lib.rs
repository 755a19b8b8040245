//! Simulation and estimation core for a LEO constellation acting as a
//! decentralized spaceborne GNSS network.
//!
//! Pipeline: [`constellation`] geometry, [`observation`] synthesis,
//! [`estimability`] reduction to a full-rank model, [`topology`] mixing
//! matrices, [`solver`] centralized and decentralized solutions,
//! [`ambiguity`] integer fixing and the [`harness`] wiring it together.

#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used by the validators.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ambiguity;
pub mod constellation;
pub mod error;
pub mod estimability;
pub mod harness;
pub mod linalg;
pub mod observation;
pub mod solver;
pub mod topology;

pub use error::{Error, Result};
