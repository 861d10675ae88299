//! Prescribed-performance control of a quadcopter carrying a manipulator arm.
//!
//! The crate bundles the control laws, a rigid-body simulator with a lumped
//! arm-coupling model, and a harness that runs reproducible trials.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod cli;
pub mod control;
pub mod dynamics;
pub mod envelope;
pub mod harness;
pub mod error;
pub mod eso;
pub mod so3;

pub use error::{Error, Result};
