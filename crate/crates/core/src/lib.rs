//! Exact finite-instance laboratory for consequentialist reward
//! misspecification.
//!
//! Every quantity is computed by enumeration over explicit finite supports:
//! reward laws, environments, proxy channels, executed values and the
//! information a proxy carries about the true reward.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod error;
pub mod harness;
pub mod prob;
pub mod theorems;
pub mod valuation;
pub mod world;

pub use error::{Error, Result};
