//! Fleet sizing for shared micromobility vehicles on a path network.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand;
pub mod dispatch;
pub mod error;
pub mod fit;
pub mod matching;
pub mod mincover;
pub mod pathnet;
pub mod shareability;
pub mod synthetic;
pub mod trips;
pub mod upgrade;

pub use error::{Error, Result};
