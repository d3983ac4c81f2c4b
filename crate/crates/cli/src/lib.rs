//! Configuration, experiment orchestration and the cost model for the
//! `srspmd` command line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cost;
pub mod data;
pub mod run;

pub use config::{ExperimentConfig, Pipeline};
pub use cost::{cost_compare, CostModel, CostRecord};
pub use run::{demand_sweep, run, Bundle};
