//! Congestion pricing for capacity-constrained network links.
//!
//! Users with strongly concave utilities share links of fixed capacity. Link
//! prices are found by minimizing the dual objective, either with the full
//! dual gradient or from the reactions of single randomly sampled users
//! (projected stochastic gradient descent). The crate also ships reference
//! solvers, error metrics, theoretical bound values and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod numeric;
pub mod response;
pub mod rng;
pub mod scenarios;
pub mod solvers;
pub mod utility;
pub mod verify;

pub use error::{Error, Result};
pub use network::{aggregate_demand, route_price, validate, Allocation, Network, Population, PriceVector};
pub use utility::{QuadraticUtility, StronglyConcaveUtility};
