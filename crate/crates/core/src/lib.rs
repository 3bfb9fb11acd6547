//! Discounted and average-cost optimal control of the periodic-review
//! inventory problem on a lattice: value iteration, (s,S) extraction,
//! K-convexity checks, the vanishing-discount construction of the average-cost
//! relative value function, and Monte Carlo cross-checks.

pub mod average;
pub mod bounds;
pub mod dp;
pub mod error;
pub mod instance;
pub mod io;
pub mod lattice;
pub mod model;
pub mod policy;
pub mod simulate;

pub use error::{Error, Result};
