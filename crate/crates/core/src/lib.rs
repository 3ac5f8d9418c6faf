//! Proportional-fair traffic aggregation across multiple radio access
//! technologies.
//!
//! The crate models clients that can reach several base stations at once and
//! provides:
//!
//! * [`waterfill`]: the per-base-station proportional-fair water-fill;
//! * [`afra`]: the distributed dynamics that repeatedly water-fill one base
//!   station at a time until no base station can raise its level;
//! * [`ddnum`]: a dual-decomposition baseline driven by per-BS prices;
//! * [`oracle`]: an independent projected-gradient solver plus equilibrium
//!   identity checks and the closed-form step bound;
//! * [`scenario`]: seeded random topologies and the two-client fixture;
//! * [`harness`]: experiment orchestration behind the `afra` CLI.

pub mod afra;
pub mod ddnum;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod waterfill;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{Allocation, Matrix, Topology};
