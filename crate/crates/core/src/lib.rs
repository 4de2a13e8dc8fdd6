//! Analysis of bipartite Bell scenarios.

pub mod dataset;
pub mod error;
pub mod linprog;
pub mod moment;
pub mod polytope;
pub mod quantum;
pub mod scenario;
pub mod sdp;
pub mod simulate;

pub use error::{Error, Result};
pub use scenario::{BellFunctional, CountsTable, Form, ProbabilityTable, Scenario};

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
