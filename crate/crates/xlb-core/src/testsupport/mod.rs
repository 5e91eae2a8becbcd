//! Seeded generators and brute-force reference oracles.
//!
//! Everything in here exists to check the production code from an
//! independent angle. The oracles deliberately use different mechanisms than
//! the implementations they validate: taint marking is re-derived by
//! exhaustive def-use chain enumeration instead of a forward state scan, and
//! AUC by full pairwise comparison instead of rank statistics.

pub mod metrics;
pub mod taintgen;
pub mod universe;

pub use metrics::pairwise_auc;
pub use taintgen::{generate_program, oracle_marks, GeneratedProgram};
