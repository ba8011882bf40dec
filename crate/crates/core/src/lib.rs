//! Exact solver for the multiple-vehicle pickup-and-delivery problem.
//!
//! Tours are encoded as permutations of a reference cycle, the routing
//! constraints become linear rows over the permutation bits, and the tour
//! cost becomes a quadratic form that is made convex without changing its
//! value at any permutation. A branch-and-bound over the binaries then
//! closes the gap, with a brute-force oracle as ground truth for small
//! instances.

pub mod bench;
pub mod bnb;
pub mod cli;
pub mod convexify;
pub mod error;
pub mod graph_core;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod plot;
pub mod qp_relax;

pub use error::{Error, Result};
