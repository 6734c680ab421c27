//! Entropic associative memory.
//!
//! Objects are functions from attributes to discrete values, stored by
//! overlapping them in boolean tables ([`Amr`]). A [`MemorySystem`] keeps one
//! table per class and resolves multiple acceptances by entropy. The
//! [`eval`] module runs the register-size, fill, retrieval and occlusion
//! sweeps over feature files handled by [`dataset`].

pub mod amr;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod function;
pub mod quantizer;
pub mod sampling;
pub mod system;

pub use amr::{Amr, ColumnRun};
pub use error::{Error, Result};
pub use function::DiscreteFunction;
pub use quantizer::Quantizer;
pub use sampling::sample_triangular;
pub use system::{MemorySystem, Outcome, SystemDecision};
