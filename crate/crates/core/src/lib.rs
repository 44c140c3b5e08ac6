//! Training and evaluation engine for probing subject-verb agreement in
//! stacks of sentence embeddings, over 1D and 2D-reshaped inputs.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod objectives;
pub mod tensor;

pub use error::{Error, Result};
