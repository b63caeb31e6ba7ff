//! Quantum circuit simulation on planar tensor networks.
//!
//! States live on tensor networks whose graph matches a planar processor
//! topology. Two-qubit gates are applied with a truncated SVD conditioned on
//! belief-propagation message tensors, and information is extracted with
//! boundary matrix product state contraction, including sampling of
//! bitstrings with independently verified probabilities.

pub mod boundary;
pub mod bp;
pub mod circuit;
pub mod cli;
pub mod error;
pub mod network;
pub mod sampler;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
