//! Planar qubit graphs, lattice builders and tensor network states.

mod graph;
pub mod planar;
mod state;

pub use graph::{LatticeKind, Loop, NetworkGraph};
pub use state::{edge_label, phys_label, Bitstring, TensorNetworkState};
