//! Lattice discretization: cells, jump weights, drift schemes, the chain
//! exponent `Ψ^h` and the truncated generator.

mod cells;
mod exponent;
mod generator;
mod scheme;
mod weights;

pub use cells::{cell_index, cell_interval, cell_measure};
pub use exponent::{diffusion_error, psi_error_decomposition, psi_h, Discretization, ErrorDecomposition};
pub use generator::{build_generator, TruncatedGenerator};
pub use scheme::{h_star, stencil_valid, LatticeSpec, SchemeKind};
pub use weights::{build_weights, CellWeights, FarField};
