//! Dense operator algebra: layouts, density matrices, spectral
//! decompositions and thermal states.

pub mod density;
pub mod eig;
pub mod layout;
pub mod matrix;
pub mod thermal;

pub use density::{partial_trace, DensityMatrix};
pub use eig::herm_eig;
pub use layout::{HilbertLayout, Subsystem, E, G, M};
pub use matrix::{kron, ComplexMatrix};
pub use thermal::{thermal_state_atom, thermal_state_fock, ThermalSpec};
