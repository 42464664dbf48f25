//! Time evolution: closed (spectral) and open (Lindblad) dynamics.

pub mod channels;
pub mod lindblad;
pub mod liouvillian;
pub mod unitary;

pub use channels::{build_channels, ChannelLabel, LindbladChannel, ReservoirSpec};
pub use lindblad::{
    evolve_lindblad, BareEnergies, EnergyLedger, LindbladOptions, LindbladResult, LindbladSolver, Method,
    TrajectoryDump,
};
pub use liouvillian::Liouvillian;
pub use unitary::{propagate_unitary, EvolvingState, UnitaryPropagator};
