//! Vacuum-enhanced charging of a two-level quantum battery.
//!
//! The battery `{|g⟩, |e⟩}` is charged through an off-resonant Raman
//! Λ-transition via an ancilla level `|m⟩`, by a classical drive (the power
//! supply) and a frequency-changer mode that is either classical or a
//! quantised harmonic oscillator. The crate compares the classical swap
//! benchmark with single-shot and sequential quantum protocols, in closed
//! form, by exact unitary propagation, and under a Lindblad master equation
//! with heat bookkeeping.
//!
//! Internally every Hamiltonian is in rad/s (ħ = 1); reported energies are
//! in joules.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod observables;
pub mod protocols;
pub mod quantum;

pub use error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
