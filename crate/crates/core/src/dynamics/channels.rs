//! Thermal reservoirs and their jump operators.
//!
//! Six local channels: the two Λ transitions in both directions and the
//! frequency-changer mode. Rates are `Γ_jm = γ₀(n̄_j+1)`, `Γ_mj = γ₀ n̄_j`,
//! `Γ₋ = γ₀(n̄_q+1)`, `Γ₊ = γ₀ n̄_q`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::model::ModelParams;
use crate::quantum::layout::{HilbertLayout, E, G, M};
use crate::quantum::matrix::{annihilation, identity, kron, transition, ComplexMatrix};
use crate::quantum::thermal::{bose_einstein, ThermalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelLabel {
    /// `m → g`, jump `σ_gm`.
    Gm,
    /// `g → m`, jump `σ_mg`.
    Mg,
    /// `m → e`, jump `σ_em`.
    Em,
    /// `e → m`, jump `σ_me`.
    Me,
    /// Photon loss, jump `b`.
    Minus,
    /// Photon gain, jump `b†`.
    Plus,
}

impl ChannelLabel {
    pub const ALL: [ChannelLabel; 6] = [
        ChannelLabel::Gm,
        ChannelLabel::Mg,
        ChannelLabel::Em,
        ChannelLabel::Me,
        ChannelLabel::Minus,
        ChannelLabel::Plus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelLabel::Gm => "gm",
            ChannelLabel::Mg => "mg",
            ChannelLabel::Em => "em",
            ChannelLabel::Me => "me",
            ChannelLabel::Minus => "minus",
            ChannelLabel::Plus => "plus",
        }
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladChannel {
    pub label: ChannelLabel,
    pub jump: ComplexMatrix,
    /// Γ_s in 1/s.
    pub rate: f64,
}

impl LindbladChannel {
    pub fn new(label: ChannelLabel, jump: ComplexMatrix, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return usage(format!("rate of channel {label} must be finite and >= 0"));
        }
        if !jump.is_square() {
            return usage(format!("jump operator of channel {label} must be square"));
        }
        Ok(Self { label, jump, rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    /// Shared spontaneous rate γ₀, 1/s.
    pub gamma0: f64,
    /// Mean occupation at `ω_mg`.
    pub nbar_g: f64,
    /// Mean occupation at `ω_me`.
    pub nbar_e: f64,
    /// Mean occupation at `ω_q`.
    pub nbar_q: f64,
}

impl ReservoirSpec {
    /// Reservoirs in equilibrium at the given temperature.
    pub fn thermal(gamma0: f64, p: &ModelParams, spec: &ThermalSpec) -> Result<Self> {
        let res = Self {
            gamma0,
            nbar_g: bose_einstein(p.omega_m, spec),
            nbar_e: bose_einstein(p.omega_me(), spec),
            nbar_q: bose_einstein(p.omega_q(), spec),
        };
        res.validate(p, spec)?;
        Ok(res)
    }

    pub fn closed() -> Self {
        Self { gamma0: 0.0, nbar_g: 0.0, nbar_e: 0.0, nbar_q: 0.0 }
    }

    /// Checks signs and that every `n̄` is the Bose–Einstein value at `spec`.
    pub fn validate(&self, p: &ModelParams, spec: &ThermalSpec) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma0 >= 0.0) {
            return usage("gamma0 must be finite and >= 0");
        }
        let checks = [
            ("nbar_g", self.nbar_g, bose_einstein(p.omega_m, spec)),
            ("nbar_e", self.nbar_e, bose_einstein(p.omega_me(), spec)),
            ("nbar_q", self.nbar_q, bose_einstein(p.omega_q(), spec)),
        ];
        for (name, got, want) in checks {
            if !(got.is_finite() && got >= 0.0) {
                return usage(format!("{name} must be finite and >= 0"));
            }
            if (got - want).abs() > 1e-9 * want.max(1e-300) {
                return usage(format!("{name} = {got:e} disagrees with Bose-Einstein value {want:e}"));
            }
        }
        Ok(())
    }

    pub fn rate(&self, label: ChannelLabel) -> f64 {
        let g = self.gamma0;
        match label {
            ChannelLabel::Gm => g * (self.nbar_g + 1.0),
            ChannelLabel::Mg => g * self.nbar_g,
            ChannelLabel::Em => g * (self.nbar_e + 1.0),
            ChannelLabel::Me => g * self.nbar_e,
            ChannelLabel::Minus => g * (self.nbar_q + 1.0),
            ChannelLabel::Plus => g * self.nbar_q,
        }
    }
}

/// The six reservoir channels on a 3-level ⊗ Fock layout. Zero-rate channels
/// are kept so the heat ledger always lists every reservoir.
pub fn build_channels(_p: &ModelParams, res: &ReservoirSpec, layout: &HilbertLayout) -> Result<Vec<LindbladChannel>> {
    layout.require_atom_dim(3)?;
    let Some(n_max) = layout.n_max() else {
        return usage("channels need a joint atom ⊗ Fock layout");
    };
    let id_a = identity(3);
    let id_f = identity(n_max + 1);
    let b = annihilation(n_max);
    ChannelLabel::ALL
        .iter()
        .map(|&label| {
            let jump = match label {
                ChannelLabel::Gm => kron(&transition(3, G, M), &id_f),
                ChannelLabel::Mg => kron(&transition(3, M, G), &id_f),
                ChannelLabel::Em => kron(&transition(3, E, M), &id_f),
                ChannelLabel::Me => kron(&transition(3, M, E), &id_f),
                ChannelLabel::Minus => kron(&id_a, &b),
                ChannelLabel::Plus => kron(&id_a, &b.adjoint()),
            };
            LindbladChannel::new(label, jump, res.rate(label))
        })
        .collect()
}
