//! Thermodynamic figures of merit: internal energy, ergotropy, gain and
//! efficiency, collected into a [`ChargingReport`].

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dynamics::{ChannelLabel, EnergyLedger};
use crate::error::{usage, Error, Result};
use crate::protocols::Engine;
use crate::quantum::density::DensityMatrix;
use crate::quantum::eig::herm_eig;
use crate::quantum::layout::{E, G};
use crate::quantum::matrix::{diag, ComplexMatrix};
use crate::HBAR;

/// Tolerance of the `k_q` consistency check.
pub const GAIN_CONSISTENCY_TOL: f64 = 1e-12;

/// Battery energy `ħω_eg ρ_ee` (ω_g = 0) of a 2- or 3-level battery state.
pub fn internal_energy(rho_b: &DensityMatrix, omega_eg: f64) -> Result<f64> {
    match rho_b.layout().atom_dim() {
        Some(2 | 3) if !rho_b.layout().is_joint() => Ok(HBAR * omega_eg * rho_b.population(E)),
        _ => usage(format!("internal_energy expects a battery-only state, got dimension {}", rho_b.dim())),
    }
}

/// Ergotropy of `rho` for the Hamiltonian `h` (rad/s), in joules.
pub fn ergotropy(rho: &DensityMatrix, h: &ComplexMatrix) -> Result<f64> {
    Ok(HBAR * ergotropy_of(rho.matrix(), h)?)
}

/// Ergotropy in the units of `h`.
///
/// `Σ_{k,j} r_k E_j |⟨r_k|E_j⟩|² − Σ_k r_k E_k` with `r_k` descending and
/// `E_j` ascending. Negative round-off is clamped to zero. `rho` need not be
/// normalised (the expression is linear in it).
pub fn ergotropy_of(rho: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    if rho.shape() != h.shape() || rho.nrows() != rho.ncols() {
        return usage(format!("ergotropy: state is {:?} but Hamiltonian is {:?}", rho.shape(), h.shape()));
    }
    let (mut r, rv) = herm_eig(rho)?;
    let (e, ev) = herm_eig(h)?;
    r.reverse();
    let n = r.len();
    let overlap = rv.adjoint() * &ev;
    let mut energy = 0.0;
    for k in 0..n {
        let rk = r[k];
        let col = n - 1 - k;
        for (j, ej) in e.iter().enumerate() {
            energy += rk * ej * overlap[(col, j)].norm_sqr();
        }
    }
    let passive: f64 = r.iter().zip(&e).map(|(rk, ek)| rk * ek).sum();
    Ok((energy - passive).max(0.0))
}

/// Ergotropy of the `{g, e}` block of a battery state against `diag(0, ω_eg)`,
/// in joules. A 3-level state keeps its `m` population out of the battery.
pub fn battery_ergotropy(rho_b: &DensityMatrix, omega_eg: f64) -> Result<f64> {
    let m = rho_b.matrix();
    let block = match rho_b.dim() {
        2 | 3 => ComplexMatrix::from_fn(2, 2, |i, j| m[([G, E][i], [G, E][j])]),
        d => return usage(format!("battery state must be 2- or 3-level, got dimension {d}")),
    };
    Ok(HBAR * ergotropy_of(&block, &diag(&[0.0, omega_eg]))?)
}

/// `K_q = Δ𝒰^q/Δ𝒰^c − 1`.
pub fn gain(delta_u_q: f64, delta_u_c: f64) -> Result<f64> {
    if !(delta_u_c > 0.0) {
        return Err(Error::UndefinedGain(delta_u_c));
    }
    Ok(delta_u_q / delta_u_c - 1.0)
}

/// `η = ℰ/W_L`, plus `ℰ/(W_L + Q_em)` when the `e → m` reservoir injected heat.
pub fn efficiency(ergotropy: f64, work_in: f64, q_em: f64) -> Result<(f64, Option<f64>)> {
    if !(work_in > 0.0) {
        return Err(Error::UndefinedEfficiency(work_in));
    }
    let corrected = (q_em > 0.0).then(|| ergotropy / (work_in + q_em));
    Ok((ergotropy / work_in, corrected))
}

/// Closed-form unitary efficiency `(1/(1+ξ))(1+2K_q)/(1+K_q)`.
pub fn eta_closed_form(xi: f64, k_q: f64) -> f64 {
    (1.0 + 2.0 * k_q) / ((1.0 + xi) * (1.0 + k_q))
}

/// Numerical health of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub trace_drift: f64,
    /// Thermal Fock mass beyond the cutoff.
    pub truncation_tail: f64,
    pub n_max: usize,
    /// `ΔU − W − ΣQ` in joules (master-equation runs).
    pub closure_residual: Option<f64>,
    pub integration_steps: usize,
    pub notes: Vec<String>,
}

/// Outcome of one charging protocol. Energies in joules.
#[derive(Debug, Clone, Serialize)]
pub struct ChargingReport {
    pub engine: Engine,
    pub delta_u_battery: f64,
    pub delta_u_fc: f64,
    pub ergotropy: f64,
    /// Laser work `W_L`.
    pub work_in: f64,
    pub heat: BTreeMap<ChannelLabel, f64>,
    /// Classical reference `Δ𝒰^c` used for the gain.
    pub delta_u_classical: f64,
    /// NaN when the reference vanishes.
    pub k_q: f64,
    /// NaN when no work was done.
    pub eta: f64,
    pub eta_corrected: Option<f64>,
    pub tau_used: f64,
    /// Battery marginal after charging, `(g, e, m)` order.
    #[serde(skip)]
    pub battery: DensityMatrix,
    /// Energy added by each sequential flip.
    pub step_delta_u: Vec<f64>,
    #[serde(skip)]
    pub ledger: Option<EnergyLedger>,
    pub diagnostics: Diagnostics,
}

/// Inputs from which a report's derived fields are computed.
pub(crate) struct ReportParts {
    pub engine: Engine,
    pub omega_eg: f64,
    pub battery: DensityMatrix,
    pub initial_excited: f64,
    pub delta_u_fc: f64,
    pub work_in: f64,
    pub delta_u_classical: f64,
    pub tau_used: f64,
    pub ledger: Option<EnergyLedger>,
    pub diagnostics: Diagnostics,
}

impl ChargingReport {
    pub(crate) fn assemble(parts: ReportParts) -> Result<Self> {
        let ReportParts { engine, omega_eg, battery, initial_excited, delta_u_fc, work_in, .. } = parts;
        let mut diagnostics = parts.diagnostics;
        let delta_u_battery = HBAR * omega_eg * (battery.population(E) - initial_excited);
        let ergotropy = battery_ergotropy(&battery, omega_eg)?;
        let k_q = gain(delta_u_battery, parts.delta_u_classical).unwrap_or_else(|e| {
            diagnostics.notes.push(e.to_string());
            f64::NAN
        });
        let heat = parts.ledger.as_ref().map(|l| l.heat_by_channel.clone()).unwrap_or_default();
        let q_em = heat.get(&ChannelLabel::Em).copied().unwrap_or(0.0);
        let (eta, eta_corrected) = match efficiency(ergotropy, work_in, q_em) {
            Ok(v) => v,
            Err(e) => {
                diagnostics.notes.push(e.to_string());
                (f64::NAN, None)
            }
        };
        Ok(Self {
            engine,
            delta_u_battery,
            delta_u_fc,
            ergotropy,
            work_in,
            heat,
            delta_u_classical: parts.delta_u_classical,
            k_q,
            eta,
            eta_corrected,
            tau_used: parts.tau_used,
            battery,
            step_delta_u: Vec::new(),
            ledger: parts.ledger,
            diagnostics,
        })
    }

    pub fn q_em(&self) -> f64 {
        self.heat.get(&ChannelLabel::Em).copied().unwrap_or(0.0)
    }

    /// Efficiency that accounts for injected `e → m` heat when present.
    pub fn effective_eta(&self) -> f64 {
        self.eta_corrected.unwrap_or(self.eta)
    }

    /// Violated report invariants, empty when the report is sound.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let scalars = [
            ("delta_u_battery", self.delta_u_battery),
            ("delta_u_fc", self.delta_u_fc),
            ("ergotropy", self.ergotropy),
            ("work_in", self.work_in),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                problems.push(format!("{name} is not finite"));
            }
        }
        if self.delta_u_classical > 0.0 {
            let expected = self.delta_u_battery / self.delta_u_classical - 1.0;
            if !((self.k_q - expected).abs() <= GAIN_CONSISTENCY_TOL * expected.abs().max(1.0)) {
                problems.push(format!("k_q {} inconsistent with energies ({expected})", self.k_q));
            }
        }
        if self.work_in > 0.0 {
            let eta = self.effective_eta();
            if !(-1e-12..=1.0 + 1e-12).contains(&eta) {
                problems.push(format!("efficiency {eta} outside [0, 1]"));
            }
        }
        if self.ergotropy < 0.0 {
            problems.push(format!("negative ergotropy {}", self.ergotropy));
        }
        problems
    }
}
