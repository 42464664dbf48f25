//! Hamiltonians of the Raman-driven battery.
//!
//! All matrices are in angular-frequency units (ħ = 1). Levels are ordered
//! `(g, e, m)` with `ω_g = 0`.
//!
//! # Rotating frame
//!
//! The lab-frame quantum Hamiltonian
//!
//! ```text
//! H_q = ω_e σ_ee + ω_m σ_mm + ω_q b†b
//!     + Ω_L (σ_gm e^{iω_L t} + h.c.) + g_q (σ_em b† + σ_me b)
//! ```
//!
//! becomes time independent in the frame generated by
//! `R = ω_L σ_mm + ω_eg σ_ee + ω_q b†b`. Under two-photon resonance
//! (`ω_L = ω_eg + ω_q`) this leaves
//!
//! ```text
//! H̃ = Δ σ_mm + Ω_L (σ_gm + σ_mg) + g_q (σ_me b + σ_em b†) + δ_c σ_ee
//! ```
//!
//! with `Δ = ω_m − ω_L`. `R` is diagonal in the bare basis, so bare
//! populations (and every energy built from them) are frame invariant.
//! `δ_c` is the applied d.c. Stark shift that puts the target doublet
//! `{|g,N−1⟩, |e,N⟩}` on resonance; see [`stark_shift`].

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::quantum::eig::herm_eig;
use crate::quantum::layout::{HilbertLayout, E, G, M};
use crate::quantum::matrix::{annihilation, identity, kron, number, transition, ComplexMatrix};
use num_complex::Complex64;

/// Default ratio `Δ / max(Ω_L, g_q)` below which the dispersive picture is doubtful.
pub const DEFAULT_DISPERSIVE_FACTOR: f64 = 10.0;

/// Physical parameters, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Battery gap `ω_e − ω_g`.
    pub omega_eg: f64,
    /// Ancilla level energy `ω_m` (also the `T̄` reference).
    pub omega_m: f64,
    /// Single-photon detuning `Δ = ω_m − ω_L`.
    pub detuning: f64,
    /// Drive coupling `Ω_L`.
    pub drive_coupling: f64,
    /// Quantised frequency-changer coupling `g_q`.
    pub fc_coupling: f64,
    /// Classical frequency-changer coupling `Ω_q`; defaults to `g_q`.
    pub classical_fc_coupling: Option<f64>,
    pub dispersive_factor: f64,
}

impl ModelParams {
    pub fn new(
        omega_eg: f64,
        omega_m: f64,
        detuning: f64,
        drive_coupling: f64,
        fc_coupling: f64,
    ) -> Result<Self> {
        let p = Self {
            omega_eg,
            omega_m,
            detuning,
            drive_coupling,
            fc_coupling,
            classical_fc_coupling: None,
            dispersive_factor: DEFAULT_DISPERSIVE_FACTOR,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters fixed by the frequency ratio `ξ = ω_q / ω_eg`, with the
    /// battery gap derived from two-photon resonance.
    pub fn from_xi(omega_m: f64, detuning: f64, xi: f64, drive_coupling: f64, fc_coupling: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return usage(format!("xi must be positive, got {xi}"));
        }
        let omega_eg = (omega_m - detuning) / (1.0 + xi);
        Self::new(omega_eg, omega_m, detuning, drive_coupling, fc_coupling)
    }

    /// The working point of the gain/efficiency figures:
    /// `Δ/2π = 1 MHz`, `g_q = Δ/600`, `Ω_L = Δ/20`, `ω_m/2π = 10^12 Hz`.
    pub fn figure(xi: f64) -> Result<Self> {
        let two_pi = std::f64::consts::TAU;
        let detuning = two_pi * 1e6;
        Self::from_xi(two_pi * 1e12, detuning, xi, detuning / 20.0, detuning / 600.0)
    }

    pub fn with_classical_fc_coupling(mut self, omega_q_coupling: f64) -> Result<Self> {
        self.classical_fc_coupling = Some(omega_q_coupling);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_eg", self.omega_eg),
            ("omega_m", self.omega_m),
            ("detuning", self.detuning),
            ("drive_coupling", self.drive_coupling),
            ("fc_coupling", self.fc_coupling),
            ("dispersive_factor", self.dispersive_factor),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return usage(format!("{name} must be finite"));
            }
        }
        if self.omega_eg <= 0.0 {
            return usage("omega_eg must be positive");
        }
        if self.detuning <= 0.0 {
            return usage("detuning must be positive");
        }
        if self.drive_coupling < 0.0 {
            return usage("drive_coupling must be non-negative");
        }
        if self.fc_coupling < 0.0 {
            return usage("fc_coupling must be non-negative");
        }
        if let Some(c) = self.classical_fc_coupling {
            if !(c.is_finite() && c >= 0.0) {
                return usage("classical_fc_coupling must be finite and non-negative");
            }
        }
        if self.omega_q() <= 0.0 {
            return usage(format!(
                "two-photon resonance needs omega_m - detuning > omega_eg (omega_q = {:.3e})",
                self.omega_q()
            ));
        }
        Ok(())
    }

    /// Drive frequency `ω_L = ω_m − Δ`.
    pub fn laser_frequency(&self) -> f64 {
        self.omega_m - self.detuning
    }

    /// Frequency-changer frequency `ω_q = ω_L − ω_eg`.
    pub fn omega_q(&self) -> f64 {
        self.laser_frequency() - self.omega_eg
    }

    /// `ω_me = ω_m − ω_eg`.
    pub fn omega_me(&self) -> f64 {
        self.omega_m - self.omega_eg
    }

    pub fn xi(&self) -> f64 {
        self.omega_q() / self.omega_eg
    }

    /// Selectivity `r = g_q / Ω_L`.
    pub fn r(&self) -> f64 {
        self.fc_coupling / self.drive_coupling
    }

    pub fn classical_fc(&self) -> f64 {
        self.classical_fc_coupling.unwrap_or(self.fc_coupling)
    }

    /// `Ω̄ = Ω_L Ω_q / Δ`.
    pub fn effective_classical_coupling(&self) -> f64 {
        self.drive_coupling * self.classical_fc() / self.detuning
    }

    /// `g_q Ω_L / Δ`, the vacuum Raman coupling scale.
    pub fn effective_coupling(&self) -> f64 {
        self.drive_coupling * self.fc_coupling / self.detuning
    }

    pub fn is_dispersive(&self) -> bool {
        self.detuning >= self.dispersive_factor * self.drive_coupling.max(self.fc_coupling)
    }

    /// Bare level energies `(0, ω_eg, ω_m)`.
    pub fn atom_levels(&self) -> [f64; 3] {
        [0.0, self.omega_eg, self.omega_m]
    }

    fn warn_if_not_dispersive(&self) {
        if !self.is_dispersive() {
            log::warn!(
                "detuning {:.3e} is below {}x max(Ω_L, g_q) = {:.3e}; adiabatic elimination is questionable",
                self.detuning,
                self.dispersive_factor,
                self.drive_coupling.max(self.fc_coupling)
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Selected subspace `N`: the doublet `{|g,N−1⟩, |e,N⟩}` is resonant.
    pub target_n: usize,
    pub stark_compensation: bool,
}

impl ProtocolParams {
    pub fn new(target_n: usize, stark_compensation: bool) -> Result<Self> {
        if target_n == 0 {
            return usage("target_n must be at least 1");
        }
        Ok(Self { target_n, stark_compensation })
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { target_n: 1, stark_compensation: true }
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Effective two-level classical drive `Ω̄ (σ_ge + σ_eg)` on `{g, e}`.
pub fn build_h_classical_effective(p: &ModelParams) -> Result<ComplexMatrix> {
    if p.classical_fc() <= 0.0 {
        return usage("classical f.c. coupling Ω_q must be positive");
    }
    let omega_bar = p.effective_classical_coupling();
    Ok((transition(2, G, E) + transition(2, E, G)) * c(omega_bar))
}

/// Three-level classical Raman drive in the rotating frame:
/// `Δσ_mm + Ω_L(σ_gm + σ_mg) + Ω_q(σ_em + σ_me) + δ σ_ee`, with `δ` putting
/// `g ↔ e` on two-photon resonance including the a.c. Stark shifts.
pub fn build_h_classical_full(p: &ModelParams) -> Result<ComplexMatrix> {
    if p.classical_fc() <= 0.0 {
        return usage("classical f.c. coupling Ω_q must be positive");
    }
    p.warn_if_not_dispersive();
    let shift = resonant_shift(p.detuning, p.drive_coupling, p.classical_fc());
    Ok(lambda_block(p.detuning, p.drive_coupling, p.classical_fc(), shift))
}

/// Splitting of the resonant lower doublet of [`build_h_classical_full`]
/// (`≈ 2Ω̄`).
pub fn classical_full_gap(p: &ModelParams) -> f64 {
    let shift = resonant_shift(p.detuning, p.drive_coupling, p.classical_fc());
    lower_gap(p.detuning, p.drive_coupling, p.classical_fc(), shift)
}

/// `3×3` Λ-system block over `(g, e, m)`.
fn lambda_block(detuning: f64, coupling_g: f64, coupling_e: f64, shift_e: f64) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(3, 3);
    h[(M, M)] = c(detuning);
    h[(E, E)] = c(shift_e);
    h[(G, M)] = c(coupling_g);
    h[(M, G)] = c(coupling_g);
    h[(E, M)] = c(coupling_e);
    h[(M, E)] = c(coupling_e);
    h
}

/// Splitting of the two lower dressed states of a Λ block.
fn lower_gap(detuning: f64, coupling_g: f64, coupling_e: f64, shift_e: f64) -> f64 {
    let (vals, _) = herm_eig(&lambda_block(detuning, coupling_g, coupling_e, shift_e))
        .expect("Λ block is Hermitian by construction");
    vals[1] - vals[0]
}

/// Energy shift on `e` that makes `g ↔ e` resonant through `m`.
///
/// Second order gives `(c_e² − c_g²)/Δ`; the exact value minimises the
/// splitting of the two lower dressed states, found by golden-section search
/// around the perturbative estimate.
pub fn resonant_shift(detuning: f64, coupling_g: f64, coupling_e: f64) -> f64 {
    let estimate = (coupling_e * coupling_e - coupling_g * coupling_g) / detuning;
    if coupling_g == 0.0 || coupling_e == 0.0 {
        return estimate;
    }
    let raman = coupling_g * coupling_e / detuning;
    let width = 20.0 * raman + 1e-3 * estimate.abs();
    golden_min(
        |s| lower_gap(detuning, coupling_g, coupling_e, s),
        estimate - width,
        estimate + width,
        1e-14 * (raman + estimate.abs()),
    )
}

/// d.c. Stark shift `δ_c` for the target subspace `N` of `H̃`
/// (zero when compensation is off).
///
/// The sign comes out opposite to `Δ^N_eg = (Ω_L² − g_q²N)/Δ`: the
/// compensation cancels the differential a.c. Stark shift.
pub fn stark_shift(p: &ModelParams, proto: &ProtocolParams) -> f64 {
    if !proto.stark_compensation {
        return 0.0;
    }
    let coupling_e = p.fc_coupling * (proto.target_n as f64).sqrt();
    resonant_shift(p.detuning, p.drive_coupling, coupling_e)
}

/// Splitting of the resonant target doublet in `H̃` (`≈ 2 G_{N−1}`).
pub fn full_target_gap(p: &ModelParams, proto: &ProtocolParams) -> f64 {
    let coupling_e = p.fc_coupling * (proto.target_n as f64).sqrt();
    lower_gap(p.detuning, p.drive_coupling, coupling_e, stark_shift(p, proto))
}

/// Time-independent rotating-frame Hamiltonian `H̃` on a 3-level ⊗ Fock layout.
pub fn build_h_full_rotating(p: &ModelParams, proto: &ProtocolParams, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    layout.require_atom_dim(3)?;
    if !layout.is_joint() {
        return usage("H̃ needs a joint atom ⊗ Fock layout");
    }
    p.warn_if_not_dispersive();
    let n_max = layout.n_max().unwrap_or(0);
    let id_f = identity(n_max + 1);
    let b = annihilation(n_max);
    let bd = b.adjoint();
    let delta_c = stark_shift(p, proto);

    let mut h = kron(&transition(3, M, M), &id_f) * c(p.detuning);
    h += kron(&(transition(3, G, M) + transition(3, M, G)), &id_f) * c(p.drive_coupling);
    h += (kron(&transition(3, M, E), &b) + kron(&transition(3, E, M), &bd)) * c(p.fc_coupling);
    if delta_c != 0.0 {
        h += kron(&transition(3, E, E), &id_f) * c(delta_c);
    }
    Ok(h)
}

/// Effective anti-Jaynes–Cummings Hamiltonian on a 2-level ⊗ Fock layout:
///
/// `−(g²N/Δ)σ_gg − (g² b†b/Δ)σ_ee + (Ω_L g/Δ)(σ_ge b + σ_eg b†)`.
///
/// The Stark compensation is built in (the `σ_gg` term already carries it),
/// so `proto.stark_compensation` is ignored here.
pub fn build_h_eff(p: &ModelParams, proto: &ProtocolParams, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    layout.require_atom_dim(2)?;
    if !layout.is_joint() {
        return usage("H_eff needs a joint atom ⊗ Fock layout");
    }
    let n_max = layout.n_max().unwrap_or(0);
    let g2 = p.fc_coupling * p.fc_coupling / p.detuning;
    let n_target = proto.target_n as f64;
    let b = annihilation(n_max);
    let bd = b.adjoint();

    let mut h = kron(&transition(2, G, G), &identity(n_max + 1)) * c(-g2 * n_target);
    h += kron(&transition(2, E, E), &number(n_max)) * c(-g2);
    h += (kron(&transition(2, G, E), &b) + kron(&transition(2, E, G), &bd)) * c(p.effective_coupling());
    Ok(h)
}

/// Spectral data of the doublet `{|g,n⟩, |e,n+1⟩}` of `H_eff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doublet {
    /// `Δ_n = r²Ω_L²(n+1−N)/Δ`, rad/s.
    pub detuning: f64,
    /// `G_n = rΩ_L²√(n+1)/Δ`, rad/s.
    pub coupling: f64,
    /// `Ω_n = √(Δ_n²/4 + G_n²)`, rad/s.
    pub rabi: f64,
    /// Transfer amplitude `A_n = 1/(1 + r²(n+1−N)²/(4(n+1)))`.
    pub amplitude: f64,
}

pub fn doublet_spectrum(p: &ModelParams, proto: &ProtocolParams, n: usize) -> Doublet {
    let g2 = p.fc_coupling * p.fc_coupling / p.detuning;
    let offset = (n + 1) as f64 - proto.target_n as f64;
    let detuning = g2 * offset;
    let coupling = p.effective_coupling() * ((n + 1) as f64).sqrt();
    let rabi = (0.25 * detuning * detuning + coupling * coupling).sqrt();
    let amplitude = if offset == 0.0 {
        1.0
    } else {
        let r = p.r();
        1.0 / (1.0 + r * r * offset * offset / (4.0 * (n + 1) as f64))
    };
    Doublet { detuning, coupling, rabi, amplitude }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::matrix::{hermiticity_error, max_abs};

    fn fig2() -> ModelParams {
        ModelParams::figure(99.0).unwrap()
    }

    #[test]
    fn resonance_bookkeeping() {
        let p = fig2();
        assert!((p.laser_frequency() - (p.omega_eg + p.omega_q())).abs() < 1e-3);
        assert!((p.omega_m - p.laser_frequency() - p.detuning).abs() < 1e-3);
        assert!((p.omega_me() - p.omega_q() - p.detuning).abs() < 1e-3);
        assert!((p.xi() - 99.0).abs() < 1e-9);
        assert!((p.r() - 1.0 / 30.0).abs() < 1e-15);
        assert!(p.is_dispersive());
    }

    #[test]
    fn classical_effective_coupling() {
        let d = 1.0e3;
        let p = ModelParams::new(1.0, 1e6, d, d / 20.0, d / 600.0)
            .unwrap()
            .with_classical_fc_coupling(d / 20.0)
            .unwrap();
        let h = build_h_classical_effective(&p).unwrap();
        assert!((h[(0, 1)].re - d / 400.0).abs() < 1e-12);
        assert_eq!(h[(0, 1)], h[(1, 0)].conj());
    }

    #[test]
    fn bare_detuned_ancilla() {
        let mut p = fig2();
        p.drive_coupling = 0.0;
        p.fc_coupling = 0.0;
        let layout = HilbertLayout::joint(3, 3).unwrap();
        let h = build_h_full_rotating(&p, &ProtocolParams::default(), &layout).unwrap();
        let expected = kron(&transition(3, M, M), &identity(4)) * c(p.detuning);
        assert!(max_abs(&(h - expected)) == 0.0);
    }

    #[test]
    fn no_direct_g_e_coupling() {
        let p = fig2();
        let layout = HilbertLayout::joint(3, 5).unwrap();
        let h = build_h_full_rotating(&p, &ProtocolParams::default(), &layout).unwrap();
        assert_eq!(hermiticity_error(&h), 0.0);
        for n in 0..=5 {
            for k in 0..=5 {
                assert_eq!(h[(layout.index(G, n), layout.index(E, k))].norm(), 0.0);
            }
        }
    }

    #[test]
    fn wrong_atom_dim_is_usage_error() {
        let p = fig2();
        let proto = ProtocolParams::default();
        assert!(build_h_full_rotating(&p, &proto, &HilbertLayout::joint(2, 3).unwrap()).is_err());
        assert!(build_h_eff(&p, &proto, &HilbertLayout::joint(3, 3).unwrap()).is_err());
    }

    #[test]
    fn stark_shift_sign_opposes_ac_shift() {
        let p = fig2();
        let proto = ProtocolParams::default();
        let dc = stark_shift(&p, &proto);
        let second_order = (p.fc_coupling.powi(2) - p.drive_coupling.powi(2)) / p.detuning;
        assert!(dc < 0.0);
        assert!((dc - second_order).abs() < 1e-2 * second_order.abs());
        // The exact shift leaves the doublet at its minimal splitting ≈ 2 G_0.
        let gap = full_target_gap(&p, &proto);
        let g0 = doublet_spectrum(&p, &proto, 0).coupling;
        assert!((gap / (2.0 * g0) - 1.0).abs() < 1e-2);
        assert!(lower_gap(p.detuning, p.drive_coupling, p.fc_coupling, second_order) >= gap);
    }

    #[test]
    fn target_doublet_is_resonant() {
        for n_target in 1..4 {
            let proto = ProtocolParams::new(n_target, true).unwrap();
            let d = doublet_spectrum(&fig2(), &proto, n_target - 1);
            assert_eq!(d.detuning, 0.0);
            assert_eq!(d.amplitude, 1.0);
            assert_eq!(d.rabi, d.coupling);
        }
    }

    #[test]
    fn target_n_zero_rejected() {
        assert!(ProtocolParams::new(0, true).is_err());
    }
}
