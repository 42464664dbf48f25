//! Boltzmann states for the atom and the frequency-changer mode.
//!
//! Populations follow `p_j ∝ exp(−ħω_j / k_B T)`. A zero temperature selects
//! the ground state exactly.

use serde::{Deserialize, Serialize};

use super::density::DensityMatrix;
use super::layout::HilbertLayout;
use crate::error::{usage, Error, Result};
use crate::{HBAR, K_B};

/// Default allowed thermal mass beyond the Fock cutoff.
pub const DEFAULT_TRUNC_EPS: f64 = 1e-10;
/// Extra Fock levels kept above the tail-mass estimate.
pub const CUTOFF_MARGIN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TemperatureMode {
    /// Absolute temperature in kelvin.
    Kelvin,
    /// Dimensionless `T̄ = k_B T / (ħ ω_ref)`, with `ω_ref` in rad/s.
    Reduced { omega_ref: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub mode: TemperatureMode,
    pub value: f64,
}

impl ThermalSpec {
    pub fn kelvin(t: f64) -> Result<Self> {
        Self::checked(TemperatureMode::Kelvin, t)
    }

    /// `T̄ = k_B T / (ħ ω_m)`.
    pub fn reduced(tbar: f64, omega_m: f64) -> Result<Self> {
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return usage("reference frequency for T̄ must be positive");
        }
        Self::checked(TemperatureMode::Reduced { omega_ref: omega_m }, tbar)
    }

    pub fn zero() -> Self {
        Self { mode: TemperatureMode::Kelvin, value: 0.0 }
    }

    fn checked(mode: TemperatureMode, value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return usage(format!("temperature must be finite and >= 0, got {value}"));
        }
        Ok(Self { mode, value })
    }

    /// `k_B T / ħ` in rad/s.
    pub fn kt(&self) -> f64 {
        match self.mode {
            TemperatureMode::Kelvin => K_B * self.value / HBAR,
            TemperatureMode::Reduced { omega_ref } => self.value * omega_ref,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0.0
    }
}

/// Normalised Boltzmann weights for the given level energies (rad/s).
pub fn boltzmann(levels: &[f64], spec: &ThermalSpec) -> Vec<f64> {
    let e_min = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let kt = spec.kt();
    let weights: Vec<f64> = if kt == 0.0 {
        levels.iter().map(|&e| if e == e_min { 1.0 } else { 0.0 }).collect()
    } else {
        levels.iter().map(|&e| (-(e - e_min) / kt).exp()).collect()
    };
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Diagonal thermal state of a 2- or 3-level atom with energies `levels`.
pub fn thermal_state_atom(levels: &[f64], spec: &ThermalSpec) -> Result<DensityMatrix> {
    if levels.iter().any(|e| !e.is_finite()) {
        return usage("level energies must be finite");
    }
    let layout = HilbertLayout::atom(levels.len())?;
    DensityMatrix::diagonal(layout, &boltzmann(levels, spec))
}

/// `exp(−ħω / k_B T)`, zero at zero temperature.
pub fn boltzmann_ratio(omega: f64, spec: &ThermalSpec) -> f64 {
    let kt = spec.kt();
    if kt == 0.0 {
        0.0
    } else {
        (-omega / kt).exp()
    }
}

/// Untruncated thermal Fock weight `p_n = e^{−nx}(1 − e^{−x})`, `x = ħω_q/k_BT`.
pub fn fock_weight(n: usize, omega_q: f64, spec: &ThermalSpec) -> f64 {
    let q = boltzmann_ratio(omega_q, spec);
    if q == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    q.powi(n as i32) * (1.0 - q)
}

/// Thermal mass on Fock states above `n_max`: `e^{−x(n_max+1)}`.
pub fn fock_tail(omega_q: f64, spec: &ThermalSpec, n_max: usize) -> f64 {
    boltzmann_ratio(omega_q, spec).powi(n_max as i32 + 1)
}

/// Smallest cutoff (with margin) whose tail mass is below `eps`.
pub fn required_cutoff(omega_q: f64, spec: &ThermalSpec, eps: f64) -> usize {
    let q = boltzmann_ratio(omega_q, spec);
    if q == 0.0 {
        return 1;
    }
    let levels = (eps.ln() / q.ln()).ceil().max(0.0) as usize;
    (levels + CUTOFF_MARGIN).max(1)
}

/// Bose–Einstein occupation `1/(e^{ħω/k_BT} − 1)`.
pub fn bose_einstein(omega: f64, spec: &ThermalSpec) -> f64 {
    let kt = spec.kt();
    if kt == 0.0 {
        0.0
    } else {
        1.0 / (omega / kt).exp_m1()
    }
}

/// Thermal Fock state on `0..=n_max`, renormalised to unit trace.
///
/// Fails with [`Error::CutoffTooSmall`] when the discarded tail mass reaches
/// `eps`; pass `eps = 1.0` to accept any cutoff.
pub fn thermal_state_fock(omega_q: f64, spec: &ThermalSpec, n_max: usize, eps: f64) -> Result<DensityMatrix> {
    if !(omega_q.is_finite() && omega_q > 0.0) {
        return usage("mode frequency must be positive");
    }
    let tail = fock_tail(omega_q, spec, n_max);
    if tail >= eps {
        return Err(Error::CutoffTooSmall {
            n_max,
            required: required_cutoff(omega_q, spec, eps),
            tail,
            eps,
        });
    }
    let mut p: Vec<f64> = (0..=n_max).map(|n| fock_weight(n, omega_q, spec)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    DensityMatrix::diagonal(HilbertLayout::fock(n_max)?, &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_is_ground_state() {
        let rho = thermal_state_atom(&[0.0, 1.0], &ThermalSpec::zero()).unwrap();
        assert_eq!(rho.populations(), vec![1.0, 0.0]);
        let fock = thermal_state_fock(1.0, &ThermalSpec::zero(), 3, DEFAULT_TRUNC_EPS).unwrap();
        assert_eq!(fock.populations(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_levels_are_uniform() {
        let spec = ThermalSpec::reduced(0.3, 2.0).unwrap();
        let rho = thermal_state_atom(&[5.0, 5.0, 5.0], &spec).unwrap();
        for p in rho.populations() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cutoff_error_reports_requirement() {
        let omega_q = 1.0;
        let spec = ThermalSpec::reduced(1.0 / 2f64.ln(), 1.0).unwrap();
        match thermal_state_fock(omega_q, &spec, 5, 1e-10) {
            Err(Error::CutoffTooSmall { required, .. }) => {
                assert!(fock_tail(omega_q, &spec, required) < 1e-10);
                assert!(thermal_state_fock(omega_q, &spec, required, 1e-10).is_ok());
            }
            other => panic!("expected cutoff error, got {other:?}"),
        }
    }

    #[test]
    fn negative_temperature_rejected() {
        assert!(ThermalSpec::kelvin(-1.0).is_err());
        assert!(ThermalSpec::reduced(0.1, 0.0).is_err());
    }
}
