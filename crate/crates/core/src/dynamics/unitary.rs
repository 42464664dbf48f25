use num_complex::Complex64;

use crate::error::{usage, Result};
use crate::quantum::density::DensityMatrix;
use crate::quantum::eig::herm_eig;
use crate::quantum::matrix::ComplexMatrix;

/// Spectral propagator `e^{−iHt}` of a time-independent Hamiltonian (rad/s).
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    values: Vec<f64>,
    vectors: ComplexMatrix,
}

impl UnitaryPropagator {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        let (values, vectors) = herm_eig(h)?;
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lam * t);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
        }
        scaled * self.vectors.adjoint()
    }

    /// Prepares `ρ₀` for evaluation at many times.
    pub fn prepare(&self, rho0: &DensityMatrix) -> Result<EvolvingState<'_>> {
        if rho0.dim() != self.dim() {
            return usage(format!(
                "state dimension {} does not match Hamiltonian dimension {}",
                rho0.dim(),
                self.dim()
            ));
        }
        let rotated = self.vectors.adjoint() * rho0.matrix() * &self.vectors;
        Ok(EvolvingState { propagator: self, rotated, rho0: rho0.clone() })
    }

    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        self.prepare(rho0)?.at(t)
    }
}

/// `ρ₀` expressed in the eigenbasis of `H`; evolution is then a phase per entry.
pub struct EvolvingState<'a> {
    propagator: &'a UnitaryPropagator,
    rotated: ComplexMatrix,
    rho0: DensityMatrix,
}

impl EvolvingState<'_> {
    pub fn matrix_at(&self, t: f64) -> ComplexMatrix {
        let vals = &self.propagator.values;
        let phased = ComplexMatrix::from_fn(self.rotated.nrows(), self.rotated.ncols(), |i, j| {
            self.rotated[(i, j)] * Complex64::from_polar(1.0, -(vals[i] - vals[j]) * t)
        });
        let v = &self.propagator.vectors;
        let out = v * phased * v.adjoint();
        (&out + out.adjoint()) * Complex64::new(0.5, 0.0)
    }

    pub fn at(&self, t: f64) -> Result<DensityMatrix> {
        if t == 0.0 {
            return Ok(self.rho0.clone());
        }
        DensityMatrix::new(self.rho0.layout().clone(), self.matrix_at(t))
    }
}

/// `ρ(t) = e^{−iHt} ρ₀ e^{iHt}` via the spectral decomposition of `H`.
pub fn propagate_unitary(h: &ComplexMatrix, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if h.nrows() != rho0.dim() || h.ncols() != rho0.dim() {
        return usage(format!(
            "Hamiltonian is {}x{} but state dimension is {}",
            h.nrows(),
            h.ncols(),
            rho0.dim()
        ));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    UnitaryPropagator::new(h)?.evolve(rho0, t)
}
