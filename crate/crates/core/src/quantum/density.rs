use num_complex::Complex64;

use super::eig::herm_eig;
use super::layout::{HilbertLayout, Subsystem};
use super::matrix::{hermiticity_error, is_finite, kron, trace, ComplexMatrix, ZERO};
use crate::error::{usage, Result};

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalue floor for the positivity check.
pub const PSD_FLOOR: f64 = -1e-9;

/// Unit-trace, Hermitian, positive semidefinite operator over a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    data: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity at construction tolerances.
    pub fn new(layout: HilbertLayout, data: ComplexMatrix) -> Result<Self> {
        Self::with_trace_tol(layout, data, TRACE_TOL)
    }

    /// As [`DensityMatrix::new`] with a caller-chosen trace tolerance, used for
    /// integrator outputs whose drift budget is configured separately.
    pub fn with_trace_tol(layout: HilbertLayout, data: ComplexMatrix, trace_tol: f64) -> Result<Self> {
        let dim = layout.dim();
        if data.nrows() != dim || data.ncols() != dim {
            return usage(format!(
                "density matrix is {}x{} but layout dimension is {dim}",
                data.nrows(),
                data.ncols()
            ));
        }
        if !is_finite(&data) {
            return usage("density matrix has non-finite entries");
        }
        let tr = trace(&data);
        if (tr - Complex64::new(1.0, 0.0)).norm() > trace_tol {
            return usage(format!("trace {:.12} differs from 1", tr.re));
        }
        let herm = hermiticity_error(&data);
        if herm > HERMITIAN_TOL {
            return usage(format!("density matrix not Hermitian (max |ρ - ρ†| = {herm:.3e})"));
        }
        let (vals, _) = herm_eig(&data)?;
        if let Some(&lowest) = vals.first() {
            if lowest < PSD_FLOOR {
                return usage(format!("density matrix has eigenvalue {lowest:.3e} < 0"));
            }
        }
        Ok(Self { layout, data })
    }

    /// Diagonal state with the given populations (must sum to one).
    pub fn diagonal(layout: HilbertLayout, populations: &[f64]) -> Result<Self> {
        if populations.len() != layout.dim() {
            return usage(format!(
                "{} populations for a {}-dimensional layout",
                populations.len(),
                layout.dim()
            ));
        }
        if populations.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return usage("populations must be finite and non-negative");
        }
        Self::new(layout, super::matrix::diag(populations))
    }

    /// Projector onto the basis state `index`.
    pub fn basis(layout: HilbertLayout, index: usize) -> Result<Self> {
        let dim = layout.dim();
        if index >= dim {
            return usage(format!("basis index {index} out of range for dimension {dim}"));
        }
        let mut p = vec![0.0; dim];
        p[index] = 1.0;
        Self::diagonal(layout, &p)
    }

    /// `|ψ⟩⟨ψ|` for a normalised state vector.
    pub fn pure(layout: HilbertLayout, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return usage("state vector length does not match layout");
        }
        let psi = ComplexMatrix::from_column_slice(amplitudes.len(), 1, amplitudes);
        Self::new(layout, &psi * psi.adjoint())
    }

    /// `a ⊗ b` for an atom state `a` and Fock state `b`.
    pub fn product(atom: &DensityMatrix, fock: &DensityMatrix) -> Result<Self> {
        let (Some(atom_dim), Some(n_max)) = (atom.layout.atom_dim(), fock.layout.n_max()) else {
            return usage("product needs an atom state and a Fock state");
        };
        if atom.layout.is_joint() || fock.layout.is_joint() {
            return usage("product factors must be single-subsystem states");
        }
        let layout = HilbertLayout::joint(atom_dim, n_max)?;
        Ok(Self { layout, data: kron(&atom.data, &fock.data) })
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.data).re
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.data * &self.data)).re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.data[(index, index)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        self.data.diagonal().iter().map(|z| z.re).collect()
    }

    /// `Tr(ρ X)`.
    pub fn expect(&self, op: &ComplexMatrix) -> Result<Complex64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return usage("observable dimension does not match state");
        }
        Ok(trace(&(&self.data * op)))
    }

    /// `½ Σ |λ_k(ρ − σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.layout != other.layout {
            return usage("trace distance between states on different layouts");
        }
        let (vals, _) = herm_eig(&(&self.data - &other.data))?;
        Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Reduced state of the `keep` factor.
    pub fn partial_trace(&self, keep: Subsystem) -> Result<DensityMatrix> {
        partial_trace(self, keep)
    }
}

/// Traces out every factor except `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    let reduced = rho.layout.reduced(keep)?;
    if !rho.layout.is_joint() {
        return Ok(rho.clone());
    }
    let atom_dim = rho.layout.factors()[0].dim;
    let fock_dim = rho.layout.factors()[1].dim;
    let out = match keep {
        Subsystem::Atom => ComplexMatrix::from_fn(atom_dim, atom_dim, |a, b| {
            (0..fock_dim).fold(ZERO, |acc, n| acc + rho.data[(a * fock_dim + n, b * fock_dim + n)])
        }),
        Subsystem::Fock => ComplexMatrix::from_fn(fock_dim, fock_dim, |n, m| {
            (0..atom_dim).fold(ZERO, |acc, a| acc + rho.data[(a * fock_dim + n, a * fock_dim + m)])
        }),
    };
    let drift = (trace(&out) - trace(&rho.data)).norm();
    debug_assert!(drift < 1e-12, "partial trace changed the trace by {drift}");
    Ok(DensityMatrix { layout: reduced, data: out })
}
