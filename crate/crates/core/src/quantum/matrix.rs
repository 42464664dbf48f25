//! Dense complex operators and the handful of constructors every Hamiltonian
//! and jump operator in the crate is assembled from.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix, column-major storage (nalgebra).
pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(values.len(), values.len());
    for (k, &v) in values.iter().enumerate() {
        m[(k, k)] = Complex64::new(v, 0.0);
    }
    m
}

/// Transition operator `|j⟩⟨k|` on a `dim`-level system.
pub fn transition(dim: usize, j: usize, k: usize) -> ComplexMatrix {
    assert!(j < dim && k < dim, "level index out of range");
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(j, k)] = ONE;
    m
}

/// Truncated bosonic annihilation operator on Fock states `0..=n_max`.
pub fn annihilation(n_max: usize) -> ComplexMatrix {
    let dim = n_max + 1;
    let mut b = ComplexMatrix::zeros(dim, dim);
    for n in 1..dim {
        b[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    b
}

/// Number operator `b†b` on Fock states `0..=n_max`.
pub fn number(n_max: usize) -> ComplexMatrix {
    let occ: Vec<f64> = (0..=n_max).map(|n| n as f64).collect();
    diag(&occ)
}

/// Largest entrywise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |m − m†|` entrywise.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut err = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Commutator `[a, b]`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}
