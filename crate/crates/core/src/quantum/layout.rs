//! Tensor-factor bookkeeping for atom ⊗ Fock spaces.
//!
//! The factor order is fixed: atom first, Fock second. A joint basis state
//! `|a, n⟩` sits at index `a·(n_max+1) + n`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

/// Atomic level indices. The battery is `{g, e}`; `m` is the ancilla.
pub const G: usize = 0;
pub const E: usize = 1;
pub const M: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Atom,
    Fock,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subsystem::Atom => write!(f, "atom"),
            Subsystem::Fock => write!(f, "fock"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub label: Subsystem,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    factors: Vec<Factor>,
}

impl HilbertLayout {
    /// Joint atom ⊗ Fock space with Fock states `0..=n_max`.
    pub fn joint(atom_dim: usize, n_max: usize) -> Result<Self> {
        check_atom(atom_dim)?;
        check_fock(n_max)?;
        Ok(Self {
            factors: vec![
                Factor { label: Subsystem::Atom, dim: atom_dim },
                Factor { label: Subsystem::Fock, dim: n_max + 1 },
            ],
        })
    }

    pub fn atom(atom_dim: usize) -> Result<Self> {
        check_atom(atom_dim)?;
        Ok(Self { factors: vec![Factor { label: Subsystem::Atom, dim: atom_dim }] })
    }

    pub fn fock(n_max: usize) -> Result<Self> {
        check_fock(n_max)?;
        Ok(Self { factors: vec![Factor { label: Subsystem::Fock, dim: n_max + 1 }] })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn factor_dim(&self, label: Subsystem) -> Option<usize> {
        self.factors.iter().find(|f| f.label == label).map(|f| f.dim)
    }

    pub fn atom_dim(&self) -> Option<usize> {
        self.factor_dim(Subsystem::Atom)
    }

    pub fn n_max(&self) -> Option<usize> {
        self.factor_dim(Subsystem::Fock).map(|d| d - 1)
    }

    pub fn is_joint(&self) -> bool {
        self.factors.len() == 2
    }

    /// Index of `|a, n⟩` in a joint layout.
    pub fn index(&self, atom: usize, n: usize) -> usize {
        debug_assert!(self.is_joint());
        let fock_dim = self.factors[1].dim;
        debug_assert!(atom < self.factors[0].dim && n < fock_dim);
        atom * fock_dim + n
    }

    /// Inverse of [`HilbertLayout::index`].
    pub fn split(&self, index: usize) -> (usize, usize) {
        let fock_dim = self.factors[1].dim;
        (index / fock_dim, index % fock_dim)
    }

    /// Layout obtained by keeping only `label`.
    pub fn reduced(&self, label: Subsystem) -> Result<Self> {
        match self.factors.iter().find(|f| f.label == label) {
            Some(f) => Ok(Self { factors: vec![*f] }),
            None => usage(format!("layout has no `{label}` factor")),
        }
    }

    /// Requires an atomic factor of the given dimension.
    pub fn require_atom_dim(&self, atom_dim: usize) -> Result<()> {
        match self.atom_dim() {
            Some(d) if d == atom_dim => Ok(()),
            Some(d) => usage(format!("expected atom dimension {atom_dim}, layout has {d}")),
            None => usage("layout has no atom factor"),
        }
    }
}

fn check_atom(atom_dim: usize) -> Result<()> {
    if atom_dim == 2 || atom_dim == 3 {
        Ok(())
    } else {
        usage(format!("atom dimension must be 2 or 3, got {atom_dim}"))
    }
}

fn check_fock(n_max: usize) -> Result<()> {
    if n_max >= 1 {
        Ok(())
    } else {
        usage("Fock cutoff n_max must be at least 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_bijective() {
        let l = HilbertLayout::joint(3, 4).unwrap();
        assert_eq!(l.dim(), 15);
        let mut seen = vec![false; l.dim()];
        for a in 0..3 {
            for n in 0..5 {
                let k = l.index(a, n);
                assert_eq!(k, a * 5 + n);
                assert_eq!(l.split(k), (a, n));
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(HilbertLayout::joint(4, 3).is_err());
        assert!(HilbertLayout::joint(2, 0).is_err());
        assert!(HilbertLayout::atom(3).unwrap().reduced(Subsystem::Fock).is_err());
    }
}
