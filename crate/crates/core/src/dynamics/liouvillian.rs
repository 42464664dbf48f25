//! Master-equation generator restricted to its invariant support.
//!
//! The generator `ρ ↦ −i[H,ρ] + Σ_s Γ_s (2L_sρL_s† − {L_s†L_s, ρ})` maps
//! matrix entries to matrix entries. Starting from the non-zero entries of
//! the initial state we close that set under the generator; the state never
//! leaves it. For the Raman problem the closure is block diagonal in the
//! conserved quantity `n − [atom = e]`, so the vectorised state has
//! `≈ 9(n_max+1)` components instead of `(3(n_max+1))²`.

use std::collections::{HashMap, VecDeque};

use nalgebra::DVector;
use num_complex::Complex64;

use super::channels::LindbladChannel;
use crate::error::{usage, Result};
use crate::quantum::matrix::{ComplexMatrix, I, ONE, ZERO};

/// Non-zero pattern of a square matrix, by column and by row.
struct Sparse {
    cols: Vec<Vec<(usize, Complex64)>>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl Sparse {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut cols = vec![Vec::new(); n];
        let mut rows = vec![Vec::new(); n];
        for j in 0..n {
            for i in 0..n {
                let z = m[(i, j)];
                if z != ZERO {
                    cols[j].push((i, z));
                    rows[i].push((j, z));
                }
            }
        }
        Self { cols, rows }
    }

    fn identity(n: usize) -> Self {
        Self {
            cols: (0..n).map(|i| vec![(i, ONE)]).collect(),
            rows: (0..n).map(|i| vec![(i, ONE)]).collect(),
        }
    }
}

/// `ρ ↦ A ρ B`.
struct Sandwich {
    left: Sparse,
    right: Sparse,
}

impl Sandwich {
    /// Contributions of entry `(i, j)` of ρ to entries `(k, l)` of `AρB`.
    fn for_each(&self, i: usize, j: usize, mut f: impl FnMut(usize, usize, Complex64)) {
        for &(k, a) in &self.left.cols[i] {
            for &(l, b) in &self.right.rows[j] {
                f(k, l, a * b);
            }
        }
    }
}

fn sandwich_terms(h: &ComplexMatrix, channels: &[LindbladChannel]) -> Vec<Sandwich> {
    let n = h.nrows();
    let mut terms = vec![
        Sandwich { left: Sparse::from_dense(&(h * -I)), right: Sparse::identity(n) },
        Sandwich { left: Sparse::identity(n), right: Sparse::from_dense(&(h * I)) },
    ];
    for ch in channels.iter().filter(|c| c.rate > 0.0) {
        terms.extend(dissipator_terms(ch));
    }
    terms
}

fn dissipator_terms(ch: &LindbladChannel) -> [Sandwich; 3] {
    let n = ch.jump.nrows();
    let rate = Complex64::new(ch.rate, 0.0);
    let l = &ch.jump;
    let ld = l.adjoint();
    let ldl = &ld * l;
    [
        Sandwich { left: Sparse::from_dense(&(l * (rate * 2.0))), right: Sparse::from_dense(&ld) },
        Sandwich { left: Sparse::from_dense(&(&ldl * -rate)), right: Sparse::identity(n) },
        Sandwich { left: Sparse::identity(n), right: Sparse::from_dense(&(&ldl * -rate)) },
    ]
}

fn visit(
    p: (usize, usize),
    pairs: &mut Vec<(usize, usize)>,
    lookup: &mut HashMap<(usize, usize), usize>,
    queue: &mut VecDeque<usize>,
) {
    for q in [p, (p.1, p.0)] {
        if let std::collections::hash_map::Entry::Vacant(slot) = lookup.entry(q) {
            slot.insert(pairs.len());
            queue.push_back(pairs.len());
            pairs.push(q);
        }
    }
}

/// Sparse generator acting on the vectorised support.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    pairs: Vec<(usize, usize)>,
    lookup: HashMap<(usize, usize), usize>,
    /// Index of the transposed pair `(j, i)` for each pair `(i, j)`.
    transpose: Vec<usize>,
    /// Row-major non-zeros of the generator.
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl Liouvillian {
    /// Builds the generator on the closure of the non-zero entries of `seed`.
    pub fn new(h: &ComplexMatrix, channels: &[LindbladChannel], seed: &ComplexMatrix) -> Result<Self> {
        let dim = h.nrows();
        if !h.is_square() || seed.nrows() != dim || seed.ncols() != dim {
            return usage("Hamiltonian and initial state dimensions differ");
        }
        if let Some(ch) = channels.iter().find(|c| c.jump.nrows() != dim) {
            return usage(format!("jump operator of channel {} has the wrong dimension", ch.label));
        }
        let terms = sandwich_terms(h, channels);

        let mut pairs = Vec::new();
        let mut lookup = HashMap::new();
        let mut queue = VecDeque::new();
        for j in 0..dim {
            for i in 0..dim {
                if seed[(i, j)] != ZERO {
                    visit((i, j), &mut pairs, &mut lookup, &mut queue);
                }
            }
        }
        let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();
        while let Some(col) = queue.pop_front() {
            let (i, j) = pairs[col];
            let mut targets: Vec<((usize, usize), Complex64)> = Vec::new();
            for term in &terms {
                term.for_each(i, j, |k, l, v| targets.push(((k, l), v)));
            }
            for (target, v) in targets {
                visit(target, &mut pairs, &mut lookup, &mut queue);
                triplets.push((lookup[&target], col, v));
            }
        }

        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); pairs.len()];
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        for (r, c, v) in triplets {
            match rows[r].last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => rows[r].push((c, v)),
            }
        }
        for row in &mut rows {
            row.retain(|&(_, v)| v != ZERO);
        }
        let transpose = pairs.iter().map(|&(i, j)| lookup[&(j, i)]).collect();
        Ok(Self { dim, pairs, lookup, transpose, rows })
    }

    /// Hilbert-space dimension.
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    /// Number of tracked matrix entries.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn vectorize(&self, rho: &ComplexMatrix) -> DVector<Complex64> {
        DVector::from_iterator(self.pairs.len(), self.pairs.iter().map(|&(i, j)| rho[(i, j)]))
    }

    pub fn to_matrix(&self, v: &[Complex64]) -> ComplexMatrix {
        let mut rho = ComplexMatrix::zeros(self.dim, self.dim);
        for (&(i, j), &z) in self.pairs.iter().zip(v) {
            rho[(i, j)] = z;
        }
        rho
    }

    /// `out = L v`.
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().fold(ZERO, |acc, &(c, m)| acc + m * v[c]);
        }
    }

    /// Dense generator matrix.
    pub fn dense(&self) -> ComplexMatrix {
        let n = self.pairs.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Row vector `c` with `c · v = Tr(X ρ)`.
    pub fn functional(&self, x: &ComplexMatrix) -> Vec<Complex64> {
        self.pairs.iter().map(|&(i, j)| x[(j, i)]).collect()
    }

    pub fn entry(&self, v: &[Complex64], i: usize, j: usize) -> Complex64 {
        self.lookup.get(&(i, j)).map_or(ZERO, |&k| v[k])
    }

    pub fn trace(&self, v: &[Complex64]) -> Complex64 {
        (0..self.dim).map(|i| self.entry(v, i, i)).sum()
    }

    /// Replaces `v` by its Hermitian part; returns the largest correction.
    pub fn symmetrize(&self, v: &mut [Complex64]) -> f64 {
        let mut worst = 0.0_f64;
        for (k, &t) in self.transpose.iter().enumerate() {
            if t < k {
                continue;
            }
            let avg = 0.5 * (v[k] + v[t].conj());
            worst = worst.max((v[k] - avg).norm());
            v[k] = avg;
            v[t] = avg.conj();
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::channels::ChannelLabel;
    use crate::quantum::matrix::{annihilation, diag};

    /// Dense reference generator applied to a matrix.
    fn dense_rhs(h: &ComplexMatrix, channels: &[LindbladChannel], rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = (h * rho - rho * h) * -I;
        for ch in channels {
            let l = &ch.jump;
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += (l * rho * &ld * Complex64::new(2.0, 0.0) - &ldl * rho - rho * &ldl) * Complex64::new(ch.rate, 0.0);
        }
        out
    }

    #[test]
    fn restricted_generator_matches_dense_form() {
        let n_max = 4;
        let b = annihilation(n_max);
        let h = (&b + b.adjoint()) * Complex64::new(0.3, 0.0) + diag(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let channels = vec![
            LindbladChannel::new(ChannelLabel::Minus, b.clone(), 0.2).unwrap(),
            LindbladChannel::new(ChannelLabel::Plus, b.adjoint(), 0.05).unwrap(),
        ];
        let mut rho = diag(&[0.5, 0.3, 0.1, 0.07, 0.03]);
        rho[(0, 1)] = Complex64::new(0.05, 0.02);
        rho[(1, 0)] = rho[(0, 1)].conj();
        let l = Liouvillian::new(&h, &channels, &rho).unwrap();
        // the coherent drive mixes every entry
        assert_eq!(l.len(), 25);
        let v = l.vectorize(&rho);
        let mut out = vec![ZERO; l.len()];
        l.apply(v.as_slice(), &mut out);
        let want = dense_rhs(&h, &channels, &rho);
        let got = l.to_matrix(&out);
        assert!(crate::quantum::matrix::max_abs(&(got - want)) < 1e-14);
    }

    #[test]
    fn diagonal_dynamics_stay_diagonal() {
        let b = annihilation(3);
        let channels = vec![LindbladChannel::new(ChannelLabel::Minus, b, 1.0).unwrap()];
        let h = ComplexMatrix::zeros(4, 4);
        let rho = diag(&[0.0, 0.0, 0.0, 1.0]);
        let l = Liouvillian::new(&h, &channels, &rho).unwrap();
        assert_eq!(l.len(), 4);
    }
}
