//! Working bases for density matrices.
//!
//! In the joint eigenbasis of `n` independent commuting Pauli generators
//! every Pauli string is monomial: it maps the eigenvector with syndrome
//! `s` to a phase times the one with syndrome `s ⊕ f`, where `f` marks the
//! generators it anticommutes with. Jump operators built from stabilizer
//! projectors stay monomial, which keeps the Liouvillian block diagonal.

use nalgebra::DMatrix;

use super::{LindbladError, MAX_DENSE_QUBITS};
use crate::linalg::SparseMatrix;
use crate::pauli::{PauliString, PauliSum};
use crate::C64;

#[derive(Clone, Debug)]
pub struct StabilizerBasis {
    n: usize,
    generators: Vec<PauliString>,
    /// Column `s` is the joint eigenvector with `g_k = (−1)^{s_k}`.
    vectors: DMatrix<C64>,
}

impl StabilizerBasis {
    pub fn new(generators: &[PauliString]) -> Result<Self, LindbladError> {
        let n = generators.first().map_or(0, |g| g.n_qubits());
        if n == 0 || generators.len() != n {
            return Err(LindbladError::BadGenerators(format!("need one per qubit, got {} for {n}", generators.len())));
        }
        if n > MAX_DENSE_QUBITS {
            return Err(LindbladError::TooLarge(n));
        }
        for (i, a) in generators.iter().enumerate() {
            if a.n_qubits() != n || !a.is_hermitian() {
                return Err(LindbladError::BadGenerators(format!("{a} is not a Hermitian {n}-qubit string")));
            }
            if generators[i + 1..].iter().any(|b| !a.commutes_with(b)) {
                return Err(LindbladError::BadGenerators(format!("{a} fails to commute")));
            }
        }
        let d = 1usize << n;
        let (diag, off): (Vec<(usize, &PauliString)>, Vec<(usize, &PauliString)>) = generators.iter().enumerate().partition(|(_, g)| g.x_mask() == 0);
        let mut vectors = DMatrix::zeros(d, d);
        for s in 0..d {
            let sign = |k: usize| if s >> k & 1 == 1 { -1.0 } else { 1.0 };
            let mut found = false;
            for j in 0..d as u64 {
                if !diag.iter().all(|&(k, g)| (g.column(j).1.re - sign(k)).abs() < 0.5) {
                    continue;
                }
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[j as usize] = C64::new(1.0, 0.0);
                for &(k, g) in &off {
                    let gv = g.apply_to_state(&v)?;
                    v.iter_mut().zip(&gv).for_each(|(a, b)| *a = (*a + b * sign(k)) * 0.5);
                }
                let nrm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                if nrm > 1e-6 {
                    vectors.column_mut(s).iter_mut().zip(&v).for_each(|(o, a)| *o = a / nrm);
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(LindbladError::BadGenerators(format!("syndrome {s:#b} is empty; generators are dependent")));
            }
        }
        Ok(Self {
            n,
            generators: generators.to_vec(),
            vectors,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }
    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }
    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    fn flip(&self, p: &PauliString) -> usize {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.commutes_with(p))
            .map(|(k, _)| 1usize << k)
            .sum()
    }

    /// Matrix of `op` in this basis.
    pub fn compile(&self, op: &PauliSum) -> Result<SparseMatrix, LindbladError> {
        let d = 1usize << self.n;
        let mut t = Vec::new();
        for (p, c) in op.iter() {
            let f = self.flip(&p);
            for s in 0..d {
                let col: Vec<C64> = self.vectors.column(s).iter().copied().collect();
                let img = p.apply_to_state(&col)?;
                let phase: C64 = self.vectors.column(s ^ f).iter().zip(&img).map(|(a, b)| a.conj() * b).sum();
                t.push((s ^ f, s, c * phase));
            }
        }
        let mut m = SparseMatrix::from_triplets(d, d, t);
        m.prune(1e-13);
        Ok(m)
    }
}

/// Basis in which density matrices are stored and evolved.
#[derive(Clone, Debug)]
pub enum WorkingBasis {
    Computational(usize),
    Stabilizer(StabilizerBasis),
}

impl WorkingBasis {
    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Computational(n) => *n,
            Self::Stabilizer(b) => b.n,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn compile(&self, op: &PauliSum) -> Result<SparseMatrix, LindbladError> {
        if op.n_qubits() != self.n_qubits() {
            return Err(LindbladError::Register {
                got: op.n_qubits(),
                expected: self.n_qubits(),
            });
        }
        match self {
            Self::Computational(_) => {
                let mut m = SparseMatrix::from_pauli_sum(op);
                m.prune(1e-13);
                Ok(m)
            }
            Self::Stabilizer(b) => b.compile(op),
        }
    }

    /// Coordinates of a computational-basis vector.
    pub fn state(&self, psi: &[C64]) -> Vec<C64> {
        match self {
            Self::Computational(_) => psi.to_vec(),
            Self::Stabilizer(b) => (b.vectors.adjoint() * nalgebra::DVector::from_column_slice(psi)).iter().copied().collect(),
        }
    }

    pub fn from_computational(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        match self {
            Self::Computational(_) => m.clone(),
            Self::Stabilizer(b) => b.vectors.adjoint() * m * &b.vectors,
        }
    }

    pub fn to_computational(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        match self {
            Self::Computational(_) => m.clone(),
            Self::Stabilizer(b) => &b.vectors * m * b.vectors.adjoint(),
        }
    }
}
