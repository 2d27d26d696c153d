//! Exact diagonalization of the perturbed toric code.
//!
//! `H = −J_e Σ_v h_v − J_m Σ_p h_p − h_z Σ_i σᶻ_i + χ Σ_{(i,j)} σˣ_i σʸ_j`
//! is applied matrix-free and its low end found by a thick-restart block
//! Krylov iteration with full reorthogonalization.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

mod krylov;
mod sectors;

pub use krylov::{lowest_eigenpairs, to_dense, HermitianOperator, SolverOptions, SpectrumResult, SPECTRUM_CSV_HEADER};
pub use sectors::{lowest_eigenpairs_by_sector, Sector, TranslationSectors};

use krylov::{dot, norm};

use crate::lattice::{LatticeError, PairSet, TorusLattice};
use crate::linalg::LinalgError;
use crate::pauli::{Pauli, PauliError, PauliString, PauliSum};
use crate::C64;

/// Largest register handled by the matrix-free solver.
pub const MAX_SOLVER_QUBITS: usize = 20;
const CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("term {0} is not Hermitian with a real coefficient")]
    NonHermitianTerm(String),
    #[error("{0} qubits exceeds the solver limit of {MAX_SOLVER_QUBITS}")]
    TooLarge(usize),
    #[error("requested {k} eigenpairs from dimension {dim}")]
    BadCount { k: usize, dim: usize },
    #[error("no convergence after {restarts} restarts; residuals {residuals:?}")]
    NoConvergence { restarts: usize, residuals: Vec<f64> },
    #[error("manifold has {0} states, expected 4")]
    ManifoldDimension(usize),
    #[error("term {0} breaks the translation symmetry")]
    NotSymmetric(String),
}

#[derive(Clone, Debug)]
struct Group {
    x: u64,
    /// `(z mask, coefficient · i^{|x∧z|})`.
    terms: Vec<(u64, C64)>,
}

/// A Hermitian sum of Pauli strings with real coefficients, applied
/// without building a matrix. Z-type terms are folded into a diagonal;
/// the rest are grouped by their X mask.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    n: usize,
    terms: Vec<(f64, PauliString)>,
    diag: Vec<f64>,
    groups: Vec<Group>,
}

fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

impl SparseHamiltonian {
    /// Strings may carry phase 0 or 2; the sign is folded into the
    /// coefficient. Repeated strings are summed.
    pub fn from_terms(n: usize, terms: &[(f64, PauliString)]) -> Result<Self, SpectraError> {
        if n > MAX_SOLVER_QUBITS {
            return Err(SpectraError::TooLarge(n));
        }
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, p) in terms {
            if p.n_qubits() != n {
                return Err(PauliError::SizeMismatch(n, p.n_qubits()).into());
            }
            if !c.is_finite() || p.phase_quarter() % 2 == 1 {
                return Err(SpectraError::NonHermitianTerm(p.to_string()));
            }
            let sign = if p.phase_quarter() == 2 { -1.0 } else { 1.0 };
            *merged.entry(p.unsigned()).or_insert(0.0) += sign * c;
        }
        let terms: Vec<(f64, PauliString)> = merged.into_iter().filter(|(_, c)| *c != 0.0).map(|(p, c)| (c, p)).collect();
        let dim = 1usize << n;
        let zs: Vec<(u64, f64)> = terms.iter().filter(|(_, p)| p.x_mask() == 0).map(|(c, p)| (p.z_mask(), *c)).collect();
        let diag = (0..dim)
            .into_par_iter()
            .map(|i| zs.iter().map(|&(z, c)| if parity(z & i as u64) { -c } else { c }).sum())
            .collect();
        let mut by_x: BTreeMap<u64, Vec<(u64, C64)>> = BTreeMap::new();
        for (c, p) in terms.iter().filter(|(_, p)| p.x_mask() != 0) {
            let ny = (p.x_mask() & p.z_mask()).count_ones();
            by_x.entry(p.x_mask()).or_default().push((p.z_mask(), crate::pauli::i_pow(ny) * c));
        }
        let groups = by_x.into_iter().map(|(x, terms)| Group { x, terms }).collect();
        Ok(Self { n, terms, diag, groups })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }
    pub fn dim(&self) -> usize {
        1 << self.n
    }
    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// `out = H v`, parallel over output entries.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * CHUNK;
            for (off, o) in chunk.iter_mut().enumerate() {
                let i = base + off;
                let mut acc = v[i] * self.diag[i];
                for g in &self.groups {
                    let j = i ^ g.x as usize;
                    let mut s = C64::new(0.0, 0.0);
                    for &(z, c) in &g.terms {
                        if parity(z & j as u64) {
                            s -= c;
                        } else {
                            s += c;
                        }
                    }
                    acc += s * v[j];
                }
                *o = acc;
            }
        });
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply(v, &mut out);
        out
    }

    pub fn to_pauli_sum(&self) -> PauliSum {
        let mut s = PauliSum::with_tolerance(self.n, 0.0);
        for (c, p) in &self.terms {
            s.add_real(p, *c).expect("sizes agree");
        }
        s
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>, SpectraError> {
        Ok(self.to_pauli_sum().to_dense()?)
    }

    /// Same Hamiltonian with qubit `q` renamed to `map[q]`.
    pub fn relabeled(&self, map: &[usize]) -> Result<Self, SpectraError> {
        let terms = self
            .terms
            .iter()
            .map(|(c, p)| Ok((*c, p.permuted(map)?)))
            .collect::<Result<Vec<_>, PauliError>>()?;
        Self::from_terms(self.n, &terms)
    }
}

impl HermitianOperator for SparseHamiltonian {
    fn dim(&self) -> usize {
        SparseHamiltonian::dim(self)
    }
    fn apply(&self, v: &[C64], out: &mut [C64]) {
        SparseHamiltonian::apply(self, v, out)
    }
}

pub fn build_hamiltonian(lat: &TorusLattice, j_e: f64, j_m: f64, chi: f64, h_z: f64, pairs: PairSet) -> Result<SparseHamiltonian, SpectraError> {
    let n = lat.n_links();
    let mut terms = Vec::new();
    if j_e != 0.0 {
        terms.extend(lat.vertex_stabilizers().into_iter().map(|s| (-j_e, s)));
    }
    if j_m != 0.0 {
        terms.extend(lat.plaquette_stabilizers().into_iter().map(|s| (-j_m, s)));
    }
    if h_z != 0.0 {
        for q in 0..n {
            terms.push((-h_z, PauliString::single(n, q, Pauli::Z)?));
        }
    }
    if chi != 0.0 {
        for (i, j) in lat.perturbation_pairs(pairs) {
            terms.push((chi, PauliString::from_sparse(n, &[(i, Pauli::X), (j, Pauli::Y)])?));
        }
    }
    SparseHamiltonian::from_terms(n, &terms)
}

/// Ground states of the unperturbed code, labeled by the logical-Z loops.
///
/// `|0…0⟩` projected by `Π_p (1 + h_p)/2` has `Z̄₁ = Z̄₂ = +1`; the other
/// three states follow from `X̄₁`, `X̄₂` and `X̄₁X̄₂`.
pub fn reference_manifold(lat: &TorusLattice) -> Result<Vec<Vec<C64>>, SpectraError> {
    let n = lat.n_links();
    if n > MAX_SOLVER_QUBITS {
        return Err(SpectraError::TooLarge(n));
    }
    let dim = 1usize << n;
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[0] = C64::new(1.0, 0.0);
    for p in lat.plaquette_stabilizers() {
        let flipped = p.apply_to_state(&psi)?;
        psi.iter_mut().zip(flipped).for_each(|(a, b)| *a = (*a + b) * 0.5);
    }
    let s = C64::new(1.0 / norm(&psi), 0.0);
    psi.iter_mut().for_each(|e| *e *= s);
    let [_, _, x1, x2] = lat.logical_operators();
    let a = x1.apply_to_state(&psi)?;
    let b = x2.apply_to_state(&psi)?;
    let ab = x2.apply_to_state(&a)?;
    Ok(vec![psi, a, b, ab])
}

#[derive(Clone, Debug, Serialize)]
pub struct Fidelity {
    /// Mean singular value of the overlap matrix.
    pub subspace: f64,
    /// `|M_{m,σ(m)}|` under the assignment σ maximizing their sum.
    pub per_state: [f64; 4],
    pub assignment: [usize; 4],
    /// `|⟨ref_m | pert_n⟩|`.
    pub overlaps: [[f64; 4]; 4],
}

pub fn ground_fidelity(reference: &[Vec<C64>], perturbed: &[Vec<C64>]) -> Result<Fidelity, SpectraError> {
    for m in [reference, perturbed] {
        if m.len() != 4 {
            return Err(SpectraError::ManifoldDimension(m.len()));
        }
    }
    let mut mat = DMatrix::<C64>::zeros(4, 4);
    for (i, r) in reference.iter().enumerate() {
        for (j, p) in perturbed.iter().enumerate() {
            if r.len() != p.len() {
                return Err(PauliError::DimensionMismatch {
                    got: p.len(),
                    expected: r.len(),
                }
                .into());
            }
            mat[(i, j)] = dot(r, p);
        }
    }
    let sv = mat.clone().singular_values();
    let subspace = (sv.iter().sum::<f64>() / 4.0).min(1.0);
    let abs = |i: usize, j: usize| mat[(i, j)].norm().min(1.0);
    let best = (0..4)
        .permutations(4)
        .max_by(|a, b| {
            let sa: f64 = a.iter().enumerate().map(|(i, &j)| abs(i, j)).sum();
            let sb: f64 = b.iter().enumerate().map(|(i, &j)| abs(i, j)).sum();
            sa.total_cmp(&sb)
        })
        .expect("nonempty");
    let assignment = [best[0], best[1], best[2], best[3]];
    let mut overlaps = [[0.0; 4]; 4];
    for (i, row) in overlaps.iter_mut().enumerate() {
        for (j, o) in row.iter_mut().enumerate() {
            *o = abs(i, j);
        }
    }
    Ok(Fidelity {
        subspace,
        per_state: [0, 1, 2, 3].map(|i| abs(i, assignment[i])),
        assignment,
        overlaps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityRecord {
    pub fidelity: Fidelity,
    /// Lowest five eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `E₄ − E₃`: from the top of the manifold to the first excited state.
    pub gap: f64,
    /// `E₃ − E₀`: width of the quasi-degenerate manifold.
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityPoint {
    pub chi: f64,
    pub result: Result<FidelityRecord, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityScan {
    pub l: usize,
    pub h_z: f64,
    pub pairs: PairSet,
    pub points: Vec<FidelityPoint>,
}

pub const FIDELITY_CSV_HEADER: &str = "chi,subspace_fidelity,f1,f2,f3,f4,gap,spread\n";

impl FidelityScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(FIDELITY_CSV_HEADER);
        for p in &self.points {
            match &p.result {
                Ok(r) => {
                    let f = &r.fidelity;
                    let _ = writeln!(
                        out,
                        "{},{:.10},{:.10},{:.10},{:.10},{:.10},{:.10},{:.10}",
                        p.chi, f.subspace, f.per_state[0], f.per_state[1], f.per_state[2], f.per_state[3], r.gap, r.spread
                    );
                }
                Err(_) => {
                    let _ = writeln!(out, "{},nan,nan,nan,nan,nan,nan,nan", p.chi);
                }
            }
        }
        out
    }

    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from(SPECTRUM_CSV_HEADER);
        for p in &self.points {
            if let Ok(r) = &p.result {
                for (i, e) in r.eigenvalues.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{i},{e:.12},", p.chi, self.h_z);
                }
            }
        }
        out
    }
}

/// Fidelity of the perturbed low-energy manifold against the unperturbed
/// reference at each χ. A failing point is recorded, not fatal.
pub fn fidelity_scan(lat: &TorusLattice, chis: &[f64], h_z: f64, pairs: PairSet, opts: &SolverOptions) -> Result<FidelityScan, SpectraError> {
    let reference = reference_manifold(lat)?;
    let points = chis
        .par_iter()
        .map(|&chi| {
            let run = || -> Result<FidelityRecord, SpectraError> {
                let h = build_hamiltonian(lat, 1.0, 1.0, chi, h_z, pairs)?;
                let spec = match lowest_eigenpairs_by_sector(lat, &h, 5, opts) {
                    Err(SpectraError::NotSymmetric(_)) => lowest_eigenpairs(&h, 5, opts)?,
                    other => other?,
                };
                let fidelity = ground_fidelity(&reference, &spec.eigenvectors[..4])?;
                let e = &spec.eigenvalues;
                Ok(FidelityRecord {
                    fidelity,
                    gap: e[4] - e[3],
                    spread: e[3] - e[0],
                    eigenvalues: spec.eigenvalues,
                })
            };
            FidelityPoint {
                chi,
                result: run().map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(FidelityScan {
        l: lat.size(),
        h_z,
        pairs,
        points,
    })
}
