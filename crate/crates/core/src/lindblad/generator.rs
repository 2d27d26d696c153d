//! The Lindblad generator as a sparse action on density matrices, its
//! invariant blocks in Liouville space, time integration and stationary
//! states.
//!
//! `L(ρ) = −i(H_eff ρ − ρ H_eff†) + 2 Σ_c c ρ c†` with
//! `H_eff = H − i Σ_c c†c`. Liouville coordinates are column-major:
//! `|a⟩⟨b|` has index `a + d·b`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{DensityMatrix, LindbladError, LindbladModel, StabilizerBasis, StateDefects, WorkingBasis, MAX_DENSE_QUBITS};
use crate::linalg::{czero, SparseMatrix};
use crate::C64;

/// Largest Liouville block handed to a dense null-space solve.
pub const MAX_BLOCK: usize = 2048;

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub struct Generator {
    dim: usize,
    h: SparseMatrix,
    h_eff: SparseMatrix,
    /// Adjoints: row `a` lists column `a` of the original, conjugated.
    h_eff_adj: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    jumps_adj: Vec<SparseMatrix>,
    basis: Option<WorkingBasis>,
    blocks: OnceLock<LiouvilleBlocks>,
}

impl Generator {
    /// `jumps` already carry their amplitudes.
    pub fn from_parts(h: SparseMatrix, jumps: Vec<SparseMatrix>) -> Self {
        let dim = h.rows();
        let mut k_terms = Vec::new();
        for c in &jumps {
            assert_eq!((c.rows(), c.cols()), (dim, dim), "jump dimension");
            k_terms.extend(c.adjoint().matmul(c).triplets().map(|(r, col, v)| (r, col, -I * v)));
        }
        let h_eff = h.add(&SparseMatrix::from_triplets(dim, dim, k_terms));
        let jumps_adj = jumps.iter().map(SparseMatrix::adjoint).collect();
        Self {
            dim,
            h_eff_adj: h_eff.adjoint(),
            h_eff,
            h,
            jumps,
            jumps_adj,
            basis: None,
            blocks: OnceLock::new(),
        }
    }

    /// Compiles the model in `basis`, dropping zero-rate jumps.
    pub fn compile(model: &LindbladModel, basis: WorkingBasis) -> Result<Self, LindbladError> {
        model.validate()?;
        let n = model.n_qubits();
        if n > MAX_DENSE_QUBITS {
            return Err(LindbladError::TooLarge(n));
        }
        if basis.n_qubits() != n {
            return Err(LindbladError::Register {
                got: basis.n_qubits(),
                expected: n,
            });
        }
        let h = basis.compile(&model.hamiltonian.to_pauli_sum())?;
        let jumps = model
            .jumps
            .iter()
            .filter(|j| j.rate() > 0.0)
            .map(|j| Ok(basis.compile(&j.op)?.scale(C64::new(j.amplitude(), 0.0))))
            .collect::<Result<Vec<_>, LindbladError>>()?;
        let mut g = Self::from_parts(h, jumps);
        g.basis = Some(basis);
        Ok(g)
    }

    /// Compiles in the joint eigenbasis of the model's generators when it
    /// has a complete set, else in the computational basis.
    pub fn for_model(model: &LindbladModel) -> Result<Self, LindbladError> {
        let basis = if model.basis_generators.len() == model.n_qubits() && model.n_qubits() <= MAX_DENSE_QUBITS {
            WorkingBasis::Stabilizer(StabilizerBasis::new(&model.basis_generators)?)
        } else {
            WorkingBasis::Computational(model.n_qubits())
        };
        Self::compile(model, basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn hamiltonian(&self) -> &SparseMatrix {
        &self.h
    }
    pub fn jumps(&self) -> &[SparseMatrix] {
        &self.jumps
    }
    pub fn basis(&self) -> Option<&WorkingBasis> {
        self.basis.as_ref()
    }
    pub(crate) fn h_eff(&self) -> &SparseMatrix {
        &self.h_eff
    }

    /// Compiles `op` in this generator's basis.
    pub fn observable(&self, op: &crate::pauli::PauliSum) -> Result<SparseMatrix, LindbladError> {
        match &self.basis {
            Some(b) => b.compile(op),
            None => Err(LindbladError::Register {
                got: op.n_qubits(),
                expected: 0,
            }),
        }
    }

    /// Moves a computational-basis matrix into the working basis.
    pub fn import(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        self.basis.as_ref().map_or_else(|| m.clone(), |b| b.from_computational(m))
    }

    pub fn export(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        self.basis.as_ref().map_or_else(|| m.clone(), |b| b.to_computational(m))
    }

    /// `L(ρ)` on a column-major slice.
    pub fn apply_slice(&self, src: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.par_chunks_mut(d).enumerate().for_each(|(j, col)| {
            self.h_eff.apply(&src[j * d..(j + 1) * d], col);
            col.iter_mut().for_each(|v| *v *= -I);
            // (ρ H_eff†)[:, j] = Σ_k conj(H_eff[j, k]) ρ[:, k]
            for (k, v) in self.h_eff.row(j) {
                let f = I * v.conj();
                col.iter_mut().zip(&src[k * d..(k + 1) * d]).for_each(|(o, s)| *o += f * s);
            }
        });
        let mut y = vec![czero(); d * d];
        for c in &self.jumps {
            y.par_chunks_mut(d).enumerate().for_each(|(j, col)| c.apply(&src[j * d..(j + 1) * d], col));
            out.par_chunks_mut(d).enumerate().for_each(|(j, col)| {
                for (k, v) in c.row(j) {
                    let f = 2.0 * v.conj();
                    col.iter_mut().zip(&y[k * d..(k + 1) * d]).for_each(|(o, s)| *o += f * s);
                }
            });
        }
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        self.apply_slice(rho.as_slice(), out.as_mut_slice());
        out
    }

    /// Column `a + d·b` of the superoperator, unsummed.
    fn liouville_column(&self, node: usize, out: &mut Vec<(usize, C64)>) {
        let d = self.dim;
        let (a, b) = (node % d, node / d);
        for (k, v) in self.h_eff_adj.row(a) {
            out.push((k + d * b, -I * v.conj()));
        }
        for (k, v) in self.h_eff_adj.row(b) {
            out.push((a + d * k, I * v));
        }
        for c in &self.jumps_adj {
            for (k1, v1) in c.row(a) {
                for (k2, v2) in c.row(b) {
                    out.push((k1 + d * k2, 2.0 * v1.conj() * v2));
                }
            }
        }
    }

    /// Dense superoperator; for small dimensions and tests.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let dd = self.dim * self.dim;
        let mut m = DMatrix::zeros(dd, dd);
        let mut col = Vec::new();
        for node in 0..dd {
            col.clear();
            self.liouville_column(node, &mut col);
            for &(r, v) in &col {
                m[(r, node)] += v;
            }
        }
        m
    }

    pub fn blocks(&self) -> &LiouvilleBlocks {
        self.blocks.get_or_init(|| LiouvilleBlocks::new(self))
    }

    /// The superoperator restricted to `nodes`, which must be a union of
    /// blocks.
    fn restricted(&self, nodes: &[usize], local: &mut [u32]) -> SparseMatrix {
        for (i, &n) in nodes.iter().enumerate() {
            local[n] = i as u32;
        }
        let mut t = Vec::new();
        let mut col = Vec::new();
        for (ci, &n) in nodes.iter().enumerate() {
            col.clear();
            self.liouville_column(n, &mut col);
            t.extend(col.iter().map(|&(r, v)| (local[r] as usize, ci, v)));
        }
        SparseMatrix::from_triplets(nodes.len(), nodes.len(), t)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Connected components of Liouville space under the generator. Each is
/// an invariant subspace.
#[derive(Clone, Debug)]
pub struct LiouvilleBlocks {
    dim: usize,
    block_of: Vec<u32>,
    blocks: Vec<Vec<usize>>,
}

impl LiouvilleBlocks {
    fn new(g: &Generator) -> Self {
        let dd = g.dim * g.dim;
        let mut parent: Vec<u32> = (0..dd as u32).collect();
        let mut col = Vec::new();
        for node in 0..dd {
            col.clear();
            g.liouville_column(node, &mut col);
            for &(r, v) in &col {
                if v != czero() {
                    let (x, y) = (find(&mut parent, node as u32), find(&mut parent, r as u32));
                    if x != y {
                        parent[x.max(y) as usize] = x.min(y);
                    }
                }
            }
        }
        let mut block_of = vec![u32::MAX; dd];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut id_of_root = vec![u32::MAX; dd];
        for node in 0..dd {
            let r = find(&mut parent, node as u32) as usize;
            if id_of_root[r] == u32::MAX {
                id_of_root[r] = blocks.len() as u32;
                blocks.push(Vec::new());
            }
            block_of[node] = id_of_root[r];
            blocks[id_of_root[r] as usize].push(node);
        }
        Self { dim: g.dim, block_of, blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
    pub fn largest(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }
    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    /// Whether block `i` holds a diagonal element `|a⟩⟨a|`.
    pub fn has_population(&self, i: usize) -> bool {
        self.blocks[i].iter().any(|&n| n % self.dim == n / self.dim)
    }

    /// Sorted union of the blocks touching the support of `m`.
    pub fn cover(&self, m: &[C64]) -> Vec<usize> {
        let mut used = vec![false; self.blocks.len()];
        for (n, v) in m.iter().enumerate() {
            if *v != czero() {
                used[self.block_of[n] as usize] = true;
            }
        }
        let mut out: Vec<usize> = used.iter().enumerate().filter(|(_, &u)| u).flat_map(|(b, _)| self.blocks[b].iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    /// Dormand–Prince 5(4) with the local error of every component held
    /// below `atol + rtol·|y|`; the step grows by at most 5× and shrinks by
    /// at most 5× per attempt.
    Rk45 { rtol: f64, atol: f64, h_init: f64, h_min: f64 },
    /// Classical fourth-order Runge–Kutta at fixed `dt`.
    Rk4 { dt: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk45 {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct StepCounts {
    pub accepted: usize,
    pub rejected: usize,
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn lin_comb(y: &[C64], h: f64, ks: &[Vec<C64>], coeffs: &[f64], out: &mut [C64]) {
    out.copy_from_slice(y);
    for (k, &c) in ks.iter().zip(coeffs) {
        if c != 0.0 {
            let f = h * c;
            out.iter_mut().zip(k).for_each(|(o, v)| *o += v * f);
        }
    }
}

/// Integrates `y' = f(y)` from `t = 0`, calling `sample` at each of the
/// ascending `times`.
pub(crate) fn integrate<F, S>(f: F, y: &mut Vec<C64>, times: &[f64], integ: &Integrator, mut sample: S) -> Result<StepCounts, LindbladError>
where
    F: Fn(&[C64], &mut [C64]),
    S: FnMut(usize, f64, &[C64]) -> Result<(), LindbladError>,
{
    let n = y.len();
    let mut counts = StepCounts::default();
    let mut t = 0.0;
    let mut tmp = vec![czero(); n];
    match *integ {
        Integrator::Rk4 { dt } => {
            if !(dt > 0.0) {
                return Err(LindbladError::StepUnderflow { t, h: dt });
            }
            let mut k = vec![vec![czero(); n]; 4];
            for (si, &ts) in times.iter().enumerate() {
                while ts - t > 1e-12 * ts.abs().max(1.0) {
                    let h = dt.min(ts - t);
                    f(y, &mut k[0]);
                    lin_comb(y, h / 2.0, &k[..1], &[1.0], &mut tmp);
                    f(&tmp, &mut k[1]);
                    lin_comb(y, h / 2.0, &k[1..2], &[1.0], &mut tmp);
                    f(&tmp, &mut k[2]);
                    lin_comb(y, h, &k[2..3], &[1.0], &mut tmp);
                    f(&tmp, &mut k[3]);
                    let coeffs = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
                    lin_comb(y, h, &k, &coeffs, &mut tmp);
                    std::mem::swap(y, &mut tmp);
                    t += h;
                    counts.accepted += 1;
                }
                t = ts;
                sample(si, t, y)?;
            }
        }
        Integrator::Rk45 { rtol, atol, h_init, h_min } => {
            let mut k = vec![vec![czero(); n]; 7];
            let mut y5 = vec![czero(); n];
            let mut h = h_init;
            f(y, &mut k[0]);
            for (si, &ts) in times.iter().enumerate() {
                while ts - t > 1e-12 * ts.abs().max(1.0) {
                    let hs = h.min(ts - t);
                    for s in 1..7 {
                        let (head, rest) = k.split_at_mut(s);
                        let stage = if s < 6 { &mut tmp } else { &mut y5 };
                        lin_comb(y, hs, head, &A[s - 1][..s], stage);
                        f(stage, &mut rest[0]);
                    }
                    let mut err = 0.0f64;
                    for i in 0..n {
                        let e: C64 = (0..7).map(|s| k[s][i] * E[s]).sum::<C64>() * hs;
                        let scale = atol + rtol * y[i].norm().max(y5[i].norm());
                        err = err.max(e.norm() / scale);
                    }
                    if err <= 1.0 {
                        std::mem::swap(y, &mut y5);
                        k.swap(0, 6);
                        t += hs;
                        counts.accepted += 1;
                    } else {
                        counts.rejected += 1;
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // A step clipped to reach a sample time does not shrink
                    // the proposal.
                    let next = hs * factor;
                    h = if err <= 1.0 && hs < h { h.max(next) } else { next };
                    if h < h_min {
                        return Err(LindbladError::StepUnderflow { t, h });
                    }
                }
                t = ts;
                sample(si, t, y)?;
            }
        }
    }
    Ok(counts)
}

/// Record of one density-matrix evolution.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    /// In the generator's working basis; empty for observed runs.
    pub states: Vec<DensityMatrix>,
    pub steps: usize,
    pub rejected: usize,
    /// Worst invariant defects over the sample times.
    pub worst: StateDefects,
    /// Number of Liouville coordinates actually integrated.
    pub active: usize,
}

/// Evolves `rho0` (working basis) and hands each sampled state to
/// `observe`. Only the Liouville blocks touched by `rho0` are integrated.
pub fn evolve_observed<O>(gen: &Generator, rho0: &DensityMatrix, times: &[f64], integ: &Integrator, mut observe: O) -> Result<Evolution, LindbladError>
where
    O: FnMut(f64, &DensityMatrix),
{
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(LindbladError::Register {
            got: rho0.dim(),
            expected: d,
        });
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(LindbladError::InvalidState("sample times must be ascending and non-negative".into()));
    }
    let full = rho0.matrix().as_slice();
    let nodes = gen.blocks().cover(full);
    let mut worst = StateDefects::default();
    let mut sink = |t: f64, m: DMatrix<C64>| {
        let st = DensityMatrix::new_unchecked(m);
        let df = st.defects();
        worst.trace_error = worst.trace_error.max(df.trace_error);
        worst.hermiticity = worst.hermiticity.max(df.hermiticity);
        worst.min_eigenvalue = worst.min_eigenvalue.min(df.min_eigenvalue);
        observe(t, &st);
        st
    };
    let mut states = Vec::new();
    let counts = if nodes.len() * 4 < d * d {
        let mut local = vec![u32::MAX; d * d];
        let l = gen.restricted(&nodes, &mut local);
        let mut y: Vec<C64> = nodes.iter().map(|&n| full[n]).collect();
        integrate(|v, o| l.apply(v, o), &mut y, times, integ, |_, t, v| {
            let mut m = DMatrix::zeros(d, d);
            let s = m.as_mut_slice();
            for (&n, &x) in nodes.iter().zip(v) {
                s[n] = x;
            }
            states.push(sink(t, m));
            Ok(())
        })?
    } else {
        let mut y = full.to_vec();
        integrate(|v, o| gen.apply_slice(v, o), &mut y, times, integ, |_, t, v| {
            states.push(sink(t, DMatrix::from_column_slice(d, d, v)));
            Ok(())
        })?
    };
    Ok(Evolution {
        times: times.to_vec(),
        states,
        steps: counts.accepted,
        rejected: counts.rejected,
        worst,
        active: nodes.len(),
    })
}

/// Evolves `rho0` (working basis) and keeps the state at every sample time.
pub fn evolve(gen: &Generator, rho0: &DensityMatrix, times: &[f64], integ: &Integrator) -> Result<Evolution, LindbladError> {
    evolve_observed(gen, rho0, times, integ, |_, _| {})
}

/// Null space of the generator, block by block.
#[derive(Clone, Debug)]
pub struct StationaryReport {
    pub null_dim: usize,
    /// Null vectors living in blocks that hold populations.
    pub population_null_dim: usize,
    pub blocks: usize,
    pub largest_block: usize,
    /// Orthonormal (Frobenius) null vectors as matrices, working basis.
    pub null_space: Vec<DMatrix<C64>>,
    /// Set when exactly one null vector carries population.
    pub state: Option<DensityMatrix>,
    /// `max |L(ρ)|` for the returned state.
    pub residual: f64,
}

impl StationaryReport {
    pub fn unique_state(&self) -> Result<&DensityMatrix, LindbladError> {
        match (&self.state, self.null_dim) {
            (Some(s), 1) => Ok(s),
            _ => Err(LindbladError::NotUnique {
                total: self.null_dim,
                populations: self.population_null_dim,
            }),
        }
    }
}

/// Null vectors of a dense block: right singular vectors whose singular
/// value is at most `thresh`.
fn block_null_space(m: DMatrix<C64>, thresh: f64) -> Vec<Vec<C64>> {
    let n = m.nrows();
    if n > 8 {
        // Column-pivoted QR is a cheaper screen for full rank.
        let r = m.clone().col_piv_qr().r();
        let min = (0..n).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if min > 1e3 * thresh {
            return Vec::new();
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thresh)
        .map(|(i, _)| vt.row(i).iter().map(|v| v.conj()).collect())
        .collect()
}

/// Stationary states of `gen` from the null space of each Liouville block.
pub fn stationary_state(gen: &Generator) -> Result<StationaryReport, LindbladError> {
    let d = gen.dim();
    let blocks = gen.blocks();
    if blocks.largest() > MAX_BLOCK {
        return Err(LindbladError::BlockTooLarge(blocks.largest()));
    }
    let scale = gen
        .h_eff
        .triplets()
        .map(|(_, _, v)| v.norm())
        .chain(gen.jumps.iter().flat_map(|c| c.triplets().map(|(_, _, v)| v.norm_sqr())))
        .fold(1.0, f64::max);
    let thresh = 1e-9 * scale;
    let found: Vec<(bool, Vec<(usize, Vec<C64>)>)> = (0..blocks.len())
        .into_par_iter()
        .map(|bi| {
            let nodes = blocks.block(bi);
            let mut local = vec![u32::MAX; d * d];
            let m = gen.restricted(nodes, &mut local).to_dense();
            let null = block_null_space(m, thresh);
            (blocks.has_population(bi), null.into_iter().map(|v| (bi, v)).collect())
        })
        .collect();
    let mut null_space = Vec::new();
    let mut population_vectors = Vec::new();
    for (pop, vs) in found {
        for (bi, v) in vs {
            let mut m = DMatrix::zeros(d, d);
            let s = m.as_mut_slice();
            for (&n, &x) in blocks.block(bi).iter().zip(&v) {
                s[n] = x;
            }
            if pop {
                population_vectors.push(m.clone());
            }
            null_space.push(m);
        }
    }
    let (state, residual) = if population_vectors.len() == 1 {
        let m = &population_vectors[0];
        // Dividing by the trace also removes the arbitrary phase.
        let tr = m.trace();
        if tr.norm() < 1e-12 {
            return Err(LindbladError::NoStationaryState);
        }
        let rho = m / tr;
        let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let residual = crate::linalg::max_abs(&gen.apply(&rho));
        (Some(DensityMatrix::new_unchecked(rho)), residual)
    } else {
        (None, f64::NAN)
    };
    Ok(StationaryReport {
        null_dim: null_space.len(),
        population_null_dim: population_vectors.len(),
        blocks: blocks.len(),
        largest_block: blocks.largest(),
        null_space,
        state,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusLattice;
    use crate::lindblad::{cooling_jump_set, excitation_density, thermal_jump_set};
    use crate::linalg;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn qubit_decay(gamma: f64, omega: f64) -> Generator {
        // H = (ω/2)σˣ, c = √(γ/2)|0⟩⟨1|.
        let h = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(omega / 2.0)), (1, 0, c(omega / 2.0))]);
        let j = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c((gamma / 2.0).sqrt()))]);
        Generator::from_parts(h, vec![j])
    }

    #[test]
    fn action_matches_kronecker_superoperator() {
        let g = qubit_decay(0.7, 1.3);
        let h = g.hamiltonian().to_dense();
        let cj = g.jumps()[0].to_dense();
        let id = DMatrix::<C64>::identity(2, 2);
        // vec(AXB) = (Bᵀ ⊗ A) vec(X).
        let heff = &h - cj.adjoint() * &cj * I;
        let want = (id.kronecker(&heff) * (-I)) + (heff.adjoint().transpose().kronecker(&id) * I) + cj.conjugate().kronecker(&cj) * c(2.0);
        assert!(linalg::max_abs(&(g.superoperator() - &want)) < 1e-14);
        let rho = DMatrix::from_row_slice(2, 2, &[c(0.3), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(0.7)]);
        let lr = g.apply(&rho);
        let v = &want * DMatrix::from_column_slice(4, 1, rho.as_slice());
        assert!(linalg::max_abs(&(DMatrix::from_column_slice(2, 2, v.as_slice()) - lr)) < 1e-14);
    }

    #[test]
    fn decay_matches_closed_form() {
        let gamma = 0.8;
        let g = qubit_decay(gamma, 0.0);
        let rho0 = DensityMatrix::pure(&[c(0.0), c(1.0)]).unwrap();
        let ev = evolve(&g, &rho0, &[0.5, 1.0, 2.0], &Integrator::default()).unwrap();
        for (t, s) in ev.times.iter().zip(&ev.states) {
            assert!((s.matrix()[(1, 1)].re - (-gamma * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn rk4_halving_and_rk45_agree() {
        let g = qubit_decay(0.5, 2.0);
        let rho0 = DensityMatrix::pure(&[c(0.6), C64::new(0.0, 0.8)]).unwrap();
        let run = |integ| evolve(&g, &rho0, &[3.0], &integ).unwrap().states[0].matrix().clone();
        let a = run(Integrator::Rk4 { dt: 0.01 });
        let b = run(Integrator::Rk4 { dt: 0.005 });
        let r = run(Integrator::default());
        assert!(linalg::max_abs(&(&a - &b)) < 1e-8);
        assert!(linalg::max_abs(&(&b - &r)) < 1e-9);
    }

    #[test]
    fn hamiltonian_only_conserves_energy() {
        let lat = TorusLattice::build(2).unwrap();
        let m = thermal_jump_set(&lat, 0.2, 0.0, 0.0, 4.0).unwrap();
        let g = Generator::for_model(&m).unwrap();
        assert!(g.jumps().is_empty());
        // Superposition of the ground state and an excited state.
        let mut psi = vec![c(0.0); 256];
        psi[0] = c(0.6);
        psi[37] = c(0.8);
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let e0 = rho0.expectation(g.hamiltonian());
        let ev = evolve(&g, &rho0, &[0.3, 1.7], &Integrator::default()).unwrap();
        for s in &ev.states {
            assert!((s.expectation(g.hamiltonian()) - e0).abs() < 1e-10);
        }
        assert!(ev.worst.within(1e-10));
    }

    #[test]
    fn cooling_pair_reaches_ground_space() {
        let lat = TorusLattice::build(2).unwrap();
        let m = cooling_jump_set(&lat, 1.0, 4.0).unwrap();
        let g = Generator::for_model(&m).unwrap();
        let nbar = g.observable(&excitation_density(&lat).unwrap()).unwrap();
        // Syndrome index 0b11: two charges.
        let mut psi = vec![c(0.0); 256];
        psi[0b11] = c(1.0);
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        assert!((rho0.expectation(&nbar) - 2.0 / 8.0).abs() < 1e-12);
        let mut last = f64::INFINITY;
        let ev = evolve_observed(&g, &rho0, &[1.0, 5.0, 20.0], &Integrator::default(), |_, s| {
            let n = s.expectation(&nbar);
            assert!(n <= last + 1e-12);
            last = n;
        })
        .unwrap();
        assert!(last < 1e-6);
        assert!(ev.worst.within(1e-9));
        assert!(ev.active < 1000);
    }

    #[test]
    fn thermal_stationary_state_is_gibbs_at_detailed_balance_temperature() {
        let lat = TorusLattice::build(2).unwrap();
        let m = thermal_jump_set(&lat, 0.2, 1.0, 1.0, 4.0).unwrap();
        let g = Generator::for_model(&m).unwrap();
        let rep = stationary_state(&g).unwrap();
        assert_eq!(rep.population_null_dim, 1);
        let st = rep.state.as_ref().unwrap();
        assert!(rep.residual < 1e-10);
        let t = m.detailed_balance_temperature().unwrap();
        let gibbs = DensityMatrix::thermal(&g.hamiltonian().to_dense(), t);
        assert!(st.trace_distance(&gibbs) < 1e-8);
        assert!(linalg::max_abs(&g.apply(gibbs.matrix())) < 1e-10);
    }

    #[test]
    fn zero_temperature_manifold_is_the_ground_space() {
        let lat = TorusLattice::build(2).unwrap();
        let thermal = Generator::for_model(&thermal_jump_set(&lat, 0.0, 1.0, 1.0, 4.0).unwrap()).unwrap();
        let cooling = Generator::for_model(&cooling_jump_set(&lat, 1.0, 4.0).unwrap()).unwrap();
        let (a, b) = (stationary_state(&thermal).unwrap(), stationary_state(&cooling).unwrap());
        for r in [&a, &b] {
            assert_eq!(r.null_dim, 16);
            assert_eq!(r.population_null_dim, 4);
            assert!(r.state.is_none());
        }
        // Same span: project one basis onto the other.
        let flat = |v: &DMatrix<C64>| v.as_slice().to_vec();
        for u in &a.null_space {
            let u = flat(u);
            let w: f64 = b.null_space.iter().map(|v| flat(v).iter().zip(&u).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()).sum();
            assert!((w - 1.0).abs() < 1e-10);
        }
    }
}
