//! Thick-restart block Krylov eigensolver for the low end of a Hermitian
//! operator, with full Gram–Schmidt reorthogonalization.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SpectraError;
use crate::linalg::{self, SparseMatrix};
use crate::C64;

const CHUNK: usize = 4096;

/// A Hermitian operator known only through its action.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    /// `out = A v`.
    fn apply(&self, v: &[C64], out: &mut [C64]);
}

impl HermitianOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }
    fn apply(&self, v: &[C64], out: &mut [C64]) {
        SparseMatrix::apply(self, v, out)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Block size; at least 5 so a four-fold manifold converges together.
    pub block: usize,
    /// Largest basis before a thick restart.
    pub max_basis: usize,
    /// Bound on `‖Av − λv‖` for every reported pair.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Dimensions at or below this are diagonalized densely.
    pub dense_cutoff: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            block: 8,
            max_basis: 64,
            tol: 1e-8,
            max_restarts: 400,
            seed: 0x5eed,
            dense_cutoff: 1024,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    /// Symmetry sector of each pair, when the solve was block-diagonalized.
    pub sectors: Vec<Option<String>>,
}

pub const SPECTRUM_CSV_HEADER: &str = "chi,h_z,index,eigenvalue,residual\n";

impl SpectrumResult {
    /// Rows for the spectrum CSV schema.
    pub fn csv_rows(&self, chi: f64, h_z: f64) -> String {
        let mut out = String::new();
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            let _ = writeln!(out, "{chi},{h_z},{i},{e:.12},{r:.3e}");
        }
        out
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    // Chunk partial sums are combined in a fixed order so results do not
    // depend on thread scheduling.
    let parts: Vec<C64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum())
        .collect();
    parts.into_iter().sum()
}

pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(ys, xs)| {
        ys.iter_mut().zip(xs).for_each(|(y, x)| *y += alpha * x);
    });
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    dot(a, a).re.sqrt()
}

/// `Σ_j coeffs[j] · vs[j]`.
pub(crate) fn combine(vs: &[Vec<C64>], coeffs: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); vs[0].len()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let base = ci * CHUNK;
        for (v, &c) in vs.iter().zip(coeffs) {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            chunk.iter_mut().zip(&v[base..]).for_each(|(o, x)| *o += c * x);
        }
    });
    out
}

/// `V† x` in one pass over `x`.
fn project(vs: &[Vec<C64>], x: &[C64]) -> Vec<C64> {
    let m = vs.len();
    let parts: Vec<Vec<C64>> = x
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, xs)| {
            let base = ci * CHUNK;
            vs.iter()
                .map(|v| v[base..base + xs.len()].iter().zip(xs).map(|(a, b)| a.conj() * b).sum())
                .collect()
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); m];
    for p in parts {
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    out
}

/// `x −= V c` in one pass over `x`.
fn subtract(vs: &[Vec<C64>], c: &[C64], x: &mut [C64]) {
    x.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, xs)| {
        let base = ci * CHUNK;
        for (v, &cj) in vs.iter().zip(c) {
            xs.iter_mut().zip(&v[base..]).for_each(|(o, a)| *o -= cj * a);
        }
    });
}

pub(crate) fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

struct Basis<'a, O: HermitianOperator + ?Sized> {
    op: &'a O,
    v: Vec<Vec<C64>>,
    w: Vec<Vec<C64>>,
    t: DMatrix<C64>,
    matvecs: usize,
}

impl<O: HermitianOperator + ?Sized> Basis<'_, O> {
    /// Orthogonalize `x` against the basis twice and append it, unless it
    /// is numerically dependent. Returns whether it was added.
    fn push(&mut self, mut x: Vec<C64>) -> bool {
        let before = norm(&x);
        if before == 0.0 {
            return false;
        }
        for _ in 0..2 {
            let c = project(&self.v, &x);
            subtract(&self.v, &c, &mut x);
        }
        let after = norm(&x);
        if after < 1e-10 * before {
            return false;
        }
        let s = C64::new(1.0 / after, 0.0);
        x.par_iter_mut().for_each(|e| *e *= s);
        let mut hx = vec![C64::new(0.0, 0.0); x.len()];
        self.op.apply(&x, &mut hx);
        self.matvecs += 1;
        let m = self.v.len();
        for (i, c) in project(&self.v, &hx).into_iter().enumerate() {
            self.t[(i, m)] = c;
            self.t[(m, i)] = c.conj();
        }
        self.t[(m, m)] = C64::new(dot(&x, &hx).re, 0.0);
        self.v.push(x);
        self.w.push(hx);
        true
    }
}

/// The `k` lowest eigenpairs of `op`.
pub fn lowest_eigenpairs<O: HermitianOperator + ?Sized>(op: &O, k: usize, opts: &SolverOptions) -> Result<SpectrumResult, SpectraError> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(SpectraError::BadCount { k, dim });
    }
    if dim <= opts.dense_cutoff.max(2 * opts.max_basis) {
        return dense_eigenpairs(op, k);
    }
    let b = opts.block.max(1);
    let keep = (k + b).max(opts.max_basis / 2).min(opts.max_basis.saturating_sub(b)).max(k);
    let max_basis = opts.max_basis.max(keep + b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis {
        op,
        v: Vec::with_capacity(max_basis),
        w: Vec::with_capacity(max_basis),
        t: DMatrix::zeros(max_basis, max_basis),
        matvecs: 0,
    };
    let mut frontier: Vec<Vec<C64>> = (0..b).map(|_| random_vector(&mut rng, dim)).collect();
    let mut residuals = vec![f64::INFINITY; k];
    for restart in 0..=opts.max_restarts {
        // Expand block by block; the next candidates are A applied to the
        // vectors just added.
        while basis.v.len() + b <= max_basis {
            let start = basis.v.len();
            let mut added = 0;
            for x in frontier.drain(..) {
                added += usize::from(basis.push(x));
            }
            while added == 0 {
                added += usize::from(basis.push(random_vector(&mut rng, dim)));
            }
            frontier = basis.w[start..].to_vec();
        }
        let m = basis.v.len();
        let (theta, y) = linalg::eigh(&basis.t.view((0, 0), (m, m)).into_owned());
        let n_ritz = keep.min(m);
        let coeffs: Vec<Vec<C64>> = (0..n_ritz).map(|i| y.column(i).iter().copied().collect()).collect();
        let ritz: Vec<Vec<C64>> = coeffs.iter().map(|c| combine(&basis.v, c)).collect();
        let hritz: Vec<Vec<C64>> = coeffs.iter().map(|c| combine(&basis.w, c)).collect();
        let resid: Vec<Vec<C64>> = (0..n_ritz)
            .map(|i| {
                let mut r = hritz[i].clone();
                axpy(C64::new(-theta[i], 0.0), &ritz[i], &mut r);
                r
            })
            .collect();
        let all_res: Vec<f64> = resid.iter().map(|r| norm(r)).collect();
        residuals = all_res[..k].to_vec();
        if residuals.iter().all(|&r| r <= opts.tol) {
            return Ok(SpectrumResult {
                eigenvalues: theta[..k].to_vec(),
                eigenvectors: ritz[..k].to_vec(),
                residuals,
                matvecs: basis.matvecs,
                sectors: vec![None; k],
            });
        }
        if restart == opts.max_restarts {
            break;
        }
        basis.v = ritz;
        basis.w = hritz;
        basis.t.fill(C64::new(0.0, 0.0));
        for i in 0..n_ritz {
            basis.t[(i, i)] = C64::new(theta[i], 0.0);
        }
        // Residuals of the lowest unconverged pairs seed the next block.
        frontier = (0..n_ritz).filter(|&i| all_res[i] > opts.tol).take(b).map(|i| resid[i].clone()).collect();
    }
    Err(SpectraError::NoConvergence {
        restarts: opts.max_restarts,
        residuals,
    })
}

/// Dense matrix of `op`, column by column.
pub fn to_dense<O: HermitianOperator + ?Sized>(op: &O) -> DMatrix<C64> {
    let dim = op.dim();
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![C64::new(0.0, 0.0); dim];
    let mut col = vec![C64::new(0.0, 0.0); dim];
    for j in 0..dim {
        e[j] = C64::new(1.0, 0.0);
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

fn dense_eigenpairs<O: HermitianOperator + ?Sized>(op: &O, k: usize) -> Result<SpectrumResult, SpectraError> {
    let (vals, vecs) = linalg::eigh(&to_dense(op));
    let eigenvectors: Vec<Vec<C64>> = (0..k).map(|i| vecs.column(i).iter().copied().collect()).collect();
    let mut hv = vec![C64::new(0.0, 0.0); op.dim()];
    let residuals = eigenvectors
        .iter()
        .zip(&vals)
        .map(|(v, &e)| {
            op.apply(v, &mut hv);
            axpy(C64::new(-e, 0.0), v, &mut hv);
            norm(&hv)
        })
        .collect();
    Ok(SpectrumResult {
        eigenvalues: vals[..k].to_vec(),
        eigenvectors,
        residuals,
        matvecs: 0,
        sectors: vec![None; k],
    })
}
