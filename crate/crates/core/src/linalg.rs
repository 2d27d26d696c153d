//! Dense and sparse complex linear algebra used across the crate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::pauli::{PauliError, PauliSum};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("eigenphase {phase} lies within {tol} of the principal-log branch cut at ±π")]
    BranchCut { phase: f64, tol: f64 },
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("least-squares fit needs at least {need} usable points, got {got}")]
    Underdetermined { need: usize, got: usize },
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

pub fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - DMatrix::identity(n, n)))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `exp(−i·h·t)` for Hermitian `h`.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let (vals, vecs) = eigh(h);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&l| C64::from_polar(1.0, -l * t)));
    &vecs * DMatrix::from_diagonal(&d) * vecs.adjoint()
}

/// Eigenphases and eigenvectors of a unitary matrix, via complex Schur.
///
/// For a normal matrix the Schur form is diagonal, so `Q` holds a complete
/// orthonormal eigenbasis.
pub fn unitary_eigen(u: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let (q, t) = u.clone().schur().unpack();
    let phases = (0..t.nrows()).map(|k| t[(k, k)].arg()).collect();
    (phases, q)
}

/// Principal logarithm of a unitary matrix.
///
/// Fails, rather than wrapping, when an eigenphase lies within `branch_tol`
/// of ±π.
pub fn unitary_log(u: &DMatrix<C64>, branch_tol: f64) -> Result<DMatrix<C64>, LinalgError> {
    let defect = unitarity_defect(u);
    if defect > 1e-8 {
        return Err(LinalgError::NotUnitary(defect));
    }
    let (phases, q) = unitary_eigen(u);
    if let Some(&phase) = phases
        .iter()
        .find(|p| std::f64::consts::PI - p.abs() < branch_tol)
    {
        return Err(LinalgError::BranchCut { phase, tol: branch_tol });
    }
    let d = DVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::new(0.0, p)));
    Ok(&q * DMatrix::from_diagonal(&d) * q.adjoint())
}

pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let (vals, _) = eigh(&(a - b));
    0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &DMatrix<C64>) -> f64 {
    let (vals, _) = eigh(rho);
    vals.iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.ln())
        .sum()
}

/// Compressed sparse row matrix with complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Duplicates are summed and exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune(0.0);
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, Vec::new())
    }

    pub fn from_dense(m: &DMatrix<C64>, tol: f64) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > tol {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn from_pauli_sum(s: &PauliSum) -> Self {
        let d = 1usize << s.n_qubits();
        let mut t = Vec::with_capacity(d * s.len());
        for (p, c) in s.iter() {
            for j in 0..d as u64 {
                let (r, a) = p.column(j);
                t.push((r as usize, j as usize, c * a));
            }
        }
        Self::from_triplets(d, d, t)
    }

    pub(crate) fn prune(&mut self, tol: f64) {
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k].norm() > tol {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_else(czero)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.cols,
            self.rows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_triplets(self.rows, self.cols, self.triplets().chain(other.triplets()).collect())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut t = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, other.cols, t)
    }

    /// `out = self · v`.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let mut acc = czero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * v[self.indices[k]];
            }
            *o = acc;
        }
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![czero(); self.rows];
        self.apply(v, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// At most one nonzero per column and per row.
    pub fn is_monomial(&self) -> bool {
        let mut seen = vec![false; self.cols];
        for r in 0..self.rows {
            if self.indptr[r + 1] - self.indptr[r] > 1 {
                return false;
            }
            for (c, _) in self.row(r) {
                if seen[c] {
                    return false;
                }
                seen[c] = true;
            }
        }
        true
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    /// `⟨v| self |v⟩`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mut acc = czero();
        for (r, vr) in v.iter().enumerate().take(self.rows) {
            for (c, a) in self.row(r) {
                acc += vr.conj() * a * v[c];
            }
        }
        acc
    }
}

/// Weighted least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Weighted RMS residual.
    pub rms_residual: f64,
    pub points: usize,
}

pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit, LinalgError> {
    let used: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
    if used.len() < 2 {
        return Err(LinalgError::Underdetermined {
            need: 2,
            got: used.len(),
        });
    }
    let sw: f64 = used.iter().map(|&i| w[i]).sum();
    let mx = used.iter().map(|&i| w[i] * x[i]).sum::<f64>() / sw;
    let my = used.iter().map(|&i| w[i] * y[i]).sum::<f64>() / sw;
    let sxx: f64 = used.iter().map(|&i| w[i] * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|&i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = used
        .iter()
        .map(|&i| w[i] * (y[i] - slope * x[i] - intercept).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss / sw).sqrt(),
        points: used.len(),
    })
}

/// Ordinary least squares `y ≈ X·β` with an intercept column prepended.
/// Returns `(β, rms residual)`, `β[0]` being the intercept.
pub fn multi_linear_fit(x: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64), LinalgError> {
    let m = y.len();
    let k = x.first().map_or(0, |r| r.len()) + 1;
    if m < k {
        return Err(LinalgError::Underdetermined { need: k, got: m });
    }
    let a = DMatrix::from_fn(m, k, |r, c| if c == 0 { 1.0 } else { x[r][c - 1] });
    let b = DVector::from_column_slice(y);
    let beta = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * &b))
        .ok_or(LinalgError::Underdetermined { need: k, got: m })?;
    let r = &a * &beta - &b;
    Ok((beta.iter().copied().collect(), (r.norm_squared() / m as f64).sqrt()))
}

/// Spearman rank correlation (no tie handling beyond average order).
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_inverts_exp() {
        let h = DMatrix::from_row_slice(2, 2, &[
            C64::new(0.3, 0.0),
            C64::new(0.1, -0.2),
            C64::new(0.1, 0.2),
            C64::new(-0.5, 0.0),
        ]);
        let u = expm_hermitian(&h, 1.0);
        let l = unitary_log(&u, 1e-6).unwrap();
        assert!(max_abs(&(l * C64::new(0.0, 1.0) - &h)) < 1e-13);
    }

    #[test]
    fn branch_cut_is_reported() {
        let u = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]));
        assert!(matches!(unitary_log(&u, 1e-6), Err(LinalgError::BranchCut { .. })));
    }

    #[test]
    fn sparse_round_trip_and_products() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, C64::new(1.0, 1.0)), (1, 0, C64::new(2.0, 0.0)), (0, 1, C64::new(1.0, 0.0))]);
        assert_eq!(a.get(0, 1), C64::new(2.0, 1.0));
        let d = a.to_dense();
        assert_eq!(a.matmul(&a.adjoint()).to_dense(), &d * d.adjoint());
        assert!(a.is_monomial());
        assert!(!a.is_diagonal());
    }

    #[test]
    fn line_fit_recovers_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = weighted_line_fit(&x, &y, &[1.0; 4]).unwrap();
        assert_relative_eq!(f.slope, 2.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, -1.0, epsilon = 1e-12);
        assert!(weighted_line_fit(&x, &y, &[1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn rank_correlation_of_monotone_data() {
        assert_relative_eq!(rank_correlation(&[1.0, 2.0, 3.0], &[5.0, 3.0, 1.0]), -1.0);
    }
}
