//! Block diagonalization by lattice translations and global Z parity.
//!
//! A translation permutes links, so it maps computational basis states to
//! computational basis states. Each orbit `O_r` with representative `r`
//! (its smallest member) spans momentum states
//! `|r,k⟩ = |O_r|^{-1/2} Σ_{t∈O_r} χ_k(g_t) |t⟩`, `g_t · r = t`,
//! which exist when `χ_k` is trivial on the stabilizer of `r`. A
//! translation-invariant `H` then has
//! `⟨r',k|H|r,k⟩ = √(|O_r|/|O_r'|) Σ_{u∈O_r'} χ_k(g_u)^* ⟨u|H|r⟩`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rayon::prelude::*;

use super::krylov::{lowest_eigenpairs, SolverOptions, SpectrumResult};
use super::{SparseHamiltonian, SpectraError};
use crate::lattice::TorusLattice;
use crate::linalg::SparseMatrix;
use crate::pauli::PauliString;
use crate::C64;

const UNSET: u32 = u32::MAX;

fn permute_bits(s: u32, perm: &[usize]) -> u32 {
    let mut out = 0u32;
    let mut rest = s;
    while rest != 0 {
        let q = rest.trailing_zeros() as usize;
        out |= 1 << perm[q];
        rest &= rest - 1;
    }
    out
}

/// Orbit data for every basis state under the translation group.
pub struct TranslationSectors {
    l: usize,
    n: usize,
    /// Split by `Π_j σᶻ_j` as well.
    use_parity: bool,
    rep: Vec<u32>,
    /// Group element `(a,b)` encoded `a·L + b` with `shift·rep = state`.
    shift: Vec<u8>,
    orbit: Vec<u8>,
    /// Stabilizer bitmask, stored at representatives.
    stab: Vec<u32>,
}

/// One symmetry block of a Hamiltonian.
pub struct Sector {
    pub momentum: (usize, usize),
    /// `Some(odd)` when split by Z parity.
    pub parity: Option<bool>,
    reps: Vec<u32>,
    pub matrix: SparseMatrix,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn label(&self) -> String {
        let p = match self.parity {
            None => "",
            Some(false) => " P=+",
            Some(true) => " P=-",
        };
        format!("k=({},{}){p}", self.momentum.0, self.momentum.1)
    }
}

impl TranslationSectors {
    /// Fails unless `h` is invariant under unit translations of `lat`.
    pub fn new(lat: &TorusLattice, h: &SparseHamiltonian) -> Result<Self, SpectraError> {
        let n = lat.n_links();
        if h.n_qubits() != n {
            return Err(crate::pauli::PauliError::SizeMismatch(n, h.n_qubits()).into());
        }
        let terms: BTreeMap<PauliString, f64> = h.terms().iter().map(|(c, p)| (*p, *c)).collect();
        for gen in [lat.translation(1, 0), lat.translation(0, 1)] {
            for (p, c) in &terms {
                let img = p.permuted(&gen)?;
                let matches = terms.get(&img).is_some_and(|d| (d - c).abs() <= 1e-14 * c.abs().max(1.0));
                if !matches {
                    return Err(SpectraError::NotSymmetric(p.to_string()));
                }
            }
        }
        let use_parity = terms.keys().all(|p| p.x_mask().count_ones() % 2 == 0);
        let l = lat.size();
        let g_count = l * l;
        let perms: Vec<Vec<usize>> = (0..g_count).map(|g| lat.translation(g / l, g % l)).collect();
        let dim = 1usize << n;
        let mut rep = vec![UNSET; dim];
        let mut shift = vec![0u8; dim];
        let mut orbit = vec![0u8; dim];
        let mut stab = vec![0u32; dim];
        let mut imgs = vec![0u32; g_count];
        for s in 0..dim as u32 {
            if rep[s as usize] != UNSET {
                continue;
            }
            for (g, p) in perms.iter().enumerate() {
                imgs[g] = permute_bits(s, p);
            }
            let r = *imgs.iter().min().expect("nonempty group");
            let gr = imgs.iter().position(|&t| t == r).expect("present");
            let st: u32 = imgs.iter().enumerate().filter(|(_, &t)| t == s).map(|(g, _)| 1u32 << g).sum();
            let size = (g_count / st.count_ones() as usize) as u8;
            for (g, &t) in imgs.iter().enumerate() {
                let a = (g / l + l - gr / l) % l;
                let b = (g % l + l - gr % l) % l;
                rep[t as usize] = r;
                shift[t as usize] = (a * l + b) as u8;
                orbit[t as usize] = size;
            }
            stab[r as usize] = st;
        }
        Ok(Self {
            l,
            n,
            use_parity,
            rep,
            shift,
            orbit,
            stab,
        })
    }

    fn character(&self, k: (usize, usize), g: u8) -> C64 {
        let (a, b) = (g as usize / self.l, g as usize % self.l);
        let m = (k.0 * a + k.1 * b) % self.l;
        C64::from_polar(1.0, TAU * m as f64 / self.l as f64)
    }

    fn compatible(&self, r: u32, k: (usize, usize)) -> bool {
        let st = self.stab[r as usize];
        (0..self.l * self.l).filter(|g| st >> g & 1 == 1).all(|g| (k.0 * (g / self.l) + k.1 * (g % self.l)) % self.l == 0)
    }

    /// Every (momentum, parity) label.
    pub fn labels(&self) -> Vec<((usize, usize), Option<bool>)> {
        let parities: Vec<Option<bool>> = if self.use_parity { vec![Some(false), Some(true)] } else { vec![None] };
        let mut out = Vec::new();
        for kr in 0..self.l {
            for kc in 0..self.l {
                for &p in &parities {
                    out.push(((kr, kc), p));
                }
            }
        }
        out
    }

    pub fn sector(&self, h: &SparseHamiltonian, momentum: (usize, usize), parity: Option<bool>) -> Sector {
        let dim = 1usize << self.n;
        let reps: Vec<u32> = (0..dim as u32)
            .filter(|&s| {
                self.rep[s as usize] == s
                    && parity.is_none_or(|odd| (s.count_ones() % 2 == 1) == odd)
                    && self.compatible(s, momentum)
            })
            .collect();
        let mut index = vec![UNSET; dim];
        for (i, &r) in reps.iter().enumerate() {
            index[r as usize] = i as u32;
        }
        let triplets: Vec<(usize, usize, C64)> = reps
            .par_iter()
            .enumerate()
            .flat_map_iter(|(col, &r)| {
                let index = &index;
                h.terms().iter().filter_map(move |(c, p)| {
                    let (t, amp) = p.column(r as u64);
                    let t = t as usize;
                    let row = index[self.rep[t] as usize];
                    if row == UNSET {
                        return None;
                    }
                    let norm = (self.orbit[r as usize] as f64 / self.orbit[t] as f64).sqrt();
                    let v = amp * *c * self.character(momentum, self.shift[t]).conj() * norm;
                    Some((row as usize, col, v))
                })
            })
            .collect();
        let n = reps.len();
        Sector {
            momentum,
            parity,
            reps,
            matrix: SparseMatrix::from_triplets(n, n, triplets),
        }
    }

    /// Full-register vector of a sector state.
    pub fn embed(&self, sector: &Sector, v: &[C64]) -> Vec<C64> {
        let dim = 1usize << self.n;
        let mut index = BTreeMap::new();
        for (i, &r) in sector.reps.iter().enumerate() {
            index.insert(r, i);
        }
        (0..dim)
            .map(|t| match index.get(&self.rep[t]) {
                Some(&i) if sector.parity.is_none_or(|odd| (t.count_ones() % 2 == 1) == odd) => {
                    v[i] * self.character(sector.momentum, self.shift[t]) / (self.orbit[t] as f64).sqrt()
                }
                _ => C64::new(0.0, 0.0),
            })
            .collect()
    }
}

/// The `k` lowest eigenpairs of a translation-invariant `h`, solved sector
/// by sector and merged. Eigenvectors are returned in the full register.
pub fn lowest_eigenpairs_by_sector(lat: &TorusLattice, h: &SparseHamiltonian, k: usize, opts: &SolverOptions) -> Result<SpectrumResult, SpectraError> {
    let sym = TranslationSectors::new(lat, h)?;
    if k == 0 || k > h.dim() {
        return Err(SpectraError::BadCount { k, dim: h.dim() });
    }
    let solved = sym
        .labels()
        .into_par_iter()
        .map(|(m, p)| {
            let sector = sym.sector(h, m, p);
            if sector.dim() == 0 {
                return Ok(None);
            }
            let r = lowest_eigenpairs(&sector.matrix, k.min(sector.dim()), opts)?;
            Ok(Some((sector, r)))
        })
        .collect::<Result<Vec<_>, SpectraError>>()?;
    let mut all: Vec<(f64, f64, usize, usize)> = Vec::new();
    let mut matvecs = 0;
    for (si, entry) in solved.iter().enumerate() {
        if let Some((_, r)) = entry {
            matvecs += r.matvecs;
            for i in 0..r.eigenvalues.len() {
                all.push((r.eigenvalues[i], r.residuals[i], si, i));
            }
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(k);
    let mut out = SpectrumResult {
        eigenvalues: Vec::with_capacity(k),
        eigenvectors: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        matvecs,
        sectors: Vec::with_capacity(k),
    };
    for (e, res, si, i) in all {
        let (sector, r) = solved[si].as_ref().expect("solved sector");
        out.eigenvalues.push(e);
        out.residuals.push(res);
        out.eigenvectors.push(sym.embed(sector, &r.eigenvectors[i]));
        out.sectors.push(Some(sector.label()));
    }
    Ok(out)
}
