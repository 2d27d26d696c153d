//! Pauli strings in symplectic bit form and sums of them.
//!
//! A [`PauliString`] on `n` qubits stores one X bit and one Z bit per qubit
//! together with a global factor `i^phase`. The letters are read as
//! `(x, z) = (0,0) -> I`, `(1,0) -> X`, `(1,1) -> Y`, `(0,1) -> Z`, so a
//! string with phase 0 is always Hermitian.
//!
//! Qubit 0 is the least-significant bit of a computational-basis index. In
//! text form the leftmost letter is qubit 0, which is also the first spin of
//! a vertex or plaquette neighborhood.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

/// Largest register a [`PauliString`] can describe.
pub const MAX_QUBITS: usize = 64;
/// Default limit on the number of qubits a dense matrix may be built for.
pub const DEFAULT_DENSE_CAP: usize = 12;
/// Coefficients of a [`PauliSum`] at or below this magnitude are dropped.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PauliError {
    #[error("qubit count mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("{0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("dense form of {n} qubits exceeds the cap of {cap}")]
    DenseCap { n: usize, cap: usize },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("qubit {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("cannot parse Pauli string {0:?}")]
    Parse(String),
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// X -> Y -> Z -> X, identity fixed.
    pub fn cycled(self) -> Self {
        match self {
            Pauli::I => Pauli::I,
            Pauli::X => Pauli::Y,
            Pauli::Y => Pauli::Z,
            Pauli::Z => Pauli::X,
        }
    }
}

/// `i^k` for `k` taken mod 4.
pub fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

fn mask_for(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

/// An n-qubit Pauli operator `i^phase · σ_0 ⊗ … ⊗ σ_{n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self, PauliError> {
        Self::from_masks(n, 0, 0, 0)
    }

    pub fn from_masks(n: usize, x: u64, z: u64, phase: u32) -> Result<Self, PauliError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        let m = mask_for(n);
        Ok(Self {
            n,
            x: x & m,
            z: z & m,
            phase: (phase % 4) as u8,
        })
    }

    /// Product of single-qubit letters placed on the given qubits.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli)]) -> Result<Self, PauliError> {
        let mut s = Self::identity(n)?;
        for &(q, p) in ops {
            if q >= n {
                return Err(PauliError::QubitOutOfRange { index: q, n });
            }
            s = s.multiply(&Self::single(n, q, p)?)?;
        }
        Ok(s)
    }

    pub fn single(n: usize, q: usize, p: Pauli) -> Result<Self, PauliError> {
        if q >= n {
            return Err(PauliError::QubitOutOfRange { index: q, n });
        }
        let (xb, zb) = p.bits();
        Self::from_masks(n, (xb as u64) << q, (zb as u64) << q, 0)
    }

    /// Same letter on every listed qubit, e.g. a vertex stabilizer.
    pub fn uniform(n: usize, qubits: &[usize], p: Pauli) -> Result<Self, PauliError> {
        let ops: Vec<_> = qubits.iter().map(|&q| (q, p)).collect();
        Self::from_sparse(n, &ops)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }
    pub fn x_mask(&self) -> u64 {
        self.x
    }
    pub fn z_mask(&self) -> u64 {
        self.z
    }
    pub fn phase_quarter(&self) -> u32 {
        self.phase as u32
    }

    pub fn letter(&self, q: usize) -> Pauli {
        Pauli::from_bits((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1)
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| (self.x | self.z) >> q & 1 == 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0 && self.phase == 0
    }

    /// Same letters with the global phase dropped.
    pub fn unsigned(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    pub fn with_phase(&self, phase: u32) -> Self {
        Self {
            phase: (phase % 4) as u8,
            ..*self
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Symplectic form: true when the two strings commute.
    pub fn commutes_with(&self, other: &Self) -> bool {
        !parity((self.x & other.z) ^ (self.z & other.x))
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, PauliError> {
        if self.n != other.n {
            return Err(PauliError::SizeMismatch(self.n, other.n));
        }
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // Convert both factors to i^k X^x Z^z, move Z^za past X^xb, convert back.
        let k = self.phase as u32
            + other.phase as u32
            + self.y_count()
            + other.y_count()
            + 2 * (self.z & other.x).count_ones()
            + 4 * 64
            - (x & z).count_ones();
        Ok(Self {
            n: self.n,
            x,
            z,
            phase: (k % 4) as u8,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            phase: ((4 - self.phase as u32) % 4) as u8,
            ..*self
        }
    }

    /// Apply the X -> Y -> Z -> X letter map to every qubit.
    pub fn cycled(&self) -> Self {
        let mut x = 0;
        let mut z = 0;
        for q in 0..self.n {
            let (xb, zb) = self.letter(q).cycled().bits();
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
        }
        Self { x, z, ..*self }
    }

    /// Relabel qubits: qubit `q` moves to `map[q]`.
    pub fn permuted(&self, map: &[usize]) -> Result<Self, PauliError> {
        if map.len() != self.n {
            return Err(PauliError::SizeMismatch(map.len(), self.n));
        }
        let mut x = 0;
        let mut z = 0;
        for (q, &t) in map.iter().enumerate() {
            if t >= self.n {
                return Err(PauliError::QubitOutOfRange { index: t, n: self.n });
            }
            x |= ((self.x >> q) & 1) << t;
            z |= ((self.z >> q) & 1) << t;
        }
        Ok(Self { x, z, ..*self })
    }

    /// Embed into a larger register, qubit `q` going to `offset + q`.
    pub fn embedded(&self, n: usize, offset: usize) -> Result<Self, PauliError> {
        if offset + self.n > n {
            return Err(PauliError::QubitOutOfRange {
                index: offset + self.n - 1,
                n,
            });
        }
        Self::from_masks(n, self.x << offset, self.z << offset, self.phase as u32)
    }

    /// Column action: `P|j⟩ = amp · |row⟩`.
    #[inline]
    pub fn column(&self, j: u64) -> (u64, C64) {
        let k = self.phase as u32 + self.y_count() + 2 * ((self.z & j).count_ones() & 1);
        (j ^ self.x, i_pow(k))
    }

    fn check_dim(&self, len: usize) -> Result<(), PauliError> {
        let expected = 1usize
            .checked_shl(self.n as u32)
            .ok_or(PauliError::TooManyQubits(self.n))?;
        if len != expected {
            return Err(PauliError::DimensionMismatch { got: len, expected });
        }
        Ok(())
    }

    /// Accumulate `coeff · P · input` into `out`.
    pub fn apply_add(&self, coeff: C64, input: &[C64], out: &mut [C64]) -> Result<(), PauliError> {
        self.check_dim(input.len())?;
        self.check_dim(out.len())?;
        let base = coeff * i_pow(self.phase as u32 + self.y_count());
        let neg = -base;
        for (j, &v) in input.iter().enumerate() {
            let f = if parity(self.z & j as u64) { neg } else { base };
            out[j ^ self.x as usize] += f * v;
        }
        Ok(())
    }

    pub fn apply_to_state(&self, input: &[C64]) -> Result<Vec<C64>, PauliError> {
        let mut out = vec![C64::new(0.0, 0.0); input.len()];
        self.apply_add(C64::new(1.0, 0.0), input, &mut out)?;
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>, PauliError> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<C64>, PauliError> {
        if self.n > cap {
            return Err(PauliError::DenseCap { n: self.n, cap });
        }
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d as u64 {
            let (r, a) = self.column(j);
            m[(r as usize, j as usize)] = a;
        }
        Ok(m)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["+", "+i", "-", "-i"][self.phase as usize];
        f.write_str(prefix)?;
        for q in 0..self.n {
            write!(f, "{}", self.letter(q).letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    /// Accepts `[+|-][i]LETTERS`, e.g. `ZYII`, `-iIXYI`, `+XXXX`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PauliError::Parse(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace() && *c != '·').collect();
        let mut rest = t.as_str();
        let mut phase = 0u32;
        if let Some(r) = rest.strip_prefix('-') {
            phase = 2;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        }
        if let Some(r) = rest.strip_prefix('i') {
            phase += 1;
            rest = r;
        }
        let n = rest.chars().count();
        if n == 0 {
            return Err(err());
        }
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, c) in rest.chars().enumerate() {
            let p = match c {
                'I' | '0' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(err()),
            };
            let (xb, zb) = p.bits();
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
        }
        Self::from_masks(n, x, z, phase)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `ab − ba`, empty when the strings commute.
pub fn commutator(a: &PauliString, b: &PauliString) -> Result<PauliSum, PauliError> {
    let ab = a.multiply(b)?;
    let mut out = PauliSum::new(a.n_qubits());
    if !a.commutes_with(b) {
        out.add_term(&ab, C64::new(2.0, 0.0))?;
    }
    Ok(out)
}

/// Linear combination of phase-normalized Pauli strings.
///
/// Keys are the `(x, z)` masks; any phase carried by an inserted string is
/// folded into its coefficient. Coefficients with magnitude at or below the
/// pruning tolerance are removed after every operation.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: BTreeMap<(u64, u64), C64>,
    tol: f64,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        Self::with_tolerance(n, DEFAULT_PRUNE_TOL)
    }

    pub fn with_tolerance(n: usize, tol: f64) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
            tol,
        }
    }

    pub fn from_terms<'a, I>(n: usize, terms: I) -> Result<Self, PauliError>
    where
        I: IntoIterator<Item = (&'a PauliString, C64)>,
    {
        let mut s = Self::new(n);
        for (p, c) in terms {
            s.add_term(p, c)?;
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }
    pub fn tolerance(&self) -> f64 {
        self.tol
    }
    pub fn set_tolerance(&mut self, tol: f64) {
        self.tol = tol;
        self.prune();
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, p: &PauliString, c: C64) -> Result<(), PauliError> {
        if p.n_qubits() != self.n {
            return Err(PauliError::SizeMismatch(p.n_qubits(), self.n));
        }
        let key = (p.x_mask(), p.z_mask());
        let v = c * i_pow(p.phase_quarter());
        let e = self.terms.entry(key).or_insert(C64::new(0.0, 0.0));
        *e += v;
        if e.norm() <= self.tol {
            self.terms.remove(&key);
        }
        Ok(())
    }

    pub fn add_real(&mut self, p: &PauliString, c: f64) -> Result<(), PauliError> {
        self.add_term(p, C64::new(c, 0.0))
    }

    /// Coefficient `c` such that the sum contains `c · p`.
    pub fn coefficient(&self, p: &PauliString) -> C64 {
        self.terms
            .get(&(p.x_mask(), p.z_mask()))
            .map(|&c| c / i_pow(p.phase_quarter()))
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Terms as (phase-0 string, coefficient), in mask order.
    pub fn iter(&self) -> impl Iterator<Item = (PauliString, C64)> + '_ {
        let n = self.n;
        self.terms.iter().map(move |(&(x, z), &c)| {
            (
                PauliString {
                    n,
                    x,
                    z,
                    phase: 0,
                },
                c,
            )
        })
    }

    pub fn prune(&mut self) {
        let tol = self.tol;
        self.terms.retain(|_, c| c.norm() > tol);
    }

    fn check(&self, other: &Self) -> Result<(), PauliError> {
        if self.n != other.n {
            Err(PauliError::SizeMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, PauliError> {
        self.check(other)?;
        let mut out = self.clone();
        for (p, c) in other.iter() {
            out.add_term(&p, c)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PauliError> {
        self.check(other)?;
        let mut out = self.clone();
        for (p, c) in other.iter() {
            out.add_term(&p, -c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.prune();
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, PauliError> {
        self.check(other)?;
        let mut out = Self::with_tolerance(self.n, self.tol.min(other.tol));
        for (a, ca) in self.iter() {
            for (b, cb) in other.iter() {
                out.add_term(&a.multiply(&b)?, ca * cb)?;
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, PauliError> {
        self.check(other)?;
        let mut out = Self::with_tolerance(self.n, self.tol.min(other.tol));
        for (a, ca) in self.iter() {
            for (b, cb) in other.iter() {
                if !a.commutes_with(&b) {
                    out.add_term(&a.multiply(&b)?, ca * cb * 2.0)?;
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    /// True when every coefficient is real to within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// (S + S†)/2.
    pub fn hermitian_part(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = C64::new(c.re, 0.0);
        }
        out.prune();
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn norm2(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Drop terms whose strings appear in `keys`.
    pub fn without(&self, keys: &[PauliString]) -> Self {
        let mut out = self.clone();
        for k in keys {
            out.terms.remove(&(k.x_mask(), k.z_mask()));
        }
        out
    }

    pub fn apply_add(&self, input: &[C64], out: &mut [C64]) -> Result<(), PauliError> {
        for (p, c) in self.iter() {
            p.apply_add(c, input, out)?;
        }
        Ok(())
    }

    pub fn apply_to_state(&self, input: &[C64]) -> Result<Vec<C64>, PauliError> {
        let mut out = vec![C64::new(0.0, 0.0); input.len()];
        // Validate even when empty.
        PauliString::identity(self.n)?.check_dim(input.len())?;
        self.apply_add(input, &mut out)?;
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>, PauliError> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<C64>, PauliError> {
        if self.n > cap {
            return Err(PauliError::DenseCap { n: self.n, cap });
        }
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for (p, c) in self.iter() {
            for j in 0..d as u64 {
                let (r, a) = p.column(j);
                m[(r as usize, j as usize)] += c * a;
            }
        }
        Ok(m)
    }

    /// Pauli decomposition `c_P = Tr(P† M) / 2^n` of a dense matrix.
    ///
    /// Each X mask selects one generalized diagonal `M[j ⊕ x, j]`; a
    /// Walsh–Hadamard transform over `j` then yields every Z mask at once,
    /// for `O(n 4^n)` total work.
    pub fn decompose(m: &DMatrix<C64>, n: usize) -> Result<Self, PauliError> {
        Self::decompose_with_tolerance(m, n, DEFAULT_PRUNE_TOL)
    }

    pub fn decompose_with_tolerance(m: &DMatrix<C64>, n: usize, tol: f64) -> Result<Self, PauliError> {
        let d = m.nrows();
        if !d.is_power_of_two() || m.ncols() != d {
            return Err(PauliError::NotPowerOfTwo(d));
        }
        if 1usize << n != d {
            return Err(PauliError::DimensionMismatch {
                got: d,
                expected: 1usize << n,
            });
        }
        if n > DEFAULT_DENSE_CAP {
            return Err(PauliError::DenseCap {
                n,
                cap: DEFAULT_DENSE_CAP,
            });
        }
        let mut out = Self::with_tolerance(n, tol);
        let mut f = vec![C64::new(0.0, 0.0); d];
        let norm = 1.0 / d as f64;
        for x in 0..d {
            for (j, fj) in f.iter_mut().enumerate() {
                *fj = m[(j ^ x, j)];
            }
            walsh_hadamard(&mut f);
            for (z, &fz) in f.iter().enumerate() {
                let ny = (x & z).count_ones();
                let c = fz * i_pow(4 - ny % 4) * norm;
                if c.norm() > tol {
                    out.terms.insert((x as u64, z as u64), c);
                }
            }
        }
        Ok(out)
    }

    /// JSON list of `[string, re, im]` triples.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.iter()
                .map(|(p, c)| serde_json::json!([p.to_string(), c.re, c.im]))
                .collect(),
        )
    }

    pub fn from_json(n: usize, v: &serde_json::Value) -> Result<Self, PauliError> {
        let bad = || PauliError::Parse(v.to_string());
        let mut out = Self::new(n);
        for t in v.as_array().ok_or_else(bad)? {
            let a = t.as_array().ok_or_else(bad)?;
            if a.len() != 3 {
                return Err(bad());
            }
            let p: PauliString = a[0].as_str().ok_or_else(bad)?.parse()?;
            let re = a[1].as_f64().ok_or_else(bad)?;
            let im = a[2].as_f64().ok_or_else(bad)?;
            out.add_term(&p, C64::new(re, im))?;
        }
        Ok(out)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0");
        }
        for (k, (p, c)) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({:.6e}{:+.6e}i)·{}", c.re, c.im, p)?;
        }
        Ok(())
    }
}

fn walsh_hadamard(f: &mut [C64]) {
    let n = f.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (f[j], f[j + h]);
                f[j] = a + b;
                f[j + h] = a - b;
            }
        }
        h *= 2;
    }
}
