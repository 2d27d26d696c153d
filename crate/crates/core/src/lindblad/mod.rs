//! Engineered dissipation for the toric code.
//!
//! Master equations use the normalization
//! `ρ̇ = −i[H, ρ] + Σ_c (2cρc† − c†cρ − ρc†c)`, so a jump `c = √(r) A`
//! fires at rate `2r‖Aψ‖²`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod basis;
mod elimination;
mod generator;
mod pump;
mod trajectories;

pub use basis::{StabilizerBasis, WorkingBasis};
pub use elimination::{adiabatic_elimination_probe, EliminationOptions, EliminationPoint, EliminationReport, Hypothesis};
pub use generator::{evolve, evolve_observed, stationary_state, Evolution, Generator, Integrator, LiouvilleBlocks, StationaryReport};
pub use pump::{pump_ancilla, PumpProtocol, PumpResult, PumpStep};
pub use trajectories::{trajectories, TrajectoryOptions, TrajectoryStats};

use crate::lattice::{LatticeError, TorusLattice};
use crate::linalg::{self, LinalgError, SparseMatrix};
use crate::pauli::{Pauli, PauliError, PauliString, PauliSum};
use crate::spectra::{SparseHamiltonian, SpectraError};
use crate::C64;

/// Largest register evolved as a dense density matrix.
pub const MAX_DENSE_QUBITS: usize = 8;

#[derive(Debug, Error)]
pub enum LindbladError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("p = {0} outside [0, 1)")]
    BadProbability(f64),
    #[error("rate {name} = {value} must be finite and non-negative")]
    BadRate { name: String, value: f64 },
    #[error("{0} qubits exceeds the dense density-matrix limit of {MAX_DENSE_QUBITS}")]
    TooLarge(usize),
    #[error("operator acts on {got} qubits, model has {expected}")]
    Register { got: usize, expected: usize },
    #[error("stabilizer generators {0}")]
    BadGenerators(String),
    #[error("density matrix invalid: {0}")]
    InvalidState(String),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("Liouville block of size {0} exceeds the dense null-space limit")]
    BlockTooLarge(usize),
    #[error("stationary state not unique: null space of dimension {total} ({populations} carrying population)")]
    NotUnique { total: usize, populations: usize },
    #[error("no stationary state found")]
    NoStationaryState,
    #[error("invalid protocol: {0}")]
    BadProtocol(String),
    #[error("invalid probe: {0}")]
    BadProbe(String),
    #[error("reduced dynamics are not exponential: log-fit residual {residual:.3e} above {threshold:.1e} at g = {g}, λ = {lambda}")]
    NonMarkovian { g: f64, lambda: f64, residual: f64, threshold: f64 },
}

fn check_rate(name: &str, value: f64) -> Result<(), LindbladError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(LindbladError::BadRate { name: name.into(), value })
    }
}

/// Excitation species: `e` charges live on vertices, `m` vortices on
/// plaquettes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "e")]
    Electric,
    #[serde(rename = "m")]
    Magnetic,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Electric, Species::Magnetic];
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::Electric => "e",
            Species::Magnetic => "m",
        })
    }
}

/// Pair creation and hopping operators about one link.
///
/// With `N < N'` the two neighborhoods of the link,
/// `E† = ¼ Σ (1 + h_N)(1 + h_N')` and `T = ¼ Σ (1 − h_N)(1 + h_N')`, so
/// `T` hops an excitation from `N` to `N'`.
#[derive(Clone, Debug)]
pub struct ExcitationOps {
    pub link: usize,
    pub species: Species,
    pub neighborhoods: [usize; 2],
    pub create: PauliSum,
    pub annihilate: PauliSum,
    pub translate: PauliSum,
    pub translate_adjoint: PauliSum,
}

pub fn excitation_ops(lat: &TorusLattice, link: usize, species: Species) -> Result<ExcitationOps, LindbladError> {
    let (verts, plaqs) = lat.link_neighborhoods(link)?;
    let n = lat.n_links();
    let (flip, hoods, h) = match species {
        Species::Electric => (
            PauliString::single(n, link, Pauli::X)?,
            verts,
            [lat.vertex_stabilizer(verts[0])?, lat.vertex_stabilizer(verts[1])?],
        ),
        Species::Magnetic => (
            PauliString::single(n, link, Pauli::Z)?,
            plaqs,
            [lat.plaquette_stabilizer(plaqs[0])?, lat.plaquette_stabilizer(plaqs[1])?],
        ),
    };
    // ¼ Σ (1 + s₀ h₀)(1 + s₁ h₁)
    let build = |s0: f64, s1: f64| -> Result<PauliSum, PauliError> {
        let mut out = PauliSum::new(n);
        let both = h[0].multiply(&h[1])?;
        out.add_real(&flip, 0.25)?;
        out.add_real(&flip.multiply(&h[0])?, 0.25 * s0)?;
        out.add_real(&flip.multiply(&h[1])?, 0.25 * s1)?;
        out.add_real(&flip.multiply(&both)?, 0.25 * s0 * s1)?;
        Ok(out)
    };
    let create = build(1.0, 1.0)?;
    let translate = build(-1.0, 1.0)?;
    Ok(ExcitationOps {
        link,
        species,
        neighborhoods: hoods,
        annihilate: create.adjoint(),
        translate_adjoint: translate.adjoint(),
        create,
        translate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRole {
    Annihilate,
    Create,
    Translate,
    TranslateAdjoint,
    Cool,
    Noise,
    Other,
}

/// A dissipator channel `c = √(base_rate · weight) · op`.
///
/// Rate and weight are kept apart so detailed-balance ratios can be read
/// off the weights exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Jump {
    pub label: String,
    pub role: JumpRole,
    #[serde(with = "pauli_sum_serde")]
    pub op: PauliSum,
    pub base_rate: f64,
    pub weight: f64,
}

impl Jump {
    pub fn rate(&self) -> f64 {
        self.base_rate * self.weight
    }
    pub fn amplitude(&self) -> f64 {
        self.rate().sqrt()
    }
}

mod pauli_sum_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        n_qubits: usize,
        terms: Vec<(PauliString, f64, f64)>,
    }

    pub fn serialize<S: Serializer>(s: &PauliSum, ser: S) -> Result<S::Ok, S::Error> {
        Repr {
            n_qubits: s.n_qubits(),
            terms: s.iter().map(|(p, c)| (p, c.re, c.im)).collect(),
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<PauliSum, D::Error> {
        let r = Repr::deserialize(de)?;
        let mut out = PauliSum::new(r.n_qubits);
        for (p, re, im) in r.terms {
            out.add_term(&p, C64::new(re, im)).map_err(serde::de::Error::custom)?;
        }
        Ok(out)
    }
}

/// Hamiltonian, jump set and the parameters they were built from.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub hamiltonian: SparseHamiltonian,
    pub jumps: Vec<Jump>,
    /// Bath parameter of the thermal set; `None` for other sets.
    pub p: Option<f64>,
    /// Pair-creation gap.
    pub delta: f64,
    /// `−Δ/ln p` for the thermal set.
    pub temperature_target: Option<f64>,
    /// Commuting generators whose joint eigenbasis makes every operator of
    /// the model monomial.
    pub basis_generators: Vec<PauliString>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    n_qubits: usize,
    hamiltonian: Vec<(f64, PauliString)>,
    jumps: Vec<Jump>,
    p: Option<f64>,
    delta: f64,
    temperature_target: Option<f64>,
    basis_generators: Vec<PauliString>,
}

/// `H₀ = −(Δ/4)(Σ_v h_v + Σ_p h_p)`: a pair costs `Δ`.
pub fn toric_hamiltonian(lat: &TorusLattice, delta: f64) -> Result<SparseHamiltonian, LindbladError> {
    let j = delta / 4.0;
    let terms: Vec<(f64, PauliString)> = lat
        .vertex_stabilizers()
        .into_iter()
        .chain(lat.plaquette_stabilizers())
        .map(|s| (-j, s))
        .collect();
    Ok(SparseHamiltonian::from_terms(lat.n_links(), &terms)?)
}

/// Independent stabilizers plus the two Z loops: `2L²` commuting
/// generators.
pub fn toric_basis_generators(lat: &TorusLattice) -> Vec<PauliString> {
    let mut v = lat.vertex_stabilizers();
    v.pop();
    let mut p = lat.plaquette_stabilizers();
    p.pop();
    let [z1, z2, _, _] = lat.logical_operators();
    v.into_iter().chain(p).chain([z1, z2]).collect()
}

/// Mean of `(1 − h)/2` over all stabilizers.
pub fn excitation_density(lat: &TorusLattice) -> Result<PauliSum, LindbladError> {
    let n = lat.n_links();
    let stabs: Vec<PauliString> = lat.vertex_stabilizers().into_iter().chain(lat.plaquette_stabilizers()).collect();
    let w = 1.0 / stabs.len() as f64;
    let mut out = PauliSum::new(n);
    out.add_real(&PauliString::identity(n)?, 0.5)?;
    for s in &stabs {
        out.add_real(s, -0.5 * w)?;
    }
    Ok(out)
}

/// Eq.-4 style thermal set over every link and both species.
pub fn thermal_jump_set(lat: &TorusLattice, p: f64, lambda: f64, gamma: f64, delta: f64) -> Result<LindbladModel, LindbladError> {
    if !(0.0..1.0).contains(&p) {
        return Err(LindbladError::BadProbability(p));
    }
    check_rate("lambda*", lambda)?;
    check_rate("gamma*", gamma)?;
    check_rate("delta", delta)?;
    let mut jumps = Vec::with_capacity(8 * lat.n_links());
    for link in 0..lat.n_links() {
        for nu in Species::BOTH {
            let ops = excitation_ops(lat, link, nu)?;
            let mk = |tag: &str, role, op: PauliSum, base_rate, weight| Jump {
                label: format!("{tag}[{link},{nu}]"),
                role,
                op,
                base_rate,
                weight,
            };
            jumps.push(mk("E", JumpRole::Annihilate, ops.annihilate, lambda / 2.0, 1.0 - p));
            jumps.push(mk("E+", JumpRole::Create, ops.create, lambda / 2.0, p));
            jumps.push(mk("T", JumpRole::Translate, ops.translate, gamma / 4.0, 1.0));
            jumps.push(mk("T+", JumpRole::TranslateAdjoint, ops.translate_adjoint, gamma / 4.0, 1.0));
        }
    }
    Ok(LindbladModel {
        hamiltonian: toric_hamiltonian(lat, delta)?,
        jumps,
        p: Some(p),
        delta,
        temperature_target: Some(if p > 0.0 { -delta / p.ln() } else { 0.0 }),
        basis_generators: toric_basis_generators(lat),
    })
}

/// The `p = 0` reduction `{√λ*(E + T), √λ*(E + T†)}`.
pub fn cooling_jump_set(lat: &TorusLattice, lambda: f64, delta: f64) -> Result<LindbladModel, LindbladError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(LindbladError::BadRate {
            name: "lambda*".into(),
            value: lambda,
        });
    }
    let mut jumps = Vec::with_capacity(4 * lat.n_links());
    for link in 0..lat.n_links() {
        for nu in Species::BOTH {
            let ops = excitation_ops(lat, link, nu)?;
            jumps.push(Jump {
                label: format!("E+T[{link},{nu}]"),
                role: JumpRole::Cool,
                op: ops.annihilate.add(&ops.translate)?,
                base_rate: lambda,
                weight: 1.0,
            });
            jumps.push(Jump {
                label: format!("E+T+[{link},{nu}]"),
                role: JumpRole::Cool,
                op: ops.annihilate.add(&ops.translate_adjoint)?,
                base_rate: lambda,
                weight: 1.0,
            });
        }
    }
    Ok(LindbladModel {
        hamiltonian: toric_hamiltonian(lat, delta)?,
        jumps,
        p: Some(0.0),
        delta,
        temperature_target: Some(0.0),
        basis_generators: toric_basis_generators(lat),
    })
}

/// Single-qubit depolarizing channel at total event rate `gamma_e` per
/// qubit: `√(Γ/6)·σ^a` for each `a`.
pub fn depolarizing_jumps(n: usize, gamma_e: f64) -> Result<Vec<Jump>, LindbladError> {
    check_rate("gamma_e", gamma_e)?;
    let mut out = Vec::with_capacity(3 * n);
    for q in 0..n {
        for (tag, p) in [("X", Pauli::X), ("Y", Pauli::Y), ("Z", Pauli::Z)] {
            let mut op = PauliSum::new(n);
            op.add_real(&PauliString::single(n, q, p)?, 1.0)?;
            out.push(Jump {
                label: format!("{tag}[{q}]"),
                role: JumpRole::Noise,
                op,
                base_rate: gamma_e / 6.0,
                weight: 1.0,
            });
        }
    }
    Ok(out)
}

impl LindbladModel {
    pub fn n_qubits(&self) -> usize {
        self.hamiltonian.n_qubits()
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let n = self.n_qubits();
        for j in &self.jumps {
            check_rate(&j.label, j.base_rate)?;
            check_rate(&j.label, j.weight)?;
            if j.op.n_qubits() != n {
                return Err(LindbladError::Register {
                    got: j.op.n_qubits(),
                    expected: n,
                });
            }
        }
        Ok(())
    }

    pub fn with_jumps(mut self, extra: Vec<Jump>) -> Self {
        self.jumps.extend(extra);
        self
    }

    /// Temperature at which the set obeys detailed balance: pair creation
    /// over annihilation is `p/(1−p) = e^{−Δ/T}`. Infinite at `p = ½`.
    pub fn detailed_balance_temperature(&self) -> Option<f64> {
        let p = self.p?;
        if p == 0.0 {
            return Some(0.0);
        }
        let r = ((1.0 - p) / p).ln();
        Some(if r == 0.0 { f64::INFINITY } else { self.delta / r })
    }

    /// `(creation weight / annihilation weight, equal base rates)` for each
    /// link and species.
    pub fn rate_ratios(&self) -> Vec<(String, f64, bool)> {
        let mut out = Vec::new();
        for up in self.jumps.iter().filter(|j| j.role == JumpRole::Create) {
            let key = up.label.trim_start_matches("E+");
            if let Some(down) = self.jumps.iter().find(|j| j.role == JumpRole::Annihilate && j.label.trim_start_matches('E') == key) {
                out.push((key.to_string(), up.weight / down.weight, up.base_rate.to_bits() == down.base_rate.to_bits()));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelRepr {
            n_qubits: self.n_qubits(),
            hamiltonian: self.hamiltonian.terms().to_vec(),
            jumps: self.jumps.clone(),
            p: self.p,
            delta: self.delta,
            temperature_target: self.temperature_target,
            basis_generators: self.basis_generators.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LindbladError> {
        let r: ModelRepr = serde_json::from_str(s).map_err(|e| LindbladError::InvalidState(e.to_string()))?;
        let m = Self {
            hamiltonian: SparseHamiltonian::from_terms(r.n_qubits, &r.hamiltonian)?,
            jumps: r.jumps,
            p: r.p,
            delta: r.delta,
            temperature_target: r.temperature_target,
            basis_generators: r.basis_generators,
        };
        m.validate()?;
        Ok(m)
    }
}

/// A unit-trace Hermitian positive matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

/// Deviations from the density-matrix invariants.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateDefects {
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateDefects {
    pub fn within(&self, tol: f64) -> bool {
        self.trace_error <= tol && self.hermiticity <= tol && self.min_eigenvalue >= -tol
    }
}

impl DensityMatrix {
    /// Tolerance on the invariants accepted by [`DensityMatrix::new`].
    pub const TOL: f64 = 1e-9;

    pub fn new(m: DMatrix<C64>) -> Result<Self, LindbladError> {
        if !m.is_square() {
            return Err(LindbladError::InvalidState(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let d = defects(&m);
        if !d.within(Self::TOL) {
            return Err(LindbladError::InvalidState(format!("{d:?}")));
        }
        Ok(Self(m))
    }

    /// Skips validation; for matrices already known to be states.
    pub(crate) fn new_unchecked(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn pure(psi: &[C64]) -> Result<Self, LindbladError> {
        let nrm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(LindbladError::InvalidState("zero vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|a| a / nrm));
        Ok(Self(&v * v.adjoint()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0))
    }

    /// `e^{−H/T}/Z`; the ground-space projector over its dimension at
    /// `T = 0` and the identity at `T = ∞`.
    pub fn thermal(h: &DMatrix<C64>, temperature: f64) -> Self {
        let d = h.nrows();
        if temperature.is_infinite() {
            return Self::maximally_mixed(d);
        }
        let (vals, vecs) = linalg::eigh(h);
        let e0 = vals[0];
        let w: Vec<f64> = if temperature <= 0.0 {
            vals.iter().map(|&e| if e - e0 < 1e-9 { 1.0 } else { 0.0 }).collect()
        } else {
            vals.iter().map(|&e| (-(e - e0) / temperature).exp()).collect()
        };
        let z: f64 = w.iter().sum();
        let diag = nalgebra::DVector::from_iterator(d, w.iter().map(|x| C64::new(x / z, 0.0)));
        Self(&vecs * DMatrix::from_diagonal(&diag) * vecs.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }
    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }
    pub fn defects(&self) -> StateDefects {
        defects(&self.0)
    }
    pub fn trace_distance(&self, other: &Self) -> f64 {
        linalg::trace_distance(&self.0, &other.0)
    }
    pub fn entropy(&self) -> f64 {
        linalg::von_neumann_entropy(&self.0)
    }
    pub fn expectation(&self, op: &SparseMatrix) -> f64 {
        op.triplets().map(|(r, c, v)| v * self.0[(c, r)]).sum::<C64>().re
    }
}

fn defects(m: &DMatrix<C64>) -> StateDefects {
    let tr = m.trace();
    let herm = linalg::max_abs(&(m - m.adjoint()));
    let (vals, _) = linalg::eigh(m);
    StateDefects {
        trace_error: (tr - C64::new(1.0, 0.0)).norm(),
        hermiticity: herm,
        min_eigenvalue: vals.first().copied().unwrap_or(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn projector(s: &PauliString, sign: f64) -> DMatrix<C64> {
        let d = 1usize << s.n_qubits();
        (DMatrix::identity(d, d) + s.to_dense().unwrap() * c(sign)) * c(0.5)
    }

    #[test]
    fn excitation_ops_match_projector_products() {
        let lat = TorusLattice::build(2).unwrap();
        let n = lat.n_links();
        for link in [0, 5] {
            for nu in Species::BOTH {
                let ops = excitation_ops(&lat, link, nu).unwrap();
                let (flip, h): (Pauli, Vec<PauliString>) = match nu {
                    Species::Electric => (Pauli::X, ops.neighborhoods.iter().map(|&v| lat.vertex_stabilizer(v).unwrap()).collect()),
                    Species::Magnetic => (Pauli::Z, ops.neighborhoods.iter().map(|&p| lat.plaquette_stabilizer(p).unwrap()).collect()),
                };
                let sigma = PauliString::single(n, link, flip).unwrap().to_dense().unwrap();
                let create = &sigma * projector(&h[0], 1.0) * projector(&h[1], 1.0);
                let hop = &sigma * projector(&h[0], -1.0) * projector(&h[1], 1.0);
                assert!(linalg::max_abs(&(ops.create.to_dense().unwrap() - &create)) < 1e-14);
                assert!(linalg::max_abs(&(ops.translate.to_dense().unwrap() - &hop)) < 1e-14);
                assert!(linalg::max_abs(&(ops.annihilate.to_dense().unwrap() - create.adjoint())) < 1e-14);
                // E†² = 0.
                let e = ops.create.to_dense().unwrap();
                assert!(linalg::max_abs(&(&e * &e)) < 1e-14);
            }
        }
    }

    #[test]
    fn creation_costs_delta_and_hopping_kills_ground_space() {
        let lat = TorusLattice::build(2).unwrap();
        let h = toric_hamiltonian(&lat, 4.0).unwrap().to_dense().unwrap();
        let (vals, vecs) = linalg::eigh(&h);
        let e0 = vals[0];
        let g: nalgebra::DVector<C64> = vecs.column(0).into_owned();
        for nu in Species::BOTH {
            let ops = excitation_ops(&lat, 3, nu).unwrap();
            let psi = ops.create.to_dense().unwrap() * &g;
            let nrm = psi.norm();
            assert!((nrm - 1.0).abs() < 1e-12);
            let hpsi = &h * &psi;
            // A pair flips two stabilizers at 2J each: E₀ + 4J = E₀ + Δ.
            assert!((&hpsi - &psi * c(e0 + 4.0)).norm() < 1e-10);
            assert!((ops.translate.to_dense().unwrap() * &g).norm() < 1e-14);
            assert!((ops.annihilate.to_dense().unwrap() * &g).norm() < 1e-14);
        }
    }

    #[test]
    fn hopping_conserves_energy_on_single_excitations() {
        let lat = TorusLattice::build(2).unwrap();
        let h = toric_hamiltonian(&lat, 4.0).unwrap().to_dense().unwrap();
        let (_, vecs) = linalg::eigh(&h);
        let g: nalgebra::DVector<C64> = vecs.column(0).into_owned();
        // Two charges from one link, then hop one of them away.
        let e = excitation_ops(&lat, 0, Species::Electric).unwrap();
        let psi = e.create.to_dense().unwrap() * &g;
        let energy = (psi.adjoint() * &h * &psi)[(0, 0)].re;
        for link in 0..lat.n_links() {
            let t = excitation_ops(&lat, link, Species::Electric).unwrap();
            for op in [&t.translate, &t.translate_adjoint] {
                let phi = op.to_dense().unwrap() * &psi;
                let w = phi.norm_squared();
                if w > 1e-12 {
                    let e2 = (phi.adjoint() * &h * &phi)[(0, 0)].re / w;
                    assert!((e2 - energy).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn thermal_set_rates_and_temperature() {
        let lat = TorusLattice::build(2).unwrap();
        let m = thermal_jump_set(&lat, 0.5, 1.0, 0.5, 4.0).unwrap();
        assert_eq!(m.jumps.len(), 8 * lat.n_links());
        assert!((m.temperature_target.unwrap() - 4.0 / 2f64.ln()).abs() < 1e-12);
        assert!((m.temperature_target.unwrap() - 5.7708).abs() < 1e-4);
        assert!(m.detailed_balance_temperature().unwrap().is_infinite());
        for p in [0.1, 0.3, 0.5] {
            let m = thermal_jump_set(&lat, p, 1.3, 0.7, 4.0).unwrap();
            let ratios = m.rate_ratios();
            assert_eq!(ratios.len(), 2 * lat.n_links());
            for (_, r, same_base) in ratios {
                assert!(same_base);
                assert_eq!(r.to_bits(), (p / (1.0 - p)).to_bits());
            }
        }
        let cold = thermal_jump_set(&lat, 0.0, 1.0, 1.0, 4.0).unwrap();
        assert_eq!(cold.temperature_target, Some(0.0));
        let tiny = thermal_jump_set(&lat, 1e-12, 1.0, 1.0, 4.0).unwrap();
        assert!(tiny.temperature_target.unwrap() < 0.2);
        assert!(matches!(thermal_jump_set(&lat, 1.0, 1.0, 1.0, 4.0), Err(LindbladError::BadProbability(_))));
        assert!(matches!(thermal_jump_set(&lat, 0.2, -1.0, 1.0, 4.0), Err(LindbladError::BadRate { .. })));
    }

    #[test]
    fn jumps_preserve_the_complementary_logical_loops() {
        // σˣ jumps commute with the X loops, σᶻ jumps with the Z loops.
        let lat = TorusLattice::build(3).unwrap();
        let [z1, z2, x1, x2] = lat.logical_operators();
        let m = thermal_jump_set(&lat, 0.2, 1.0, 1.0, 4.0).unwrap();
        for j in &m.jumps {
            let loops = if j.label.ends_with(",e]") { [&x1, &x2] } else { [&z1, &z2] };
            for l in loops {
                let mut ls = PauliSum::new(lat.n_links());
                ls.add_real(l, 1.0).unwrap();
                assert!(j.op.commutator(&ls).unwrap().is_empty(), "{}", j.label);
            }
        }
    }

    #[test]
    fn cooling_set_has_dark_ground_space() {
        let lat = TorusLattice::build(2).unwrap();
        let m = cooling_jump_set(&lat, 1.0, 4.0).unwrap();
        assert_eq!(m.jumps.len(), 4 * lat.n_links());
        let h = m.hamiltonian.to_dense().unwrap();
        let (vals, vecs) = linalg::eigh(&h);
        for k in 0..4 {
            assert!((vals[k] - vals[0]).abs() < 1e-12);
            let g: nalgebra::DVector<C64> = vecs.column(k).into_owned();
            for j in &m.jumps {
                assert!((j.op.to_dense().unwrap() * &g).norm() < 1e-14);
            }
        }
        assert!((vals[4] - vals[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let lat = TorusLattice::build(2).unwrap();
        let m = thermal_jump_set(&lat, 0.2, 1.0, 0.5, 4.0).unwrap();
        let back = LindbladModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.jumps.len(), m.jumps.len());
        assert_eq!(back.hamiltonian.terms(), m.hamiltonian.terms());
        assert_eq!(back.p, m.p);
        for (a, b) in m.jumps.iter().zip(&back.jumps) {
            assert_eq!(a.op, b.op);
            assert_eq!(a.rate().to_bits(), b.rate().to_bits());
        }
    }

    #[test]
    fn density_matrix_invariants() {
        let mm = DensityMatrix::maximally_mixed(4);
        assert!(mm.defects().within(1e-14));
        assert!((mm.entropy() - 4f64.ln()).abs() < 1e-12);
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(DensityMatrix::new(bad).is_err());
        let pure = DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap();
        assert!(pure.entropy().abs() < 1e-12);
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]));
        let th = DensityMatrix::thermal(&h, 1.0);
        let z = 1.0 + (-1f64).exp();
        assert!((th.matrix()[(0, 0)].re - 1.0 / z).abs() < 1e-14);
        assert!((DensityMatrix::thermal(&h, 0.0).matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
    }
}
