//! Gate sequences built from exponentiated Pauli generators, and the
//! effective Hamiltonians they produce.
//!
//! A gate is `exp(−i·angle·generator)` lasting `duration`. The effective
//! Hamiltonian of a sequence `U_n ⋯ U_1` is `(i/t)·ln(U_n ⋯ U_1)` with the
//! principal logarithm, read term by term in the Pauli basis.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::TorusLattice;
use crate::linalg::{self, LineFit, LinalgError};
use crate::pauli::{PauliError, PauliString, PauliSum, DEFAULT_PRUNE_TOL};
use crate::C64;

/// Eigenphases closer than this to ±π are rejected by the matrix log.
pub const DEFAULT_BRANCH_TOL: f64 = 1e-6;
/// Number of `U_j` applications in one echoed vertex or plaquette sequence.
pub const GATES_PER_ECHOED_TERM: usize = 20;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("sequence is empty")]
    Empty,
    #[error("invalid scan: {0}")]
    InvalidScan(String),
    #[error("invalid cycle-time request: {0}")]
    InvalidCycle(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub generator: PauliString,
    pub angle: f64,
    pub duration: f64,
}

impl Gate {
    pub fn new(generator: PauliString, angle: f64, duration: f64) -> Result<Self, SequenceError> {
        if !angle.is_finite() {
            return Err(SequenceError::InvalidGate(format!("angle {angle} is not finite")));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(SequenceError::InvalidGate(format!("duration {duration} must be positive")));
        }
        if !generator.is_hermitian() {
            return Err(SequenceError::InvalidGate(format!("generator {generator} is not Hermitian")));
        }
        Ok(Self {
            generator,
            angle,
            duration,
        })
    }

    pub fn inverse(&self) -> Self {
        Self {
            angle: -self.angle,
            ..self.clone()
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.generator.n_qubits()
    }

    /// `exp(−iθP) = cos θ · 1 − i sin θ · P` for a Hermitian string `P`.
    pub fn unitary(&self) -> Result<DMatrix<C64>, SequenceError> {
        let d = 1usize << self.n_qubits();
        let mut u = DMatrix::identity(d, d) * C64::new(self.angle.cos(), 0.0);
        u += self.generator.to_dense()? * C64::new(0.0, -self.angle.sin());
        Ok(u)
    }

    /// Left-multiply `m` by this gate in place, column by column.
    fn apply_left(&self, m: &mut DMatrix<C64>) -> Result<(), SequenceError> {
        let (c, s) = (C64::new(self.angle.cos(), 0.0), C64::new(0.0, -self.angle.sin()));
        let d = m.nrows();
        let mut col = vec![C64::new(0.0, 0.0); d];
        let mut out = vec![C64::new(0.0, 0.0); d];
        for j in 0..m.ncols() {
            col.copy_from_slice(m.column(j).as_slice());
            out.iter_mut().zip(&col).for_each(|(o, v)| *o = c * v);
            self.generator.apply_add(s, &col, &mut out)?;
            m.column_mut(j).copy_from_slice(&out);
        }
        Ok(())
    }
}

/// Gates in time order: `gates[0]` acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub label: String,
    gates: Vec<Gate>,
}

impl GateSequence {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) -> Result<(), SequenceError> {
        if let Some(first) = self.gates.first() {
            if first.n_qubits() != g.n_qubits() {
                return Err(PauliError::SizeMismatch(first.n_qubits(), g.n_qubits()).into());
            }
        }
        self.gates.push(g);
        Ok(())
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &GateSequence, label: impl Into<String>) -> Result<Self, SequenceError> {
        let mut out = Self::new(label);
        for g in self.gates.iter().chain(&other.gates) {
            out.push(g.clone())?;
        }
        Ok(out)
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
    pub fn len(&self) -> usize {
        self.gates.len()
    }
    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.gates.first().map(Gate::n_qubits)
    }

    pub fn total_duration(&self) -> f64 {
        self.gates.iter().map(|g| g.duration).sum()
    }

    /// `U_n ⋯ U_1` as a dense matrix.
    pub fn composed_unitary(&self) -> Result<DMatrix<C64>, SequenceError> {
        let n = self.n_qubits().ok_or(SequenceError::Empty)?;
        let d = 1usize << n;
        if n > crate::pauli::DEFAULT_DENSE_CAP {
            return Err(PauliError::DenseCap {
                n,
                cap: crate::pauli::DEFAULT_DENSE_CAP,
            }
            .into());
        }
        let mut u = DMatrix::identity(d, d);
        for g in &self.gates {
            g.apply_left(&mut u)?;
        }
        Ok(u)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SequenceError> {
        let seq: Self = serde_json::from_str(s).map_err(|e| SequenceError::InvalidGate(e.to_string()))?;
        let mut checked = Self::new(seq.label.clone());
        for g in seq.gates {
            checked.push(Gate::new(g.generator, g.angle, g.duration)?)?;
        }
        Ok(checked)
    }
}

/// Σ₁ = Z Y I I, Σ₂ = I X Y I, Σ₃ = I I X Z on the four spins of a vertex.
pub fn vertex_generators() -> [PauliString; 3] {
    ["ZYII", "IXYI", "IIXZ"].map(|s| s.parse().expect("static generator"))
}

/// Cyclic letter permutation X → Y → Z → X of the vertex generators.
pub fn plaquette_generators(gens: &[PauliString; 3]) -> [PauliString; 3] {
    [gens[0].cycled(), gens[1].cycled(), gens[2].cycled()]
}

fn check_gens(gens: &[PauliString; 3]) -> Result<(), SequenceError> {
    let n = gens[0].n_qubits();
    for g in &gens[1..] {
        if g.n_qubits() != n {
            return Err(PauliError::SizeMismatch(n, g.n_qubits()).into());
        }
    }
    Ok(())
}

/// `U₁₂₃(α,β,γ) = U₁₂(α,β) U₃(γ) U₁₂†(α,β) U₃†(γ)` with
/// `U₁₂(α,β) = U₂(β) U₁(α) U₂†(β) U₁†(α)`; ten gates, `10τ`.
pub fn u123(alpha: f64, beta: f64, gamma: f64, gens: &[PauliString; 3], tau: f64) -> Result<GateSequence, SequenceError> {
    check_gens(gens)?;
    let g = |k: usize, a: f64| Gate::new(gens[k], a, tau);
    // Time order of U₁₂: U₁†, U₂†, U₁, U₂.
    let u12 = [g(0, -alpha)?, g(1, -beta)?, g(0, alpha)?, g(1, beta)?];
    let mut s = GateSequence::new(format!("u123({alpha},{beta},{gamma})"));
    s.push(g(2, -gamma)?)?;
    for gate in u12.iter().rev() {
        s.push(gate.inverse())?;
    }
    s.push(g(2, gamma)?)?;
    for gate in u12 {
        s.push(gate)?;
    }
    Ok(s)
}

/// `U₁₂₃(−α,β,−γ) U₁₂₃(α,β,γ)`; twenty gates, `20τ`.
pub fn echoed_u123(alpha: f64, beta: f64, gamma: f64, gens: &[PauliString; 3], tau: f64) -> Result<GateSequence, SequenceError> {
    let first = u123(alpha, beta, gamma, gens, tau)?;
    let second = u123(-alpha, beta, -gamma, gens, tau)?;
    first.then(&second, format!("echoed_u123({alpha},{beta},{gamma})"))
}

#[derive(Clone, Copy, Debug)]
pub struct EffectiveOptions {
    pub prune_tol: f64,
    pub branch_tol: f64,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self {
            prune_tol: DEFAULT_PRUNE_TOL,
            branch_tol: DEFAULT_BRANCH_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    pub h_eff: PauliSum,
    pub total_time: f64,
    /// Largest anti-Hermitian coefficient removed by symmetrization.
    pub asymmetry: f64,
}

pub fn effective_hamiltonian(s: &GateSequence) -> Result<EffectiveHamiltonian, SequenceError> {
    effective_hamiltonian_with(s, EffectiveOptions::default())
}

pub fn effective_hamiltonian_with(s: &GateSequence, opts: EffectiveOptions) -> Result<EffectiveHamiltonian, SequenceError> {
    let n = s.n_qubits().ok_or(SequenceError::Empty)?;
    let u = s.composed_unitary()?;
    let t = s.total_duration();
    let log = linalg::unitary_log(&u, opts.branch_tol)?;
    let h = log * C64::new(0.0, 1.0 / t);
    let raw = PauliSum::decompose_with_tolerance(&h, n, opts.prune_tol)?;
    let asymmetry = raw.iter().map(|(_, c)| c.im.abs()).fold(0.0, f64::max);
    Ok(EffectiveHamiltonian {
        h_eff: raw.hermitian_part(),
        total_time: t,
        asymmetry,
    })
}

/// Measured effective Hamiltonian compared against predicted coefficients.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonianReport {
    pub h_eff: PauliSum,
    pub total_time: f64,
    /// `h_eff` with the target terms removed.
    pub residual: PauliSum,
    /// term text → (measured, predicted).
    pub target_coefficients: BTreeMap<String, (f64, f64)>,
}

impl EffectiveHamiltonianReport {
    pub fn new(eff: &EffectiveHamiltonian, targets: &[(PauliString, f64)]) -> Self {
        let keys: Vec<PauliString> = targets.iter().map(|(p, _)| *p).collect();
        let target_coefficients = targets
            .iter()
            .map(|(p, pred)| (p.unsigned().to_string(), (eff.h_eff.coefficient(p).re, *pred)))
            .collect();
        Self {
            h_eff: eff.h_eff.clone(),
            total_time: eff.total_time,
            residual: eff.h_eff.without(&keys),
            target_coefficients,
        }
    }

    /// CSV rows `term,measured,predicted`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,measured,predicted\n");
        for (k, (m, p)) in &self.target_coefficients {
            out.push_str(&format!("{k},{m:.15e},{p:.15e}\n"));
        }
        out
    }
}

/// Closed-form coefficients of the vertex sequence.
///
/// `χ = α²βγ²·2/(5τ)` and `J_e = χ(1 − 3φ²)/(αγ)` with `φ = |α|`; the
/// fourth-order terms of the single sequence are `(χ/γ)·IXZZ + (χ/α)·ZZYI`
/// and the fifth-order terms are `χ·IXYI − (2βχ/γ)·IIXZ`.
#[derive(Clone, Copy, Debug)]
pub struct VertexPrediction {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl VertexPrediction {
    pub fn chi(&self) -> f64 {
        self.alpha.powi(2) * self.beta * self.gamma.powi(2) * 2.0 / (5.0 * self.tau)
    }

    pub fn j_e(&self) -> f64 {
        let phi = self.alpha.abs();
        self.chi() * (1.0 - 3.0 * phi * phi) / (self.alpha * self.gamma)
    }

    /// Terms listed for the single sequence, as (string, coefficient).
    pub fn single_terms(&self) -> Vec<(PauliString, f64)> {
        let chi = self.chi();
        vec![
            (p("ZZZZ"), self.j_e()),
            (p("IXZZ"), chi / self.gamma),
            (p("ZZYI"), chi / self.alpha),
            (p("IXYI"), chi),
            (p("IIXZ"), -2.0 * self.beta * chi / self.gamma),
        ]
    }

    /// Terms surviving the echo.
    pub fn echoed_terms(&self) -> Vec<(PauliString, f64)> {
        vec![(p("ZZZZ"), self.j_e()), (p("IXYI"), self.chi())]
    }
}

fn p(s: &str) -> PauliString {
    s.parse().expect("static string")
}

/// Second-order Magnus approximant from Pauli algebra alone:
/// `Σ_j θ_j Σ_j / t + (i/2t) Σ_{j<k} θ_j θ_k [Σ_j, Σ_k]`, `j` before `k` in time.
pub fn bch_second_order(s: &GateSequence) -> Result<PauliSum, SequenceError> {
    let n = s.n_qubits().ok_or(SequenceError::Empty)?;
    let t = s.total_duration();
    let mut out = PauliSum::with_tolerance(n, 0.0);
    let gates = s.gates();
    for (j, gj) in gates.iter().enumerate() {
        out.add_real(&gj.generator, gj.angle / t)?;
        for gk in &gates[j + 1..] {
            if !gj.generator.commutes_with(&gk.generator) {
                let prod = gj.generator.multiply(&gk.generator)?;
                // (i/2t) θ_j θ_k · 2 Σ_j Σ_k
                out.add_term(&prod, C64::new(0.0, gj.angle * gk.angle / t))?;
            }
        }
    }
    out.set_tolerance(DEFAULT_PRUNE_TOL);
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct ScanOptions {
    /// Pruning floor for the Pauli decomposition at each point.
    pub floor: f64,
    pub branch_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            floor: 1e-16,
            branch_tol: DEFAULT_BRANCH_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TermScaling {
    pub term: PauliString,
    /// Signed real coefficient at each scan point.
    pub coefficients: Vec<f64>,
    pub fit: Option<LineFit>,
    /// Why no fit was possible, if so.
    pub flag: Option<String>,
}

impl TermScaling {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

#[derive(Clone, Debug)]
pub struct OrderScan {
    pub phis: Vec<f64>,
    /// Fits for the target terms themselves.
    pub targets: Vec<TermScaling>,
    /// Fits for every other term seen at any scan point.
    pub residual_terms: Vec<TermScaling>,
    /// L2 norm of the non-target coefficients at each point.
    pub residual_norms: Vec<f64>,
    pub residual_fit: Option<LineFit>,
}

impl OrderScan {
    pub fn term(&self, s: &str) -> Option<&TermScaling> {
        let key: PauliString = s.parse().ok()?;
        self.targets
            .iter()
            .chain(&self.residual_terms)
            .find(|t| t.term.unsigned() == key.unsigned())
    }

    /// CSV rows `term,phi,measured,slope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,phi,measured,slope\n");
        let fmt_slope = |t: &TermScaling| t.slope().map_or("nan".to_string(), |s| format!("{s:.6}"));
        for t in self.targets.iter().chain(&self.residual_terms) {
            for (phi, c) in self.phis.iter().zip(&t.coefficients) {
                out.push_str(&format!("{},{phi},{c:.15e},{}\n", t.term.unsigned(), fmt_slope(t)));
            }
        }
        let rs = self.residual_fit.map_or("nan".to_string(), |f| format!("{:.6}", f.slope));
        for (phi, c) in self.phis.iter().zip(&self.residual_norms) {
            out.push_str(&format!("residual,{phi},{c:.15e},{rs}\n"));
        }
        out
    }
}

/// Log-log power-law fit of `|values|` against `phis`.
///
/// Points at or below ten times `floor` get zero weight; the rest are
/// weighted by `v² / (v² + (10·floor)²)`.
pub fn power_law_fit(phis: &[f64], values: &[f64], floor: f64) -> Result<LineFit, LinalgError> {
    let cut = 10.0 * floor;
    let x: Vec<f64> = phis.iter().map(|p| p.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let w: Vec<f64> = values
        .iter()
        .map(|v| {
            let a = v.abs();
            if a <= cut {
                0.0
            } else {
                a * a / (a * a + cut * cut)
            }
        })
        .collect();
    linalg::weighted_line_fit(&x, &y, &w)
}

fn scaling(term: PauliString, coefficients: Vec<f64>, phis: &[f64], floor: f64) -> TermScaling {
    match power_law_fit(phis, &coefficients, floor) {
        Ok(fit) => TermScaling {
            term,
            coefficients,
            fit: Some(fit),
            flag: None,
        },
        Err(e) => TermScaling {
            term,
            coefficients,
            fit: None,
            flag: Some(format!("degenerate fit: {e}")),
        },
    }
}

/// Fit the power-law order of every effective-Hamiltonian term over a
/// scan of the overall angle.
pub fn order_scan<F>(factory: F, phis: &[f64], targets: &[PauliString], opts: ScanOptions) -> Result<OrderScan, SequenceError>
where
    F: Fn(f64) -> Result<GateSequence, SequenceError>,
{
    if phis.len() < 4 {
        return Err(SequenceError::InvalidScan(format!("need at least 4 angles, got {}", phis.len())));
    }
    let lo = phis.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = phis.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 2.0 {
        return Err(SequenceError::InvalidScan(format!(
            "angles must be positive and span at least a factor of 2 (got {lo}..{hi})"
        )));
    }
    let effs = phis
        .iter()
        .map(|&phi| {
            effective_hamiltonian_with(
                &factory(phi)?,
                EffectiveOptions {
                    prune_tol: opts.floor,
                    branch_tol: opts.branch_tol,
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut others: BTreeMap<PauliString, ()> = BTreeMap::new();
    for e in &effs {
        for (p, _) in e.h_eff.without(targets).iter() {
            others.insert(p, ());
        }
    }
    let series = |p: &PauliString| effs.iter().map(|e| e.h_eff.coefficient(p).re).collect::<Vec<_>>();
    let target_fits = targets
        .iter()
        .map(|t| scaling(*t, series(t), phis, opts.floor))
        .collect();
    let residual_terms = others
        .keys()
        .map(|t| scaling(*t, series(t), phis, opts.floor))
        .collect();
    let residual_norms: Vec<f64> = effs.iter().map(|e| e.h_eff.without(targets).norm2()).collect();
    let residual_fit = power_law_fit(phis, &residual_norms, opts.floor).ok();
    Ok(OrderScan {
        phis: phis.to_vec(),
        targets: target_fits,
        residual_terms,
        residual_norms,
        residual_fit,
    })
}

#[derive(Clone, Debug)]
pub struct CompositionReport {
    /// Every gate of one part commutes with every gate of the other, so the
    /// composition is exact and no matrix log was taken.
    pub commuting: bool,
    /// `T·H(concat) − t_v·H_v − t_p·H_p`: the exponent mismatch.
    pub error_terms: PauliSum,
    /// Largest coefficient of `error_terms`.
    pub error: f64,
}

/// Vertex sequence followed by plaquette sequence, with the error of
/// replacing the product of their evolutions by the evolution of the sum.
pub fn serial_compose(vertex: &GateSequence, plaquette: &GateSequence) -> Result<(GateSequence, CompositionReport), SequenceError> {
    serial_compose_with(vertex, plaquette, EffectiveOptions::default())
}

pub fn serial_compose_with(
    vertex: &GateSequence,
    plaquette: &GateSequence,
    opts: EffectiveOptions,
) -> Result<(GateSequence, CompositionReport), SequenceError> {
    let joined = vertex.then(plaquette, format!("{} ; {}", vertex.label, plaquette.label))?;
    let n = joined.n_qubits().ok_or(SequenceError::Empty)?;
    let commuting = vertex
        .gates()
        .iter()
        .all(|a| plaquette.gates().iter().all(|b| a.generator.commutes_with(&b.generator)));
    if commuting {
        return Ok((
            joined,
            CompositionReport {
                commuting,
                error_terms: PauliSum::new(n),
                error: 0.0,
            },
        ));
    }
    let hv = effective_hamiltonian_with(vertex, opts)?;
    let hp = effective_hamiltonian_with(plaquette, opts)?;
    let hc = effective_hamiltonian_with(&joined, opts)?;
    let mut err = hc.h_eff.scale(C64::new(hc.total_time, 0.0));
    err.set_tolerance(opts.prune_tol);
    let err = err
        .sub(&hv.h_eff.scale(C64::new(hv.total_time, 0.0)))?
        .sub(&hp.h_eff.scale(C64::new(hp.total_time, 0.0)))?;
    Ok((
        joined,
        CompositionReport {
            commuting,
            error: err.max_abs(),
            error_terms: err,
        },
    ))
}

/// Serial stroboscopic cycle time in seconds.
///
/// Every vertex and plaquette term costs [`GATES_PER_ECHOED_TERM`] `U_j`
/// applications, each realized by `gates_per_u` elementary gates of duration
/// `tau_seconds`. With `parallel_factor` the serial time is divided by it.
///
/// Two readings of the hardware count exist: one CPHASE plus four one-spin
/// gates gives `gates_per_u = 5`; reproducing the quoted 720 µs serial cycle
/// for the 3×3 torus at τ = 500 ns requires `gates_per_u = 4`.
pub fn estimate_cycle_time(
    lattice: &TorusLattice,
    tau_seconds: f64,
    gates_per_u: u32,
    parallel_factor: Option<f64>,
) -> Result<f64, SequenceError> {
    if gates_per_u == 0 {
        return Err(SequenceError::InvalidCycle("gates_per_u must be at least 1".into()));
    }
    if !(tau_seconds >= 0.0) {
        return Err(SequenceError::InvalidCycle(format!("tau {tau_seconds} must be non-negative")));
    }
    let terms = (lattice.n_vertices() + lattice.n_plaquettes()) as f64;
    let serial = terms * GATES_PER_ECHOED_TERM as f64 * gates_per_u as f64 * tau_seconds;
    match parallel_factor {
        None => Ok(serial),
        Some(f) if f >= 1.0 => Ok(serial / f),
        Some(f) => Err(SequenceError::InvalidCycle(format!("parallel factor {f} must be at least 1"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, max_abs, unitarity_defect};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gens() -> [PauliString; 3] {
        vertex_generators()
    }

    #[test]
    fn zero_angles_give_identity() {
        for s in [u123(0.0, 0.0, 0.0, &gens(), 1.0).unwrap(), echoed_u123(0.0, 0.0, 0.0, &gens(), 1.0).unwrap()] {
            let u = s.composed_unitary().unwrap();
            assert!(max_abs(&(u - DMatrix::identity(16, 16))) == 0.0);
            assert!(effective_hamiltonian(&s).unwrap().h_eff.is_empty());
        }
    }

    #[test]
    fn gate_counts_and_durations() {
        let s = u123(0.3, -0.2, 0.1, &gens(), 1.0).unwrap();
        assert_eq!(s.len(), 10);
        assert_relative_eq!(s.total_duration(), 10.0);
        let e = echoed_u123(0.3, -0.2, 0.1, &gens(), 0.5).unwrap();
        assert_eq!(e.len(), 20);
        assert_relative_eq!(e.total_duration(), 10.0);
        let second = u123(-0.3, -0.2, -0.1, &gens(), 0.5).unwrap();
        assert_eq!(&e.gates()[10..], second.gates());
    }

    #[test]
    fn composed_unitary_is_unitary() {
        let u = u123(0.1, 0.1, 0.1, &gens(), 1.0).unwrap().composed_unitary().unwrap();
        assert!(unitarity_defect(&u) < 1e-13);
    }

    #[test]
    fn composed_unitary_matches_gate_product() {
        let s = u123(0.4, 0.2, -0.3, &gens(), 1.0).unwrap();
        let mut u = DMatrix::identity(16, 16);
        for g in s.gates() {
            u = g.unitary().unwrap() * u;
        }
        assert!(max_abs(&(u - s.composed_unitary().unwrap())) < 1e-14);
    }

    #[test]
    fn single_gate_effective_hamiltonian() {
        let mut s = GateSequence::new("z");
        s.push(Gate::new("Z".parse().unwrap(), 0.3, 2.0).unwrap()).unwrap();
        let h = effective_hamiltonian(&s).unwrap().h_eff;
        assert_eq!(h.len(), 1);
        assert_relative_eq!(h.coefficient(&"Z".parse().unwrap()).re, 0.15, epsilon = 1e-15);
    }

    #[test]
    fn branch_cut_is_an_error() {
        let mut s = GateSequence::new("pi");
        s.push(Gate::new("X".parse().unwrap(), std::f64::consts::PI, 1.0).unwrap()).unwrap();
        assert!(matches!(effective_hamiltonian(&s), Err(SequenceError::Linalg(LinalgError::BranchCut { .. }))));
    }

    #[test]
    fn invalid_gates_rejected() {
        assert!(Gate::new("X".parse().unwrap(), f64::NAN, 1.0).is_err());
        assert!(Gate::new("X".parse().unwrap(), 0.1, 0.0).is_err());
        assert!(Gate::new("iX".parse().unwrap(), 0.1, 1.0).is_err());
        let mixed = [gens()[0], gens()[1], "IIX".parse().unwrap()];
        assert!(u123(0.1, 0.1, 0.1, &mixed, 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = echoed_u123(0.1, 0.2, 0.3, &gens(), 1.0).unwrap();
        assert_eq!(GateSequence::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn echo_removes_fourth_order_terms() {
        let phi = 0.1;
        let single = effective_hamiltonian(&u123(phi, phi, phi, &gens(), 1.0).unwrap()).unwrap().h_eff;
        let echo = effective_hamiltonian(&echoed_u123(phi, phi, phi, &gens(), 1.0).unwrap()).unwrap().h_eff;
        for t in ["IXZZ", "ZZYI"] {
            let key: PauliString = t.parse().unwrap();
            assert!(single.coefficient(&key).re.abs() > 3e-5, "{t} present before echo");
            assert!(echo.coefficient(&key).re.abs() < 1e-3 * phi.powi(4), "{t} cancelled by echo");
        }
    }

    #[test]
    fn sign_reversal_flips_only_fourth_order_terms() {
        let phi = 0.05;
        let a = effective_hamiltonian(&u123(phi, phi, phi, &gens(), 1.0).unwrap()).unwrap().h_eff;
        let b = effective_hamiltonian(&u123(-phi, phi, -phi, &gens(), 1.0).unwrap()).unwrap().h_eff;
        for t in ["IXZZ", "ZZYI"] {
            let key: PauliString = t.parse().unwrap();
            let (ca, cb) = (a.coefficient(&key).re, b.coefficient(&key).re);
            assert!((ca + cb).abs() < 1e-2 * ca.abs(), "{t}: {ca} vs {cb}");
        }
        let zzzz: PauliString = "ZZZZ".parse().unwrap();
        let (za, zb) = (a.coefficient(&zzzz).re, b.coefficient(&zzzz).re);
        assert!((za - zb).abs() < 10.0 * phi.powi(6), "{za} vs {zb}");
    }

    #[test]
    fn bch_commuting_gates_is_exact() {
        let mut s = GateSequence::new("commuting");
        s.push(Gate::new("ZI".parse().unwrap(), 0.2, 1.0).unwrap()).unwrap();
        s.push(Gate::new("IZ".parse().unwrap(), -0.5, 1.0).unwrap()).unwrap();
        s.push(Gate::new("ZZ".parse().unwrap(), 0.1, 2.0).unwrap()).unwrap();
        let b = bch_second_order(&s).unwrap();
        assert_eq!(b.coefficient(&"ZI".parse().unwrap()).re, 0.2 / 4.0);
        assert_eq!(b.coefficient(&"IZ".parse().unwrap()).re, -0.5 / 4.0);
        assert_eq!(b.coefficient(&"ZZ".parse().unwrap()).re, 0.1 / 4.0);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn bch_second_order_sign_matches_matrix_log() {
        // Two gates: the second-order term is (αβ/t)(i/2)[Σ₁, Σ₂].
        let (a, b) = (1e-3, 2e-3);
        let g = gens();
        let mut s = GateSequence::new("pair");
        s.push(Gate::new(g[0], a, 1.0).unwrap()).unwrap();
        s.push(Gate::new(g[1], b, 1.0).unwrap()).unwrap();
        let exact = effective_hamiltonian_with(&s, EffectiveOptions { prune_tol: 1e-18, ..Default::default() }).unwrap().h_eff;
        let approx = bch_second_order(&s).unwrap();
        let zzyi: PauliString = "ZZYI".parse().unwrap();
        // (i/2)·[ZYII, IXYI] = (i/2)(−2i)·ZZYI = ZZYI, times αβ/t.
        assert_relative_eq!(approx.coefficient(&zzyi).re, a * b / 2.0, epsilon = 1e-18);
        assert_relative_eq!(exact.coefficient(&zzyi).re, a * b / 2.0, max_relative = 1e-4);
    }

    #[test]
    fn bch_error_is_third_order() {
        let phis = [0.01, 0.02, 0.04, 0.08];
        let errs: Vec<f64> = phis
            .iter()
            .map(|&phi| {
                let s = u123(phi, phi, phi, &gens(), 1.0).unwrap();
                let exact = effective_hamiltonian_with(&s, EffectiveOptions { prune_tol: 1e-18, ..Default::default() }).unwrap().h_eff;
                exact.sub(&bch_second_order(&s).unwrap()).unwrap().max_abs()
            })
            .collect();
        let fit = power_law_fit(&phis, &errs, 1e-17).unwrap();
        assert!(fit.slope >= 3.0 - 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn plaquette_sequence_mirrors_vertex_sequence() {
        let phi = 0.1;
        let v = effective_hamiltonian(&echoed_u123(phi, phi, phi, &gens(), 1.0).unwrap()).unwrap().h_eff;
        let pg = plaquette_generators(&gens());
        assert_eq!(pg[0], "XZII".parse().unwrap());
        let p = effective_hamiltonian(&echoed_u123(phi, phi, phi, &pg, 1.0).unwrap()).unwrap().h_eff;
        let zzzz = v.coefficient(&"ZZZZ".parse().unwrap()).re;
        let xxxx = p.coefficient(&"XXXX".parse().unwrap()).re;
        assert!((zzzz - xxxx).abs() < 1e-15);
        let dominant = p.iter().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        assert_eq!(dominant, "XXXX".parse().unwrap());
        let back = plaquette_generators(&plaquette_generators(&pg));
        assert_eq!(back, gens());
    }

    #[test]
    fn disjoint_composition_is_exact() {
        let a = echoed_u123(0.1, 0.1, 0.1, &gens(), 1.0).unwrap();
        let shift = |s: &GateSequence, off: usize| {
            let mut out = GateSequence::new("shifted");
            for g in s.gates() {
                out.push(Gate::new(g.generator.embedded(8, off).unwrap(), g.angle, g.duration).unwrap()).unwrap();
            }
            out
        };
        let (joined, rep) = serial_compose(&shift(&a, 0), &shift(&a, 4)).unwrap();
        assert!(rep.commuting);
        assert_eq!(rep.error, 0.0);
        assert_eq!(joined.len(), 40);
    }

    #[test]
    fn ideal_parts_commute() {
        let mut v = GateSequence::new("zzzz");
        v.push(Gate::new("ZZZZ".parse().unwrap(), 0.01, 20.0).unwrap()).unwrap();
        let mut p = GateSequence::new("xxxx");
        p.push(Gate::new("XXXX".parse().unwrap(), 0.01, 20.0).unwrap()).unwrap();
        let (_, rep) = serial_compose(&v, &p).unwrap();
        assert!(rep.error < 1e-12);
    }

    #[test]
    fn cycle_time_counting() {
        let lat = TorusLattice::build(3).unwrap();
        assert_relative_eq!(estimate_cycle_time(&lat, 500e-9, 4, None).unwrap(), 720e-6, max_relative = 1e-12);
        assert_relative_eq!(estimate_cycle_time(&lat, 500e-9, 5, None).unwrap(), 900e-6, max_relative = 1e-12);
        assert_eq!(estimate_cycle_time(&lat, 0.0, 4, None).unwrap(), 0.0);
        let serial = estimate_cycle_time(&lat, 1e-6, 2, None).unwrap();
        assert_relative_eq!(estimate_cycle_time(&lat, 1e-6, 2, Some(2.0)).unwrap(), serial / 2.0);
        assert!(estimate_cycle_time(&lat, 1e-6, 0, None).is_err());
    }

    #[test]
    fn scan_preconditions() {
        let f = |phi: f64| echoed_u123(phi, phi, phi, &gens(), 1.0);
        assert!(order_scan(f, &[0.1, 0.11, 0.12], &[], ScanOptions::default()).is_err());
        assert!(order_scan(f, &[0.1, 0.11, 0.12, 0.13], &[], ScanOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sequences_are_unitary_and_log_reexponentiates(a in -0.4f64..0.4, b in -0.4f64..0.4, c in -0.4f64..0.4) {
            let s = echoed_u123(a, b, c, &gens(), 1.0).unwrap();
            let u = s.composed_unitary().unwrap();
            prop_assert!(unitarity_defect(&u) < 1e-12);
            let eff = effective_hamiltonian(&s).unwrap();
            prop_assert!(eff.asymmetry < 1e-12);
            let back = expm_hermitian(&eff.h_eff.to_dense().unwrap(), eff.total_time);
            prop_assert!(max_abs(&(back - u)) < 1e-10);
        }
    }
}
