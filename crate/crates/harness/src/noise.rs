//! Gate noise and the entropy it injects per stroboscopic cycle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use strobo_core::linalg::{self, von_neumann_entropy};
use strobo_core::pauli::{Pauli, PauliString};
use strobo_core::sequence::{echoed_u123, vertex_generators, GateSequence, SequenceError};
use strobo_core::C64;

use crate::config::ScenarioConfig;

/// Error channel applied after every elementary gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// `ρ → (1−ε)ρ + ε/(4^k−1) Σ_{P≠I} PρP` over the `k` qubits of the
    /// gate's support.
    #[default]
    Depolarizing,
    /// `ρ → (1−ε)ρ + ε/k Σ_q Z_q ρ Z_q`.
    Dephasing,
}

impl Channel {
    /// Pauli errors and their probabilities given an error per gate.
    pub fn errors(self, n: usize, support: &[usize], epg: f64) -> Vec<(f64, PauliString)> {
        let k = support.len();
        match self {
            Self::Depolarizing => {
                let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
                let total = 4usize.pow(k as u32) - 1;
                (1..=total)
                    .map(|code| {
                        let ops: Vec<(usize, Pauli)> = support.iter().enumerate().map(|(i, &q)| (q, letters[(code >> (2 * i)) & 3])).collect();
                        (epg / total as f64, PauliString::from_sparse(n, &ops).expect("support inside register"))
                    })
                    .collect()
            }
            Self::Dephasing => support
                .iter()
                .map(|&q| (epg / k as f64, PauliString::single(n, q, Pauli::Z).expect("support inside register")))
                .collect(),
        }
    }

    /// Applies the channel in place.
    pub fn apply(self, rho: &mut DMatrix<C64>, n: usize, support: &[usize], epg: f64) {
        if epg == 0.0 || support.is_empty() {
            return;
        }
        let d = rho.nrows();
        let mut acc = &*rho * C64::new(1.0 - epg, 0.0);
        for (w, p) in self.errors(n, support, epg) {
            // P|j⟩ = c_j|r_j⟩, so (PρP†)[r_j, r_k] = c_j ρ[j,k] c̄_k.
            let cols: Vec<(usize, C64)> = (0..d as u64).map(|j| (p.column(j).0 as usize, p.column(j).1)).collect();
            for k in 0..d {
                let (rk, ck) = cols[k];
                for j in 0..d {
                    let (rj, cj) = cols[j];
                    acc[(rj, rk)] += cj * rho[(j, k)] * ck.conj() * w;
                }
            }
        }
        *rho = acc;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Error probability per elementary gate.
    pub epg: f64,
    pub channel: Channel,
    /// Error rates for the entropy sweep.
    pub epg_sweep: Vec<f64>,
    /// `Γc/Γe` ratios for the cooling sweep.
    pub ratios: Vec<f64>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            epg: 0.0,
            channel: Channel::Depolarizing,
            epg_sweep: vec![1e-4, 3e-4, 1e-3],
            ratios: Vec::new(),
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let ok = |e: f64| (0.0..0.5).contains(&e);
        if !ok(self.epg) {
            errs.push(format!("noise.epg = {}: need 0 ≤ EPG < 1/2", self.epg));
        }
        if let Some(e) = self.epg_sweep.iter().find(|&&e| !ok(e)) {
            errs.push(format!("noise.epg_sweep contains {e}: need 0 ≤ EPG < 1/2"));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            errs.push(format!("noise.ratios contains {r}: ratios must be positive"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyPoint {
    pub epg: f64,
    /// Entropy after one cycle minus the initial (zero) entropy.
    pub delta_s: f64,
    /// `ΔS / (EPG · gates)`.
    pub per_gate: f64,
    pub trace_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub gates: usize,
    pub noiseless: f64,
    pub points: Vec<EntropyPoint>,
    /// Log-log slope of ΔS against EPG over the non-zero rates.
    pub exponent: Option<f64>,
    pub fit_rms: Option<f64>,
}

/// One cycle of `seq` from `psi`, with `channel` after every gate.
pub fn noisy_cycle(seq: &GateSequence, psi: &[C64], channel: Channel, epg: f64) -> Result<DMatrix<C64>, SequenceError> {
    let n = seq.n_qubits().ok_or(SequenceError::Empty)?;
    let v = nalgebra::DVector::from_column_slice(psi);
    let mut rho = &v * v.adjoint();
    for g in seq.gates() {
        let u = g.unitary()?;
        rho = &u * rho * u.adjoint();
        channel.apply(&mut rho, n, &g.generator.support(), epg);
    }
    Ok(rho)
}

/// Entropy after one noisy echoed vertex cycle from `|0000⟩`, swept over
/// the configured error rates.
pub fn entropy_per_gate(config: &ScenarioConfig) -> Result<EntropyReport, SequenceError> {
    let (a, b, c) = config.angles.triple();
    let seq = echoed_u123(a, b, c, &vertex_generators(), config.angles.tau)?;
    let n = seq.n_qubits().ok_or(SequenceError::Empty)?;
    let mut psi = vec![C64::new(0.0, 0.0); 1 << n];
    psi[0] = C64::new(1.0, 0.0);
    let run = |epg: f64| -> Result<(f64, f64), SequenceError> {
        let rho = noisy_cycle(&seq, &psi, config.noise.channel, epg)?;
        Ok((von_neumann_entropy(&rho), (rho.trace().re - 1.0).abs()))
    };
    let noiseless = run(0.0)?.0;
    let mut points = Vec::new();
    for &epg in &config.noise.epg_sweep {
        let (s, tr) = run(epg)?;
        points.push(EntropyPoint {
            epg,
            delta_s: s - noiseless,
            per_gate: if epg > 0.0 { (s - noiseless) / (epg * seq.len() as f64) } else { 0.0 },
            trace_error: tr,
        });
    }
    let used: Vec<&EntropyPoint> = points.iter().filter(|p| p.epg > 0.0 && p.delta_s > 0.0).collect();
    let x: Vec<f64> = used.iter().map(|p| p.epg.ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.delta_s.ln()).collect();
    let fit = linalg::weighted_line_fit(&x, &y, &vec![1.0; x.len()]).ok();
    Ok(EntropyReport {
        gates: seq.len(),
        noiseless,
        points,
        exponent: fit.map(|f| f.slope),
        fit_rms: fit.map(|f| f.rms_residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioKind;
    use proptest::prelude::*;

    fn random_state(n: usize, seed: u64) -> DMatrix<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let t = m.trace();
        m / t
    }

    #[test]
    fn depolarizing_fixes_the_maximally_mixed_state() {
        let d = 8;
        let mut rho = DMatrix::identity(d, d) / C64::new(d as f64, 0.0);
        let before = rho.clone();
        Channel::Depolarizing.apply(&mut rho, 3, &[0, 2], 0.3);
        assert!(linalg::max_abs(&(rho - before)) < 1e-15);
    }

    #[test]
    fn full_depolarizing_of_one_qubit() {
        // At ε = 3/4 the single-qubit channel is the complete depolarizer.
        let mut rho = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]));
        Channel::Depolarizing.apply(&mut rho, 1, &[0], 0.75);
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho[(1, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_error_rate_leaves_pure_state() {
        let mut c = ScenarioConfig::defaults(ScenarioKind::CoolWithNoise);
        c.noise.epg_sweep = vec![0.0, 1e-3];
        let r = entropy_per_gate(&c).unwrap();
        assert_eq!(r.gates, 20);
        assert!(r.noiseless.abs() < 1e-10);
        assert!(r.points[0].delta_s.abs() < 1e-10);
        assert!(r.points[1].delta_s > 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn channels_are_trace_preserving_and_positive(seed in 0u64..1000, epg in 0.0f64..0.5, q in 0usize..3, dephase in any::<bool>()) {
            let mut rho = random_state(3, seed);
            let ch = if dephase { Channel::Dephasing } else { Channel::Depolarizing };
            let s0 = von_neumann_entropy(&rho);
            ch.apply(&mut rho, 3, &[q, (q + 1) % 3], epg);
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
            let (vals, _) = linalg::eigh(&rho);
            prop_assert!(vals[0] > -1e-12);
            // Unital channels never lower the entropy.
            prop_assert!(von_neumann_entropy(&rho) >= s0 - 1e-10);
        }
    }
}
