//! Thermal ancilla preparation in a Λ-system.
//!
//! Levels `|0⟩` (ground) and `|1⟩` (metastable) form the pseudospin;
//! `|2⟩` decays quickly to `|0⟩` at rate `Γ₂₀`. A pulse of mixing angle
//! `φ` on `a ↔ b` maps `|a⟩ → cos φ|a⟩ − i sin φ|b⟩`, so a π-pulse in the
//! usual naming has `φ = π/2`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{evolve, DensityMatrix, Generator, Integrator, LindbladError};
use crate::linalg::SparseMatrix;
use crate::C64;

/// Minimum Rabi frequency over `Γ₂₀`; slower pulses lose coherence to the
/// decay while they run.
pub const MIN_RABI_RATIO: f64 = 100.0;
/// Waits last this many lifetimes of `|2⟩`.
pub const WAIT_LIFETIMES: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PumpStep {
    Pulse { from: usize, to: usize, mixing_angle: f64 },
    Wait { duration: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PumpProtocol {
    pub theta: f64,
    pub gamma20: f64,
    /// Rabi frequency of every pulse.
    pub rabi: f64,
    /// Level spacing that `T_eff` is quoted against.
    pub delta: f64,
    pub steps: Vec<PumpStep>,
    /// Populations of `|0⟩, |1⟩, |2⟩` before step i.
    pub initial: [f64; 3],
}

impl PumpProtocol {
    /// Steps i–v: π-pulse 1→2, wait, π-pulse 0→1, θ-pulse 1→2, wait.
    pub fn standard(theta: f64, gamma20: f64, rabi: f64, delta: f64) -> Self {
        let wait = PumpStep::Wait {
            duration: WAIT_LIFETIMES / gamma20,
        };
        let pulse = |from, to, mixing_angle| PumpStep::Pulse { from, to, mixing_angle };
        Self {
            theta,
            gamma20,
            rabi,
            delta,
            steps: vec![pulse(1, 2, FRAC_PI_2), wait, pulse(0, 1, FRAC_PI_2), pulse(1, 2, theta), wait],
            initial: [0.5, 0.5, 0.0],
        }
    }

    /// Steps i–ii only: the ancilla ends in `|0⟩`.
    pub fn ground_only(gamma20: f64, rabi: f64, delta: f64) -> Self {
        let mut p = Self::standard(FRAC_PI_2, gamma20, rabi, delta);
        p.steps.truncate(2);
        p
    }

    /// Hard errors, then advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>, LindbladError> {
        let bad = |m: String| Err(LindbladError::BadProtocol(m));
        if !(self.gamma20.is_finite() && self.gamma20 > 0.0) {
            return bad(format!("gamma20 = {}", self.gamma20));
        }
        if !(self.rabi.is_finite() && self.rabi > 0.0) {
            return bad(format!("rabi = {}", self.rabi));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.theta) {
            return bad(format!("theta = {} outside [0, π/2]", self.theta));
        }
        let pops: f64 = self.initial.iter().sum();
        if self.initial.iter().any(|&p| p < 0.0) || (pops - 1.0).abs() > 1e-12 {
            return bad(format!("initial populations {:?}", self.initial));
        }
        for s in &self.steps {
            match *s {
                PumpStep::Pulse { from, to, mixing_angle } => {
                    if from > 2 || to > 2 || from == to || !mixing_angle.is_finite() || mixing_angle < 0.0 {
                        return bad(format!("{s:?}"));
                    }
                }
                PumpStep::Wait { duration } => {
                    if !(duration.is_finite() && duration >= 0.0) {
                        return bad(format!("{s:?}"));
                    }
                }
            }
        }
        let mut warnings = Vec::new();
        if self.rabi < MIN_RABI_RATIO * self.gamma20 {
            warnings.push(format!(
                "Rabi frequency {} is below {MIN_RABI_RATIO}x gamma20 = {}; pulses will be distorted by decay",
                self.rabi, self.gamma20
            ));
        }
        if !matches!(self.steps.last(), Some(PumpStep::Wait { .. })) {
            warnings.push("protocol does not end with a wait; level 2 may stay populated".into());
        }
        Ok(warnings)
    }

    /// `T_eff = Δ / (2 ln cot θ)`: zero at both ends of `[0, π/2]`,
    /// infinite at `π/4` and negative above it.
    pub fn effective_temperature(&self) -> f64 {
        let cot = self.theta.cos() / self.theta.sin();
        if self.theta == 0.0 || cot.abs() < 1e-12 {
            return 0.0;
        }
        let l = cot.ln();
        if l.abs() < 1e-12 {
            f64::INFINITY
        } else {
            self.delta / (2.0 * l)
        }
    }

    /// `diag{sin²θ, cos²θ}`.
    pub fn closed_form(&self) -> [f64; 2] {
        [self.theta.sin().powi(2), self.theta.cos().powi(2)]
    }
}

#[derive(Clone, Debug)]
pub struct PumpResult {
    /// Reduced `{|0⟩, |1⟩}` block, renormalized.
    pub rho: DMatrix<C64>,
    pub populations: [f64; 2],
    pub closed_form: [f64; 2],
    /// Largest deviation of any reduced matrix element from the closed form.
    pub deviation: f64,
    pub residual_excited: f64,
    pub t_eff: f64,
    pub total_time: f64,
    pub warnings: Vec<String>,
}

/// Runs the 3-level master equation through the pulse schedule.
pub fn pump_ancilla(protocol: &PumpProtocol) -> Result<PumpResult, LindbladError> {
    let mut warnings = protocol.validate()?;
    let c = |x: f64| C64::new(x, 0.0);
    let decay = SparseMatrix::from_triplets(3, 3, vec![(0, 2, c((protocol.gamma20 / 2.0).sqrt()))]);
    let mut rho = DensityMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, protocol.initial.iter().map(|&p| c(p)))))?;
    let integ = Integrator::Rk45 {
        rtol: 1e-11,
        atol: 1e-13,
        h_init: 1e-3 / protocol.rabi,
        h_min: 1e-16,
    };
    let mut total_time = 0.0;
    for step in &protocol.steps {
        let (h, duration) = match *step {
            PumpStep::Pulse { from, to, mixing_angle } => {
                let w = c(protocol.rabi / 2.0);
                (SparseMatrix::from_triplets(3, 3, vec![(from, to, w), (to, from, w)]), 2.0 * mixing_angle / protocol.rabi)
            }
            PumpStep::Wait { duration } => (SparseMatrix::zeros(3, 3), duration),
        };
        if duration == 0.0 {
            continue;
        }
        let g = Generator::from_parts(h, vec![decay.clone()]);
        rho = evolve(&g, &rho, &[duration], &integ)?.states.pop().expect("one sample");
        total_time += duration;
    }
    let m = rho.matrix();
    let residual_excited = m[(2, 2)].re;
    if residual_excited > 1e-8 {
        warnings.push(format!("residual |2> population {residual_excited:.3e} after the schedule"));
    }
    let kept = m[(0, 0)].re + m[(1, 1)].re;
    let reduced = m.view((0, 0), (2, 2)).into_owned() / c(kept);
    let closed_form = protocol.closed_form();
    let target = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(closed_form[0]), c(closed_form[1])]));
    Ok(PumpResult {
        populations: [reduced[(0, 0)].re, reduced[(1, 1)].re],
        deviation: crate::linalg::max_abs(&(&reduced - target)),
        rho: reduced,
        closed_form,
        residual_excited,
        t_eff: protocol.effective_temperature(),
        total_time,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    #[test]
    fn pumped_state_matches_closed_form() {
        for theta in [0.0, FRAC_PI_6, FRAC_PI_4, FRAC_PI_2] {
            let p = PumpProtocol::standard(theta, 1.0, 1e5, 4.0);
            let r = pump_ancilla(&p).unwrap();
            assert!(r.deviation < 1e-4, "θ={theta}: {:?}", r.populations);
            assert!(r.residual_excited < 1e-8);
            assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        }
    }

    #[test]
    fn effective_temperature_limits() {
        let t = |theta| PumpProtocol::standard(theta, 1.0, 1e5, 4.0).effective_temperature();
        assert_eq!(t(FRAC_PI_2), 0.0);
        assert_eq!(t(0.0), 0.0);
        assert!(t(FRAC_PI_4).is_infinite());
        let want = 4.0 / (2.0 * (FRAC_PI_6.cos() / FRAC_PI_6.sin()).ln());
        assert!((t(FRAC_PI_6) - want).abs() < 1e-12);
    }

    #[test]
    fn slow_pulses_are_flagged_and_distorted() {
        let p = PumpProtocol::standard(FRAC_PI_6, 1.0, 10.0, 4.0);
        let r = pump_ancilla(&p).unwrap();
        assert!(!r.warnings.is_empty());
        assert!(r.deviation > 1e-3);
    }

    #[test]
    fn ground_only_shortcut_pumps_to_ground() {
        let r = pump_ancilla(&PumpProtocol::ground_only(1.0, 1e5, 4.0)).unwrap();
        assert!((r.populations[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_protocols_rejected() {
        let mut p = PumpProtocol::standard(0.3, 1.0, 1e5, 4.0);
        p.gamma20 = 0.0;
        assert!(pump_ancilla(&p).is_err());
        let p = PumpProtocol::standard(2.0, 1.0, 1e5, 4.0);
        assert!(pump_ancilla(&p).is_err());
    }
}
