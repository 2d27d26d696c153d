//! Dark-state cooling against depolarizing noise.

use serde::Serialize;
use strobo_core::lattice::TorusLattice;
use strobo_core::linalg::{self, LineFit};
use strobo_core::lindblad::{
    cooling_jump_set, depolarizing_jumps, evolve_observed, excitation_density, stationary_state, DensityMatrix, Generator, Integrator,
    LindbladError,
};
use strobo_core::C64;

use crate::config::ScenarioConfig;

/// Largest `max |L(ρ)|` accepted for a steady state.
pub const DRIFT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct CoolingPoint {
    /// `Γc/Γe` with `Γc = λ*`.
    pub ratio: f64,
    pub gamma_e: f64,
    /// Mean excitation per stabilizer.
    pub nbar: f64,
    pub energy: f64,
    /// `(Δ/2) / ln((1−n̄)/n̄)`.
    pub temperature: f64,
    pub entropy: f64,
    /// `max |L(ρ)|` at the returned state.
    pub drift: f64,
    pub steady: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoolingReport {
    pub points: Vec<CoolingPoint>,
    /// Excitation density without noise after `t_final/λ*`, from a pair.
    pub noiseless_nbar: f64,
    /// Spearman correlation of temperature with the ratio.
    pub rank_correlation: f64,
    /// `T = a · Δ/ln(Γc/Γe) + b` over ratios above 1.
    pub fit: Option<(f64, f64)>,
    /// RMS residual of that fit relative to the mean temperature.
    pub fit_relative_rms: Option<f64>,
}

/// Boltzmann inversion of a per-stabilizer excitation density; a single
/// stabilizer excitation costs `Δ/2`.
pub fn boltzmann_temperature(nbar: f64, delta: f64) -> f64 {
    if nbar <= 0.0 {
        return 0.0;
    }
    let r = ((1.0 - nbar) / nbar).ln();
    if r <= 0.0 {
        f64::INFINITY
    } else {
        delta / (2.0 * r)
    }
}

fn noiseless_pair(lat: &TorusLattice, config: &ScenarioConfig) -> Result<f64, LindbladError> {
    let r = &config.rates;
    let model = cooling_jump_set(lat, r.lambda_star, r.delta)?;
    let gen = Generator::for_model(&model)?;
    let nbar = gen.observable(&excitation_density(lat)?)?;
    // Syndrome 0b11 in the stabilizer basis: two charges.
    let mut psi = vec![C64::new(0.0, 0.0); gen.dim()];
    psi[0b11] = C64::new(1.0, 0.0);
    let mut last = f64::NAN;
    let integ = Integrator::Rk45 {
        rtol: config.integrator.rtol,
        atol: config.integrator.atol,
        h_init: 1e-3,
        h_min: 1e-13,
    };
    evolve_observed(&gen, &DensityMatrix::pure(&psi)?, &[config.integrator.t_final / r.lambda_star], &integ, |_, s| {
        last = s.expectation(&nbar)
    })?;
    Ok(last)
}

/// Steady states of the cooling set with depolarizing noise at
/// `Γe = λ*/ratio` for each configured ratio.
pub fn cool_with_noise(config: &ScenarioConfig) -> Result<CoolingReport, LindbladError> {
    let lat = TorusLattice::build(config.lattice.l)?;
    let r = &config.rates;
    let density = excitation_density(&lat)?;
    let mut points = Vec::new();
    for &ratio in &config.noise.ratios {
        let gamma_e = r.lambda_star / ratio;
        let model = cooling_jump_set(&lat, r.lambda_star, r.delta)?.with_jumps(depolarizing_jumps(lat.n_links(), gamma_e)?);
        let gen = Generator::for_model(&model)?;
        let rep = stationary_state(&gen)?;
        let rho = rep.unique_state()?;
        let nbar = rho.expectation(&gen.observable(&density)?);
        points.push(CoolingPoint {
            ratio,
            gamma_e,
            nbar,
            energy: rho.expectation(gen.hamiltonian()),
            temperature: boltzmann_temperature(nbar, r.delta),
            entropy: rho.entropy(),
            drift: rep.residual,
            steady: rep.residual <= DRIFT_TOLERANCE,
        });
    }
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let temps: Vec<f64> = points.iter().map(|p| p.temperature).collect();
    let rank_correlation = if points.len() >= 2 { linalg::rank_correlation(&ratios, &temps) } else { f64::NAN };
    let fit_pts: Vec<&CoolingPoint> = points.iter().filter(|p| p.ratio > 1.0 && p.temperature.is_finite()).collect();
    let x: Vec<f64> = fit_pts.iter().map(|p| r.delta / p.ratio.ln()).collect();
    let y: Vec<f64> = fit_pts.iter().map(|p| p.temperature).collect();
    let fit: Option<LineFit> = linalg::weighted_line_fit(&x, &y, &vec![1.0; x.len()]).ok();
    let mean_t = y.iter().sum::<f64>() / y.len().max(1) as f64;
    Ok(CoolingReport {
        points,
        noiseless_nbar: noiseless_pair(&lat, config)?,
        rank_correlation,
        fit: fit.map(|f| (f.slope, f.intercept)),
        fit_relative_rms: fit.map(|f| f.rms_residual / mean_t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boltzmann_inversion_limits() {
        assert_eq!(boltzmann_temperature(0.0, 4.0), 0.0);
        assert!(boltzmann_temperature(0.5, 4.0).is_infinite());
        let t = boltzmann_temperature(0.1, 4.0);
        // n̄/(1−n̄) = e^{−Δ/(2T)}
        assert!((0.1f64 / 0.9 - (-2.0 / t).exp()).abs() < 1e-14);
    }
}
