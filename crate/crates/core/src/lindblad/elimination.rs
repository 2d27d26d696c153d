//! Effective pair-annihilation rate of one stabilizer pair coupled to a
//! strongly damped ancilla.
//!
//! Qubits: `a`, `b` hold the two stabilizer values (`|1⟩` = excited),
//! then the thermal ancilla `T` and the mixing ancilla `M`. The coupling is
//! `g(E†σ⁻_T + T_ab σ⁻_M + h.c.)` with `E† = |11⟩⟨00|` and
//! `T_ab = |01⟩⟨10|`, resonant so no system Hamiltonian enters. Starting
//! from a pair with `T` in `|0⟩`, the pair population decays at the
//! effective rate `λ*` of the reduced master equation.

use serde::Serialize;

use super::{evolve_observed, DensityMatrix, Generator, Integrator, LindbladError};
use crate::linalg::{self, SparseMatrix};
use crate::C64;

const A: usize = 0;
const B: usize = 1;
const T: usize = 2;
const M: usize = 3;
const DIM: usize = 16;

#[derive(Clone, Debug, Serialize)]
pub struct EliminationOptions {
    /// Bath parameter of the `T` ancilla.
    pub p: f64,
    /// `γ/λ` for the `M` ancilla.
    pub gamma_ratio: f64,
    /// Samples before this many `1/λ` are discarded as transient.
    pub transient: f64,
    /// Fit window in pair population.
    pub window: (f64, f64),
    /// RMS residual of `ln P(t)` above which the decay is rejected.
    pub residual_threshold: f64,
    /// Largest accepted `g/λ`.
    pub max_ratio: f64,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        Self {
            p: 0.0,
            gamma_ratio: 1.0,
            transient: 20.0,
            window: (0.05, 0.9),
            residual_threshold: 1e-2,
            max_ratio: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminationPoint {
    pub g: f64,
    pub lambda: f64,
    pub rate: f64,
    pub fit_residual: f64,
    pub samples: usize,
}

/// A fixed-exponent model `k = C g² λ^s`.
#[derive(Clone, Debug, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub lambda_power: f64,
    /// Best-fit `C`.
    pub prefactor: f64,
    /// RMS residual of `ln k`.
    pub rms_log_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminationReport {
    pub points: Vec<EliminationPoint>,
    pub g_exponent: f64,
    pub lambda_exponent: f64,
    pub log_prefactor: f64,
    pub fit_rms: f64,
    pub hypotheses: Vec<Hypothesis>,
    /// Name of the hypothesis with the smaller residual.
    pub preferred: String,
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `|out⟩⟨in|` on the listed qubits, identity elsewhere.
fn transition(ops: &[(usize, usize, usize)]) -> SparseMatrix {
    let mut t = Vec::new();
    for s in 0..DIM {
        if ops.iter().all(|&(q, _, from)| (s >> q) & 1 == from) {
            let mut out = s;
            for &(q, to, _) in ops {
                out = (out & !(1 << q)) | (to << q);
            }
            t.push((out, s, c(1.0)));
        }
    }
    SparseMatrix::from_triplets(DIM, DIM, t)
}

fn toy_generator(g: f64, lambda: f64, opts: &EliminationOptions) -> Generator {
    // E†σ⁻_T: 00 → 11 while T drops 1 → 0.
    let create = transition(&[(A, 1, 0), (B, 1, 0), (T, 0, 1)]);
    // T_ab σ⁻_M: excitation hops a → b while M drops.
    let hop = transition(&[(A, 0, 1), (B, 1, 0), (M, 0, 1)]);
    let coupling = create.add(&hop).scale(c(g));
    let h = coupling.add(&coupling.adjoint());
    let gamma = opts.gamma_ratio * lambda;
    let lower = |q| transition(&[(q, 0, 1)]);
    let raise = |q| transition(&[(q, 1, 0)]);
    let jumps = vec![
        lower(T).scale(c(((1.0 - opts.p) * lambda / 2.0).sqrt())),
        raise(T).scale(c((opts.p * lambda / 2.0).sqrt())),
        raise(M).scale(c((gamma / 4.0).sqrt())),
        lower(M).scale(c((gamma / 4.0).sqrt())),
    ];
    Generator::from_parts(h, jumps)
}

/// Pair population decay rate at one `(g, λ)`.
pub fn elimination_rate(g: f64, lambda: f64, opts: &EliminationOptions) -> Result<EliminationPoint, LindbladError> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(g >= 0.0 && g.is_finite()) {
        return Err(LindbladError::BadProbe(format!("g = {g}, λ = {lambda}")));
    }
    if g / lambda > opts.max_ratio {
        return Err(LindbladError::BadProbe(format!("g/λ = {} exceeds {}", g / lambda, opts.max_ratio)));
    }
    if g == 0.0 {
        return Ok(EliminationPoint {
            g,
            lambda,
            rate: 0.0,
            fit_residual: 0.0,
            samples: 0,
        });
    }
    let gen = toy_generator(g, lambda, opts);
    // Pair present, T in |0⟩, M maximally mixed.
    let mut rho0 = nalgebra::DMatrix::zeros(DIM, DIM);
    for m in 0..2 {
        let s = (1 << A) | (1 << B) | (m << M);
        rho0[(s, s)] = c(0.5);
    }
    let pair = transition(&[(A, 1, 1), (B, 1, 1)]);
    // Geometric sampling covers the decay without knowing its rate.
    let t0 = opts.transient / lambda;
    let horizon = 50.0 * lambda / (g * g);
    let mut times = Vec::new();
    let mut t = t0;
    while t < horizon {
        times.push(t);
        t *= 2f64.powf(1.0 / 16.0);
    }
    let mut samples = Vec::with_capacity(times.len());
    evolve_observed(&gen, &DensityMatrix::new(rho0)?, &times, &Integrator::default(), |t, s| samples.push((t, s.expectation(&pair))))?;
    let (lo, hi) = opts.window;
    let used: Vec<(f64, f64)> = samples.into_iter().filter(|&(_, p)| p > lo && p < hi).collect();
    let x: Vec<f64> = used.iter().map(|s| s.0).collect();
    let y: Vec<f64> = used.iter().map(|s| s.1.ln()).collect();
    let fit = linalg::weighted_line_fit(&x, &y, &vec![1.0; x.len()])?;
    if fit.rms_residual > opts.residual_threshold {
        return Err(LindbladError::NonMarkovian {
            g,
            lambda,
            residual: fit.rms_residual,
            threshold: opts.residual_threshold,
        });
    }
    Ok(EliminationPoint {
        g,
        lambda,
        rate: -fit.slope,
        fit_residual: fit.rms_residual,
        samples: used.len(),
    })
}

fn hypothesis(name: &str, lambda_power: f64, pts: &[&EliminationPoint]) -> Hypothesis {
    let r: Vec<f64> = pts.iter().map(|p| p.rate.ln() - 2.0 * p.g.ln() - lambda_power * p.lambda.ln()).collect();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let rms = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
    Hypothesis {
        name: name.into(),
        lambda_power,
        prefactor: mean.exp(),
        rms_log_residual: rms,
    }
}

/// Rates over the grid and a fit `ln k = a ln g + b ln λ + c`, compared
/// against `k ∝ g²λ` and `k ∝ g²/λ`.
pub fn adiabatic_elimination_probe(gs: &[f64], lambdas: &[f64], opts: &EliminationOptions) -> Result<EliminationReport, LindbladError> {
    let mut points = Vec::new();
    for &l in lambdas {
        for &g in gs {
            points.push(elimination_rate(g, l, opts)?);
        }
    }
    let fitted: Vec<&EliminationPoint> = points.iter().filter(|p| p.rate > 0.0).collect();
    if fitted.is_empty() {
        return Err(linalg::LinalgError::Underdetermined { need: 2, got: 0 }.into());
    }
    // With a single λ its column duplicates the intercept; fit g alone.
    let spans_lambda = fitted.iter().any(|p| p.lambda != fitted[0].lambda);
    let x: Vec<Vec<f64>> = fitted
        .iter()
        .map(|p| if spans_lambda { vec![p.g.ln(), p.lambda.ln()] } else { vec![p.g.ln()] })
        .collect();
    let y: Vec<f64> = fitted.iter().map(|p| p.rate.ln()).collect();
    let (mut beta, fit_rms) = linalg::multi_linear_fit(&x, &y)?;
    if !spans_lambda {
        beta.push(f64::NAN);
    }
    let hypotheses = vec![hypothesis("4 g^2 lambda", 1.0, &fitted), hypothesis("4 g^2 / lambda", -1.0, &fitted)];
    let preferred = hypotheses
        .iter()
        .min_by(|a, b| a.rms_log_residual.total_cmp(&b.rms_log_residual))
        .map(|h| h.name.clone())
        .unwrap_or_default();
    Ok(EliminationReport {
        points,
        g_exponent: beta[1],
        lambda_exponent: beta[2],
        log_prefactor: beta[0],
        fit_rms,
        hypotheses,
        preferred,
    })
}
