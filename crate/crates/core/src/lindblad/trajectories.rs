//! Monte Carlo wave-function unraveling of the same master equation.
//!
//! Between jumps `ψ` follows `iψ̇ = H_eff ψ` without renormalization; a jump
//! fires when `‖ψ‖²` falls to a uniform draw `r`, and channel `c` is picked
//! with probability proportional to `‖cψ‖²`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Generator, LindbladError};
use crate::linalg::{czero, SparseMatrix};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const BISECTIONS: usize = 40;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// RK4 step for the no-jump evolution.
    pub dt: f64,
    /// Ascending sample times.
    pub times: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryStats {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `mean[observable][time]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub total_jumps: usize,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,observable,mean,stderr\n";

impl TrajectoryStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_CSV_HEADER);
        for (ti, t) in self.times.iter().enumerate() {
            for (k, name) in self.names.iter().enumerate() {
                let _ = writeln!(out, "{t},{name},{:.12e},{:.6e}", self.mean[k][ti], self.stderr[k][ti]);
            }
        }
        out
    }
}

fn no_jump_step(heff: &SparseMatrix, psi: &[C64], h: f64, scratch: &mut [Vec<C64>; 5], out: &mut [C64]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    let f = |v: &[C64], o: &mut [C64]| {
        heff.apply(v, o);
        o.iter_mut().for_each(|x| *x *= -I);
    };
    f(psi, k1);
    tmp.iter_mut().zip(psi.iter().zip(k1.iter())).for_each(|(t, (p, k))| *t = p + k * (h / 2.0));
    f(tmp, k2);
    tmp.iter_mut().zip(psi.iter().zip(k2.iter())).for_each(|(t, (p, k))| *t = p + k * (h / 2.0));
    f(tmp, k3);
    tmp.iter_mut().zip(psi.iter().zip(k3.iter())).for_each(|(t, (p, k))| *t = p + k * h);
    f(tmp, k4);
    for i in 0..psi.len() {
        out[i] = psi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

struct Sample {
    /// `[observable][time]`
    values: Vec<Vec<f64>>,
    jumps: usize,
}

fn one_trajectory(gen: &Generator, psi0: &[C64], observables: &[SparseMatrix], opts: &TrajectoryOptions, index: usize) -> Sample {
    let d = psi0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let heff = gen.h_eff();
    let mut scratch: [Vec<C64>; 5] = std::array::from_fn(|_| vec![czero(); d]);
    let mut next = vec![czero(); d];
    let mut psi = psi0.to_vec();
    let mut r: f64 = rng.gen();
    let mut t = 0.0;
    let mut jumps = 0;
    let mut values = vec![Vec::with_capacity(opts.times.len()); observables.len()];
    let mut cpsi = vec![czero(); d];
    for &ts in &opts.times {
        while ts - t > 1e-12 * ts.max(1.0) {
            let h = opts.dt.min(ts - t);
            no_jump_step(heff, &psi, h, &mut scratch, &mut next);
            if norm2(&next) > r {
                std::mem::swap(&mut psi, &mut next);
                t += h;
                continue;
            }
            // Locate the crossing inside the step.
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                no_jump_step(heff, &psi, mid, &mut scratch, &mut next);
                if norm2(&next) > r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            no_jump_step(heff, &psi, hi, &mut scratch, &mut next);
            std::mem::swap(&mut psi, &mut next);
            t += hi;
            let weights: Vec<f64> = gen
                .jumps()
                .iter()
                .map(|c| {
                    c.apply(&psi, &mut cpsi);
                    norm2(&cpsi)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                let mut u = rng.gen::<f64>() * total;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = i;
                        break;
                    }
                    u -= w;
                }
                gen.jumps()[pick].apply(&psi, &mut next);
                let nrm = norm2(&next).sqrt();
                psi.iter_mut().zip(&next).for_each(|(p, x)| *p = x / nrm);
                jumps += 1;
            }
            r = rng.gen();
        }
        t = ts;
        let w = norm2(&psi);
        for (o, vals) in observables.iter().zip(values.iter_mut()) {
            vals.push(o.expectation(&psi).re / w);
        }
    }
    Sample { values, jumps }
}

/// Sample statistics of `observables` (working basis) over `n_samples`
/// trajectories from `psi0` (working basis). Trajectory `i` draws from
/// stream `i` of a generator seeded with `seed`, so results do not depend
/// on scheduling.
pub fn trajectories(gen: &Generator, psi0: &[C64], observables: &[(String, SparseMatrix)], opts: &TrajectoryOptions) -> Result<TrajectoryStats, LindbladError> {
    if psi0.len() != gen.dim() {
        return Err(LindbladError::Register {
            got: psi0.len(),
            expected: gen.dim(),
        });
    }
    if !(opts.dt > 0.0) || opts.times.windows(2).any(|w| w[1] < w[0]) || opts.times.first().is_some_and(|&t| t < 0.0) {
        return Err(LindbladError::InvalidState("bad step or sample times".into()));
    }
    let nrm = norm2(psi0).sqrt();
    if !(nrm > 0.0) {
        return Err(LindbladError::InvalidState("zero initial state".into()));
    }
    let psi0: Vec<C64> = psi0.iter().map(|a| a / nrm).collect();
    let ops: Vec<SparseMatrix> = observables.iter().map(|(_, o)| o.clone()).collect();
    let samples: Vec<Sample> = (0..opts.n_samples).into_par_iter().map(|i| one_trajectory(gen, &psi0, &ops, opts, i)).collect();
    let n = samples.len() as f64;
    let nt = opts.times.len();
    let mut mean = vec![vec![0.0; nt]; ops.len()];
    let mut stderr = vec![vec![0.0; nt]; ops.len()];
    for k in 0..ops.len() {
        for ti in 0..nt {
            let m = samples.iter().map(|s| s.values[k][ti]).sum::<f64>() / n;
            let var = if samples.len() > 1 {
                samples.iter().map(|s| (s.values[k][ti] - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            mean[k][ti] = m;
            stderr[k][ti] = (var / n).sqrt();
        }
    }
    Ok(TrajectoryStats {
        times: opts.times.clone(),
        names: observables.iter().map(|(s, _)| s.clone()).collect(),
        mean,
        stderr,
        n_samples: opts.n_samples,
        total_jumps: samples.iter().map(|s| s.jumps).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusLattice;
    use crate::lindblad::{evolve_observed, thermal_jump_set, DensityMatrix, Integrator};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn zero_rates_give_identical_pure_samples() {
        let h = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(0.5)), (1, 0, c(0.5))]);
        let g = Generator::from_parts(h, vec![]);
        let z = SparseMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0)), (1, 1, c(-1.0))]);
        let opts = TrajectoryOptions {
            n_samples: 16,
            seed: 3,
            dt: 0.01,
            times: vec![1.0, 2.0],
        };
        let s = trajectories(&g, &[c(1.0), c(0.0)], &[("z".into(), z)], &opts).unwrap();
        assert_eq!(s.total_jumps, 0);
        for (ti, t) in s.times.iter().enumerate() {
            assert!((s.mean[0][ti] - t.cos()).abs() < 1e-8);
            assert!(s.stderr[0][ti] < 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let h = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(0.5)), (1, 0, c(0.5))]);
        let j = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(0.5))]);
        let g = Generator::from_parts(h, vec![j]);
        let z = SparseMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0)), (1, 1, c(-1.0))]);
        let opts = TrajectoryOptions {
            n_samples: 50,
            seed: 11,
            dt: 0.02,
            times: vec![0.5, 1.0, 3.0],
        };
        let obs = [("z".to_string(), z)];
        let a = trajectories(&g, &[c(0.0), c(1.0)], &obs, &opts).unwrap();
        let b = trajectories(&g, &[c(0.0), c(1.0)], &obs, &opts).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn thermal_energy_matches_dense_evolution() {
        let lat = TorusLattice::build(2).unwrap();
        let m = thermal_jump_set(&lat, 0.3, 1.0, 1.0, 4.0).unwrap();
        let g = Generator::for_model(&m).unwrap();
        let times = vec![0.25, 0.5, 1.0];
        let mut psi = vec![c(0.0); 256];
        psi[0] = c(1.0);
        let mut dense = Vec::new();
        evolve_observed(&g, &DensityMatrix::pure(&psi).unwrap(), &times, &Integrator::default(), |_, s| dense.push(s.expectation(g.hamiltonian()))).unwrap();
        let run = |n| {
            let opts = TrajectoryOptions {
                n_samples: n,
                seed: 2024,
                dt: 0.01,
                times: times.clone(),
            };
            trajectories(&g, &psi, &[("energy".into(), g.hamiltonian().clone())], &opts).unwrap()
        };
        let s = run(2000);
        for (ti, e) in dense.iter().enumerate() {
            let z = (s.mean[0][ti] - e).abs() / s.stderr[0][ti];
            assert!(z < 3.0, "t={} mc={} dense={} se={}", times[ti], s.mean[0][ti], e, s.stderr[0][ti]);
        }
        let half = run(1000);
        let ratio = half.stderr[0][2] / s.stderr[0][2];
        assert!((ratio - 2f64.sqrt()).abs() < 0.15, "{ratio}");
    }
}
