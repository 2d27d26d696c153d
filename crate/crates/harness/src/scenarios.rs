//! Dispatch from a validated configuration to the core modules.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;
use strobo_core::lattice::{LatticeError, TorusLattice};
use strobo_core::lindblad::{
    adiabatic_elimination_probe, evolve_observed, excitation_density, pump_ancilla, stationary_state, thermal_jump_set, trajectories,
    DensityMatrix, EliminationOptions, Generator, Integrator, LindbladError, PumpProtocol, TrajectoryOptions,
};
use strobo_core::pauli::PauliString;
use strobo_core::sequence::{
    echoed_u123, effective_hamiltonian, estimate_cycle_time, order_scan, plaquette_generators, power_law_fit, serial_compose, u123,
    vertex_generators, EffectiveHamiltonianReport, ScanOptions, SequenceError, VertexPrediction,
};
use strobo_core::spectra::{
    build_hamiltonian, fidelity_scan, lowest_eigenpairs, lowest_eigenpairs_by_sector, SolverOptions, SpectraError, SpectrumResult,
};
use strobo_core::C64;

use crate::config::{ConfigErrors, ScenarioConfig, ScenarioKind};
use crate::cooling::cool_with_noise;
use crate::noise::entropy_per_gate;
use crate::output::{
    emit_figure_data, with_schema, write_atomic, Assertion, FigureInput, FigureKind, Metrics, RunRecord, Versions, OMEGA_DEFINITION,
    OUT_DIR_ENV, RUN_SCHEMA,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Everything a scenario produced, before anything touches the disk.
#[derive(Debug)]
pub struct Outcome {
    pub record: RunRecord,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

#[derive(Default)]
struct Ctx {
    metrics: Metrics,
    assertions: Vec<Assertion>,
    warnings: Vec<String>,
    files: Vec<(String, String)>,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl Ctx {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn file(&mut self, name: &str, schema: &str, body: String) {
        self.files.push((name.into(), with_schema(schema, &body)));
    }

    fn note(&mut self, key: &str, v: serde_json::Value) {
        self.summary.insert(key.into(), v);
    }
}

/// Directory the run writes to: `$STROBO_OUT_DIR` if set, else
/// `output.dir`.
pub fn out_dir(config: &ScenarioConfig) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| config.output.dir.clone(), PathBuf::from)
}

/// Validates, computes and returns the outcome without writing.
pub fn execute(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    config.validate()?;
    let start = Instant::now();
    let mut ctx = Ctx::default();
    match config.kind {
        ScenarioKind::SequenceOrderScan => sequence_scan(config, &mut ctx)?,
        ScenarioKind::Spectrum => spectrum(config, &mut ctx)?,
        ScenarioKind::FidelityScan => fidelity(config, &mut ctx)?,
        ScenarioKind::Thermalize => thermalize(config, &mut ctx)?,
        ScenarioKind::CoolWithNoise => cool(config, &mut ctx)?,
        ScenarioKind::Pump => pump(config, &mut ctx)?,
        ScenarioKind::Eliminate => eliminate(config, &mut ctx)?,
    }
    let prefix = config.prefix().to_string();
    let mut files: Vec<(String, String)> = ctx.files.into_iter().map(|(n, s)| (format!("{prefix}.{n}"), s)).collect();
    files.push((format!("{prefix}.metrics.csv"), ctx.metrics.to_csv()));
    let record = RunRecord {
        schema: RUN_SCHEMA,
        kind: config.kind.name().into(),
        config_hash: config.hash(),
        seed: config.seed,
        versions: Versions::default(),
        omega_definition: OMEGA_DEFINITION,
        wall_time_s: start.elapsed().as_secs_f64(),
        assertions: ctx.assertions,
        warnings: ctx.warnings,
        summary: serde_json::Value::Object(ctx.summary),
        metrics: ctx.metrics,
        outputs: files.iter().map(|(n, _)| PathBuf::from(n)).collect(),
    };
    Ok(Outcome { record, files })
}

/// Validates, computes and writes every output plus `<prefix>.record.json`.
pub fn run(config: &ScenarioConfig) -> Result<RunRecord, RunError> {
    let Outcome { mut record, files } = execute(config)?;
    let dir = out_dir(config);
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        write_atomic(&path, body).map_err(|source| RunError::Io { path, source })
    };
    for (name, body) in &files {
        write(name, body)?;
    }
    record.outputs = files.iter().map(|(n, _)| dir.join(n)).collect();
    write(&format!("{}.record.json", config.prefix()), &record.to_json())?;
    Ok(record)
}

fn p(s: &str) -> PauliString {
    s.parse().expect("static string")
}

fn sequence_scan(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let a = &c.angles;
    let gens = vertex_generators();
    let pgens = plaquette_generators(&gens);
    let single = |s: f64| {
        let (x, y, z) = a.scaled(s);
        u123(x, y, z, &gens, a.tau)
    };
    let echoed = |s: f64| {
        let (x, y, z) = a.scaled(s);
        echoed_u123(x, y, z, &gens, a.tau)
    };
    let single_scan = order_scan(single, &a.scan, &[], ScanOptions::default())?;
    let echoed_scan = order_scan(echoed, &a.scan, &[p("ZZZZ"), p("IXYI")], ScanOptions::default())?;

    let mut comp = String::from("phi,composition_error\n");
    let mut errors = Vec::new();
    for &s in &a.scan {
        let (x, y, z) = a.scaled(s);
        let (_, rep) = serial_compose(&echoed_u123(x, y, z, &gens, a.tau)?, &echoed_u123(x, y, z, &pgens, a.tau)?)?;
        let _ = writeln!(comp, "{s},{:.15e}", rep.error);
        errors.push(rep.error);
    }
    let comp_fit = power_law_fit(&a.scan, &errors, 1e-17).map_err(SequenceError::from)?;

    for (i, &s) in a.scan.iter().enumerate() {
        ctx.metrics.push(i, s, "single_residual_norm", single_scan.residual_norms[i]);
        ctx.metrics.push(i, s, "echoed_residual_norm", echoed_scan.residual_norms[i]);
        ctx.metrics.push(i, s, "composition_error", errors[i]);
    }

    for t in ["IXZZ", "ZZYI"] {
        let slope = single_scan.term(t).and_then(|ts| ts.slope());
        ctx.check(
            &format!("single_{t}_order_4"),
            slope.is_some_and(|s| (s - 4.0).abs() <= 0.3),
            format!("slope {slope:?}, want 4.0 ± 0.3"),
        );
    }
    let echo_slope = echoed_scan.residual_fit.map(|f| f.slope);
    ctx.check("echoed_residual_order", echo_slope.is_some_and(|s| s >= 5.5), format!("slope {echo_slope:?}, want ≥ 5.5"));
    ctx.check(
        "serial_composition_order",
        comp_fit.slope >= 6.5,
        format!("slope {:.3}, want ≥ 6.5", comp_fit.slope),
    );

    let (x, y, z) = a.triple();
    let eff = effective_hamiltonian(&echoed_u123(x, y, z, &gens, a.tau)?)?;
    let pred = VertexPrediction {
        alpha: x,
        beta: y,
        gamma: z,
        tau: a.tau,
    };
    let report = EffectiveHamiltonianReport::new(&eff, &pred.echoed_terms());
    let lat = TorusLattice::build(c.lattice.l)?;
    let cycle = estimate_cycle_time(&lat, a.tau, 4, None)?;
    ctx.note("cycle_time", json!({ "value": cycle, "units": "tau", "gates_per_u": 4 }));
    ctx.note("chi", json!(pred.chi()));
    ctx.note("j_e_predicted", json!(pred.j_e()));
    ctx.note("single_slopes", json!({ "IXZZ": single_scan.term("IXZZ").and_then(|t| t.slope()), "ZZYI": single_scan.term("ZZYI").and_then(|t| t.slope()) }));
    ctx.note("echoed_residual_slope", json!(echo_slope));
    ctx.note("composition_slope", json!(comp_fit.slope));
    ctx.file("order_single.csv", "strobo.order_scan/1", single_scan.to_csv());
    ctx.file("order_echoed.csv", "strobo.order_scan/1", echoed_scan.to_csv());
    ctx.file("composition.csv", "strobo.composition/1", comp);
    ctx.file("effective_terms.csv", "strobo.effective_terms/1", report.to_csv());
    Ok(())
}

fn solver(c: &ScenarioConfig) -> SolverOptions {
    SolverOptions {
        tol: c.hamiltonian.tol,
        seed: c.seed,
        ..SolverOptions::default()
    }
}

fn spectrum(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let lat = TorusLattice::build(c.lattice.l)?;
    let h = &c.hamiltonian;
    let opts = solver(c);
    let mut points: Vec<(f64, f64, SpectrumResult)> = Vec::new();
    for (i, &chi) in h.chis.iter().enumerate() {
        let ham = build_hamiltonian(&lat, 1.0, 1.0, chi, h.h_z, h.pairs)?;
        let spec = match lowest_eigenpairs_by_sector(&lat, &ham, h.levels, &opts) {
            Err(SpectraError::NotSymmetric(_)) => lowest_eigenpairs(&ham, h.levels, &opts)?,
            other => other?,
        };
        let e = &spec.eigenvalues;
        ctx.metrics.push(i, chi, "ground_energy", e[0]);
        ctx.metrics.push(i, chi, "spread", e[3] - e[0]);
        ctx.metrics.push(i, chi, "gap", e[4] - e[3]);
        let worst = spec.residuals.iter().copied().fold(0.0, f64::max);
        ctx.check(&format!("converged_chi_{chi}"), worst <= 10.0 * h.tol, format!("largest residual {worst:.3e}"));
        points.push((chi, h.h_z, spec));
    }
    ctx.files.push(("spectrum.csv".into(), emit_figure_data(FigureKind::Spectrum, FigureInput::Spectra(&points))));
    Ok(())
}

fn fidelity(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let lat = TorusLattice::build(c.lattice.l)?;
    let h = &c.hamiltonian;
    let scan = fidelity_scan(&lat, &h.chis, h.h_z, h.pairs, &solver(c))?;
    for (i, pt) in scan.points.iter().enumerate() {
        match &pt.result {
            Ok(r) => {
                ctx.metrics.push(i, pt.chi, "subspace_fidelity", r.fidelity.subspace);
                ctx.metrics.push(i, pt.chi, "gap", r.gap);
                ctx.metrics.push(i, pt.chi, "spread", r.spread);
            }
            Err(e) => ctx.warnings.push(format!("χ = {}: {e}", pt.chi)),
        }
    }
    let failed = scan.points.iter().filter(|p| p.result.is_err()).count();
    ctx.check("all_points_solved", failed == 0, format!("{failed} of {} points failed", scan.points.len()));
    ctx.files.push(("fidelity.csv".into(), emit_figure_data(FigureKind::Fidelity, FigureInput::Scan(&scan))));
    ctx.files.push(("spectrum.csv".into(), emit_figure_data(FigureKind::Spectrum, FigureInput::Scan(&scan))));
    Ok(())
}

fn sample_times(c: &ScenarioConfig) -> Vec<f64> {
    let n = c.integrator.samples;
    let end = c.integrator.t_final / c.rates.lambda_star;
    (1..=n).map(|k| end * k as f64 / n as f64).collect()
}

fn integrator(c: &ScenarioConfig) -> Integrator {
    Integrator::Rk45 {
        rtol: c.integrator.rtol,
        atol: c.integrator.atol,
        h_init: 1e-3,
        h_min: 1e-13,
    }
}

fn thermalize(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let lat = TorusLattice::build(c.lattice.l)?;
    let r = &c.rates;
    let model = thermal_jump_set(&lat, r.p, r.lambda_star, r.gamma_star, r.delta)?;
    let gen = Generator::for_model(&model)?;
    let h = gen.hamiltonian().clone();
    let nbar = gen.observable(&excitation_density(&lat)?)?;
    let rep = stationary_state(&gen)?;
    let t_target = model.temperature_target.expect("thermal set");
    let t_db = model.detailed_balance_temperature().expect("thermal set");
    ctx.note(
        "stationary",
        json!({
            "null_dim": rep.null_dim,
            "population_null_dim": rep.population_null_dim,
            "blocks": rep.blocks,
            "largest_block": rep.largest_block,
            "residual": rep.residual,
            "temperature_target": t_target,
            "temperature_detailed_balance": t_db,
        }),
    );
    let hd = h.to_dense();
    let gibbs_target = DensityMatrix::thermal(&hd, t_target);
    let stationary = rep.state.clone();
    match &stationary {
        Some(st) => {
            let d_db = st.trace_distance(&DensityMatrix::thermal(&hd, t_db));
            let d_target = st.trace_distance(&gibbs_target);
            ctx.note("trace_distance_gibbs_detailed_balance", json!(d_db));
            ctx.note("trace_distance_gibbs_target", json!(d_target));
            ctx.check("steady_state_drift", rep.residual <= 1e-8, format!("max |L(ρ)| = {:.3e}", rep.residual));
            ctx.check("gibbs_at_detailed_balance_temperature", d_db < 1e-6, format!("trace distance {d_db:.3e} at T = {t_db}"));
            if (t_db - t_target).abs() > 1e-9 * t_db.abs().max(1.0) {
                ctx.warnings.push(format!(
                    "the rates balance at T = {t_db:.6}, not the configured target {t_target:.6}; trace distance to the target Gibbs state {d_target:.3e}"
                ));
            }
        }
        None => {
            ctx.check(
                "ground_manifold",
                r.p == 0.0 && rep.population_null_dim == 4,
                format!("{} population null vectors, {} in total", rep.population_null_dim, rep.null_dim),
            );
        }
    }

    // Start from the vacuum in the +1 sector of both Z loops.
    let mut psi = vec![C64::new(0.0, 0.0); gen.dim()];
    psi[0] = C64::new(1.0, 0.0);
    let times = sample_times(c);
    let mut dense_energy = Vec::new();
    let mut step = 0;
    let ev = evolve_observed(&gen, &DensityMatrix::pure(&psi)?, &times, &integrator(c), |t, s| {
        let e = s.expectation(&h);
        dense_energy.push(e);
        ctx.metrics.push(step, t, "energy", e);
        ctx.metrics.push(step, t, "entropy", s.entropy());
        ctx.metrics.push(step, t, "excitation_density", s.expectation(&nbar));
        ctx.metrics.push(step, t, "trace_distance_gibbs_target", s.trace_distance(&gibbs_target));
        if let Some(st) = &stationary {
            ctx.metrics.push(step, t, "trace_distance_stationary", s.trace_distance(st));
        }
        step += 1;
    })?;
    ctx.check(
        "evolution_invariants",
        ev.worst.within(1e-8),
        format!("trace {:.2e}, hermiticity {:.2e}, min eigenvalue {:.2e}", ev.worst.trace_error, ev.worst.hermiticity, ev.worst.min_eigenvalue),
    );

    if c.integrator.trajectories > 0 {
        let opts = TrajectoryOptions {
            n_samples: c.integrator.trajectories,
            seed: c.seed,
            dt: c.integrator.dt,
            times: times.clone(),
        };
        let stats = trajectories(&gen, &psi, &[("energy".into(), h.clone()), ("excitation_density".into(), nbar.clone())], &opts)?;
        let last = times.len() - 1;
        let (m, se) = (stats.mean[0][last], stats.stderr[0][last]);
        let z = (m - dense_energy[last]).abs() / se.max(1e-12);
        ctx.check("trajectories_agree_with_dense", z < 4.0, format!("final energy {m:.5} ± {se:.5} vs {:.5}", dense_energy[last]));
        ctx.note("trajectory_jumps", json!(stats.total_jumps));
        ctx.file("trajectories.csv", "strobo.trajectories/1", stats.to_csv());
    }
    ctx.files.push(("model.json".into(), model.to_json()));
    Ok(())
}

fn cool(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let rep = cool_with_noise(c)?;
    let mut csv = String::from("ratio,gamma_e,nbar,energy,temperature,entropy,drift\n");
    for (i, pt) in rep.points.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e}",
            pt.ratio, pt.gamma_e, pt.nbar, pt.energy, pt.temperature, pt.entropy, pt.drift
        );
        ctx.metrics.push(i, pt.ratio, "excitation_density", pt.nbar);
        ctx.metrics.push(i, pt.ratio, "energy", pt.energy);
        ctx.metrics.push(i, pt.ratio, "entropy", pt.entropy);
        ctx.metrics.push(i, pt.ratio, "temperature", pt.temperature);
        if !pt.steady {
            ctx.warnings.push(format!("ratio {}: steady state drifts by {:.3e}", pt.ratio, pt.drift));
        }
    }
    ctx.check("steady_states", rep.points.iter().all(|p| p.steady), "max |L(ρ)| within tolerance at every ratio".into());
    ctx.check("dark_state_without_noise", rep.noiseless_nbar < 1e-6, format!("n̄ = {:.3e}", rep.noiseless_nbar));
    if rep.points.len() >= 2 {
        ctx.check(
            "temperature_falls_with_ratio",
            (rep.rank_correlation + 1.0).abs() < 1e-12,
            format!("rank correlation {}", rep.rank_correlation),
        );
    }
    let hot: Vec<&crate::cooling::CoolingPoint> = rep.points.iter().filter(|p| p.ratio < 1.0).collect();
    if !hot.is_empty() {
        ctx.check(
            "heating_dominates_below_unit_ratio",
            hot.iter().all(|p| p.temperature > c.rates.delta),
            "T > Δ wherever Γe > Γc".into(),
        );
    }
    let ent = entropy_per_gate(c)?;
    let mut ecsv = String::from("epg,delta_s,per_gate\n");
    for (i, pt) in ent.points.iter().enumerate() {
        let _ = writeln!(ecsv, "{},{:.12e},{:.12e}", pt.epg, pt.delta_s, pt.per_gate);
        ctx.metrics.push(i, pt.epg, "entropy_per_cycle", pt.delta_s);
    }
    if let Some(x) = ent.exponent {
        ctx.check("entropy_linear_in_epg", (x - 1.0).abs() <= 0.15, format!("exponent {x:.4}, want 1.0 ± 0.15"));
    }
    let omega = 1.0 / c.angles.tau;
    ctx.note("cooling", serde_json::to_value(&rep).expect("serializes"));
    ctx.note("entropy", serde_json::to_value(&ent).expect("serializes"));
    ctx.note("gamma_e_from_epg", json!({ "epg": c.noise.epg, "omega": omega, "gamma_e": c.noise.epg * omega }));
    ctx.file("cooling.csv", "strobo.cooling/1", csv);
    ctx.file("entropy.csv", "strobo.entropy/1", ecsv);
    Ok(())
}

fn pump(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let r = &c.rates;
    let mut csv = String::from("theta,p0,p1,closed_p0,closed_p1,deviation,residual_excited,t_eff\n");
    for (i, &theta) in r.theta.iter().enumerate() {
        let res = pump_ancilla(&PumpProtocol::standard(theta, r.gamma20, r.rabi, r.delta))?;
        let _ = writeln!(
            csv,
            "{theta},{:.10},{:.10},{:.10},{:.10},{:.3e},{:.3e},{}",
            res.populations[0], res.populations[1], res.closed_form[0], res.closed_form[1], res.deviation, res.residual_excited, res.t_eff
        );
        ctx.metrics.push(i, theta, "p0", res.populations[0]);
        ctx.metrics.push(i, theta, "p1", res.populations[1]);
        ctx.metrics.push(i, theta, "deviation", res.deviation);
        ctx.metrics.push(i, theta, "t_eff", res.t_eff);
        ctx.check(&format!("closed_form_theta_{theta:.6}"), res.deviation < 1e-4, format!("deviation {:.3e}", res.deviation));
        ctx.warnings.extend(res.warnings.into_iter().map(|w| format!("θ = {theta}: {w}")));
    }
    ctx.file("pump.csv", "strobo.pump/1", csv);
    Ok(())
}

fn eliminate(c: &ScenarioConfig, ctx: &mut Ctx) -> Result<(), RunError> {
    let r = &c.rates;
    let opts = EliminationOptions {
        p: r.p,
        ..EliminationOptions::default()
    };
    let rep = adiabatic_elimination_probe(&r.g, &r.lambda, &opts)?;
    let mut csv = String::from("g,lambda,rate,fit_residual,samples\n");
    for (i, pt) in rep.points.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{:.12e},{:.3e},{}", pt.g, pt.lambda, pt.rate, pt.fit_residual, pt.samples);
        ctx.metrics.push(i, pt.g, "rate", pt.rate);
    }
    ctx.check(
        "quadratic_in_g",
        (rep.g_exponent - 2.0).abs() <= 0.1,
        format!("g exponent {:.4}, want 2.0 ± 0.1", rep.g_exponent),
    );
    ctx.note("g_exponent", json!(rep.g_exponent));
    ctx.note("lambda_exponent", json!(rep.lambda_exponent));
    ctx.note("hypotheses", serde_json::to_value(&rep.hypotheses).expect("serializes"));
    ctx.note("preferred", json!(rep.preferred));
    ctx.file("elimination.csv", "strobo.elimination/1", csv);
    Ok(())
}
