use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use strobo_core::lattice::PairSet;
use strobo_harness::noise::Channel;
use strobo_harness::output::OUT_DIR_ENV;
use strobo_harness::{run, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "strobo", version, about = "Stroboscopic toric-code scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Order scans of the vertex sequence and serial composition error.
    SequenceScan(Overrides),
    /// Low-lying spectrum of the perturbed toric code.
    Spectrum(Overrides),
    /// Ground-manifold fidelity against χ.
    FidelityScan(Overrides),
    /// Thermal jump set: stationary state and relaxation.
    Thermalize(Overrides),
    /// Cooling against depolarizing noise and entropy per gate.
    Cool(Overrides),
    /// Three-level ancilla pump.
    Pump(Overrides),
    /// Effective rate of the strongly damped ancilla.
    Eliminate(Overrides),
    /// Print the default configuration of a kind (all kinds when omitted).
    Describe { kind: Option<ScenarioKind> },
    /// Check a configuration file without running it.
    Validate {
        config: PathBuf,
        /// Kind to validate against when the file does not name one.
        #[arg(long)]
        kind: Option<ScenarioKind>,
    },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// TOML file layered over the kind's defaults; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    scan: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    h_z: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    chis: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_pairs)]
    pairs: Option<PairSet>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda_star: Option<f64>,
    #[arg(long)]
    gamma_star: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    g: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long)]
    t_sr: Option<f64>,
    #[arg(long)]
    gamma20: Option<f64>,
    #[arg(long)]
    rabi: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long)]
    epg: Option<f64>,
    #[arg(long, value_parser = parse_channel)]
    channel: Option<Channel>,
    #[arg(long, value_delimiter = ',')]
    epg_sweep: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    prefix: Option<String>,
}

fn parse_pairs(s: &str) -> Result<PairSet, String> {
    match s {
        "sequence_derived" | "sequence-derived" => Ok(PairSet::SequenceDerived),
        "all_nearest_neighbor" | "all-nearest-neighbor" => Ok(PairSet::AllNearestNeighbor),
        _ => Err(format!("unknown pair set {s:?}")),
    }
}

fn parse_channel(s: &str) -> Result<Channel, String> {
    match s {
        "depolarizing" => Ok(Channel::Depolarizing),
        "dephasing" => Ok(Channel::Dephasing),
        _ => Err(format!("unknown channel {s:?}")),
    }
}

macro_rules! set {
    ($src:expr => $dst:expr) => {
        if let Some(v) = $src.clone() {
            $dst = v;
        }
    };
}

impl Overrides {
    fn build(&self, kind: ScenarioKind) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioConfig::from_toml(kind, &text)?
            }
            None => ScenarioConfig::defaults(kind),
        };
        set!(self.seed => c.seed);
        set!(self.l => c.lattice.l);
        set!(self.phi => c.angles.phi);
        if self.alpha.is_some() {
            c.angles.alpha = self.alpha;
        }
        if self.beta.is_some() {
            c.angles.beta = self.beta;
        }
        if self.gamma.is_some() {
            c.angles.gamma = self.gamma;
        }
        set!(self.tau => c.angles.tau);
        set!(self.scan => c.angles.scan);
        set!(self.h_z => c.hamiltonian.h_z);
        set!(self.chis => c.hamiltonian.chis);
        set!(self.pairs => c.hamiltonian.pairs);
        set!(self.levels => c.hamiltonian.levels);
        set!(self.p => c.rates.p);
        set!(self.lambda_star => c.rates.lambda_star);
        set!(self.gamma_star => c.rates.gamma_star);
        set!(self.delta => c.rates.delta);
        set!(self.g => c.rates.g);
        set!(self.lambda => c.rates.lambda);
        set!(self.t_sr => c.rates.t_sr);
        set!(self.gamma20 => c.rates.gamma20);
        set!(self.rabi => c.rates.rabi);
        set!(self.theta => c.rates.theta);
        set!(self.epg => c.noise.epg);
        set!(self.channel => c.noise.channel);
        set!(self.epg_sweep => c.noise.epg_sweep);
        set!(self.ratios => c.noise.ratios);
        set!(self.rtol => c.integrator.rtol);
        set!(self.atol => c.integrator.atol);
        set!(self.t_final => c.integrator.t_final);
        set!(self.samples => c.integrator.samples);
        set!(self.trajectories => c.integrator.trajectories);
        set!(self.dt => c.integrator.dt);
        set!(self.out_dir => c.output.dir);
        set!(self.prefix => c.output.prefix);
        Ok(c)
    }
}

fn execute(kind: ScenarioKind, o: &Overrides) -> Result<bool> {
    let config = o.build(kind)?;
    let record = run(&config)?;
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    for a in &record.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    for f in &record.outputs {
        println!("wrote {}", f.display());
    }
    println!("{kind} finished in {:.2} s, config {}", record.wall_time_s, &record.config_hash[..12]);
    Ok(record.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::SequenceScan(o) => execute(ScenarioKind::SequenceOrderScan, &o),
        Command::Spectrum(o) => execute(ScenarioKind::Spectrum, &o),
        Command::FidelityScan(o) => execute(ScenarioKind::FidelityScan, &o),
        Command::Thermalize(o) => execute(ScenarioKind::Thermalize, &o),
        Command::Cool(o) => execute(ScenarioKind::CoolWithNoise, &o),
        Command::Pump(o) => execute(ScenarioKind::Pump, &o),
        Command::Eliminate(o) => execute(ScenarioKind::Eliminate, &o),
        Command::Describe { kind } => {
            let kinds = kind.map_or_else(|| ScenarioKind::ALL.to_vec(), |k| vec![k]);
            for (i, k) in kinds.into_iter().enumerate() {
                if i > 0 {
                    println!();
                }
                println!("# defaults for {k}");
                print!("{}", ScenarioConfig::defaults(k).to_toml());
            }
            Ok(true)
        }
        Command::Validate { config, kind } => validate(&config, kind),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn validate(path: &PathBuf, kind: Option<ScenarioKind>) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let kind = match (ScenarioConfig::kind_in(&text)?, kind) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => bail!("{} names no kind; pass --kind", path.display()),
    };
    let config = ScenarioConfig::from_toml(kind, &text)?;
    config.validate()?;
    println!("{} is a valid {kind} configuration (hash {})", path.display(), config.hash());
    Ok(true)
}
