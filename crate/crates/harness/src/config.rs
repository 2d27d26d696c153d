//! Scenario configuration: one TOML file per run, layered over per-kind
//! defaults and validated in full before any compute starts.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use strobo_core::lattice::PairSet;

use crate::noise::NoiseModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    SequenceOrderScan,
    Spectrum,
    FidelityScan,
    Thermalize,
    CoolWithNoise,
    Pump,
    Eliminate,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        Self::SequenceOrderScan,
        Self::Spectrum,
        Self::FidelityScan,
        Self::Thermalize,
        Self::CoolWithNoise,
        Self::Pump,
        Self::Eliminate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SequenceOrderScan => "sequence-order-scan",
            Self::Spectrum => "spectrum",
            Self::FidelityScan => "fidelity-scan",
            Self::Thermalize => "thermalize",
            Self::CoolWithNoise => "cool-with-noise",
            Self::Pump => "pump",
            Self::Eliminate => "eliminate",
        }
    }

    /// Runs that evolve density matrices on every link of the lattice.
    fn is_dense(self) -> bool {
        matches!(self, Self::Thermalize | Self::CoolWithNoise)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario kind {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Linear size of the torus.
    pub l: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleConfig {
    /// Uniform rotation angle, used when α, β, γ are not given.
    pub phi: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// Duration of one gate.
    pub tau: f64,
    /// Overall scales for order scans. Each point runs the angle triple
    /// multiplied by `scale / phi`.
    pub scan: Vec<f64>,
}

impl AngleConfig {
    pub fn triple(&self) -> (f64, f64, f64) {
        (
            self.alpha.unwrap_or(self.phi),
            self.beta.unwrap_or(self.phi),
            self.gamma.unwrap_or(self.phi),
        )
    }

    /// Triple at overall scale `s`.
    pub fn scaled(&self, s: f64) -> (f64, f64, f64) {
        let (a, b, c) = self.triple();
        let k = s / self.phi;
        (a * k, b * k, c * k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub h_z: f64,
    pub chis: Vec<f64>,
    pub pairs: PairSet,
    /// Eigenpairs per χ for spectrum runs.
    pub levels: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    /// Bath parameter of the thermal ancilla.
    pub p: f64,
    pub lambda_star: f64,
    pub gamma_star: f64,
    /// Pair-creation gap.
    pub delta: f64,
    /// Couplings and ancilla damping rates for the elimination probe.
    pub g: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Interaction time of the system–reservoir gate.
    pub t_sr: f64,
    pub gamma20: f64,
    pub rabi: f64,
    /// Pump mixing angles.
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// End of the sampled evolution, in units of `1/λ*`.
    pub t_final: f64,
    /// Sample points of the evolution.
    pub samples: usize,
    /// Monte Carlo trajectories alongside the dense evolution; 0 skips them.
    pub trajectories: usize,
    /// Step of the trajectory integrator.
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File name stem; the kind name when empty.
    pub prefix: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub lattice: LatticeConfig,
    pub angles: AngleConfig,
    pub hamiltonian: HamiltonianConfig,
    pub rates: RateConfig,
    pub noise: NoiseModel,
    pub integrator: IntegratorConfig,
    pub output: OutputConfig,
}

/// Every problem found in a configuration.
#[derive(Debug, thiserror::Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigErrors(pub Vec<String>);

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config names kind {file} but {requested} was requested")]
    KindMismatch { file: ScenarioKind, requested: ScenarioKind },
    #[error(transparent)]
    Invalid(#[from] ConfigErrors),
}

impl ScenarioConfig {
    pub fn defaults(kind: ScenarioKind) -> Self {
        use ScenarioKind::*;
        let chis = match kind {
            FidelityScan => (-5..=5).map(|i| i as f64 / 10.0).collect(),
            _ => vec![0.0, 0.2],
        };
        Self {
            kind,
            seed: 1,
            lattice: LatticeConfig {
                l: if matches!(kind, Spectrum | FidelityScan) { 3 } else { 2 },
            },
            angles: AngleConfig {
                phi: 0.1,
                alpha: None,
                beta: None,
                gamma: None,
                tau: 1.0,
                scan: vec![0.05, 0.08, 0.12, 0.2],
            },
            hamiltonian: HamiltonianConfig {
                h_z: 0.05,
                chis,
                pairs: PairSet::SequenceDerived,
                levels: 6,
                tol: 1e-8,
            },
            rates: RateConfig {
                p: if kind == Thermalize { 0.1 } else { 0.0 },
                lambda_star: 1.0,
                gamma_star: 1.0,
                delta: 4.0,
                g: vec![0.01, 0.02, 0.05],
                lambda: vec![0.5, 1.0, 2.0],
                t_sr: 1.0,
                gamma20: 1.0,
                rabi: 1e5,
                theta: vec![0.0, std::f64::consts::FRAC_PI_6, FRAC_PI_4, FRAC_PI_2],
            },
            noise: NoiseModel {
                ratios: if kind == CoolWithNoise { vec![10.0, 30.0, 100.0, 300.0] } else { Vec::new() },
                ..NoiseModel::default()
            },
            integrator: IntegratorConfig {
                rtol: 1e-10,
                atol: 1e-12,
                t_final: 20.0,
                samples: 21,
                trajectories: if kind == Thermalize { 200 } else { 0 },
                dt: 0.01,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                prefix: String::new(),
            },
        }
    }

    /// Defaults for `kind` overlaid with the tables in `text`.
    pub fn from_toml(kind: ScenarioKind, text: &str) -> Result<Self, LoadError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| LoadError::Parse(e.to_string()))?;
        if let Some(v) = user.get("kind") {
            let file: ScenarioKind = v
                .as_str()
                .ok_or_else(|| LoadError::Parse("kind must be a string".into()))?
                .parse()
                .map_err(LoadError::Parse)?;
            if file != kind {
                return Err(LoadError::KindMismatch { file, requested: kind });
            }
        }
        let mut base = toml::Table::try_from(Self::defaults(kind)).expect("defaults serialize");
        merge(&mut base, user);
        base.try_into().map_err(|e: toml::de::Error| LoadError::Parse(e.to_string()))
    }

    /// The kind named in `text`, if any.
    pub fn kind_in(text: &str) -> Result<Option<ScenarioKind>, LoadError> {
        let t: toml::Table = text.parse().map_err(|e: toml::de::Error| LoadError::Parse(e.to_string()))?;
        t.get("kind")
            .map(|v| v.as_str().ok_or_else(|| LoadError::Parse("kind must be a string".into()))?.parse().map_err(LoadError::Parse))
            .transpose()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn prefix(&self) -> &str {
        if self.output.prefix.is_empty() {
            self.kind.name()
        } else {
            &self.output.prefix
        }
    }

    /// Checks every field against the preconditions of the operations it
    /// feeds and returns all failures at once.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let finite = |x: f64| x.is_finite();
        let kind = self.kind;

        let l = self.lattice.l;
        need(l >= 2, format!("lattice.l = {l}: need at least 2"));
        if kind.is_dense() {
            need(l == 2, format!("lattice.l = {l}: {kind} evolves dense density matrices and needs l = 2"));
        }
        if matches!(kind, ScenarioKind::Spectrum | ScenarioKind::FidelityScan) {
            need(l <= 3, format!("lattice.l = {l}: exact diagonalization is capped at l = 3"));
        }

        let a = &self.angles;
        need(finite(a.phi) && a.phi > 0.0 && a.phi < FRAC_PI_4, format!("angles.phi = {}: need 0 < phi < π/4", a.phi));
        for (name, v) in [("alpha", a.alpha), ("beta", a.beta), ("gamma", a.gamma)] {
            if let Some(v) = v {
                need(finite(v) && v.abs() < FRAC_PI_4, format!("angles.{name} = {v}: need |{name}| < π/4"));
            }
        }
        need(finite(a.tau) && a.tau > 0.0, format!("angles.tau = {}: must be positive", a.tau));
        if kind == ScenarioKind::SequenceOrderScan {
            let lo = a.scan.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = a.scan.iter().copied().fold(0.0, f64::max);
            need(a.scan.len() >= 4, format!("angles.scan has {} points: need at least 4", a.scan.len()));
            need(lo > 0.0 && hi / lo >= 2.0, format!("angles.scan must be positive and span a factor of 2 (got {lo}..{hi})"));
            let (x, y, z) = a.scaled(hi);
            need(
                x.abs().max(y.abs()).max(z.abs()) < FRAC_PI_4,
                format!("angles.scan reaches {hi}: scaled angles must stay below π/4"),
            );
        }

        let h = &self.hamiltonian;
        need(finite(h.h_z), format!("hamiltonian.h_z = {}: must be finite", h.h_z));
        need(!h.chis.is_empty() && h.chis.iter().all(|c| c.is_finite()), "hamiltonian.chis must be a non-empty list of finite values".into());
        need(h.levels >= 5, format!("hamiltonian.levels = {}: need at least 5 to resolve the gap", h.levels));
        need(finite(h.tol) && h.tol > 0.0 && h.tol < 1e-3, format!("hamiltonian.tol = {}: need 0 < tol < 1e-3", h.tol));

        let r = &self.rates;
        need((0.0..1.0).contains(&r.p), format!("rates.p = {}: need 0 ≤ p < 1", r.p));
        need(finite(r.lambda_star) && r.lambda_star > 0.0, format!("rates.lambda_star = {}: must be positive", r.lambda_star));
        need(finite(r.gamma_star) && r.gamma_star >= 0.0, format!("rates.gamma_star = {}: must be non-negative", r.gamma_star));
        need(finite(r.delta) && r.delta > 0.0, format!("rates.delta = {}: must be positive", r.delta));
        need(!r.g.is_empty() && r.g.iter().all(|&g| finite(g) && g >= 0.0), "rates.g must be a non-empty list of non-negative values".into());
        need(!r.lambda.is_empty() && r.lambda.iter().all(|&x| finite(x) && x > 0.0), "rates.lambda must be a non-empty list of positive values".into());
        if kind == ScenarioKind::Eliminate {
            let gmax = r.g.iter().copied().fold(0.0, f64::max);
            let lmin = r.lambda.iter().copied().fold(f64::INFINITY, f64::min);
            need(gmax / lmin <= 0.1, format!("rates: g/λ reaches {}; the probe needs g/λ ≤ 0.1", gmax / lmin));
            need(r.g.len() * r.lambda.len() >= 3, "rates: the probe fit needs at least 3 (g, λ) points".into());
            let mut nonzero: Vec<f64> = r.g.iter().copied().filter(|&g| g > 0.0).collect();
            nonzero.sort_by(f64::total_cmp);
            nonzero.dedup();
            need(nonzero.len() >= 2, "rates.g: the g exponent needs at least two distinct non-zero couplings".into());
        }
        let gmax = r.g.iter().copied().fold(0.0, f64::max);
        need(finite(r.t_sr) && r.t_sr > 0.0 && gmax * r.t_sr < FRAC_PI_2, format!("rates: g·t_sr = {} must lie below π/2", gmax * r.t_sr));
        need(finite(r.gamma20) && r.gamma20 > 0.0, format!("rates.gamma20 = {}: must be positive", r.gamma20));
        need(finite(r.rabi) && r.rabi > 0.0, format!("rates.rabi = {}: must be positive", r.rabi));
        need(
            !r.theta.is_empty() && r.theta.iter().all(|t| (0.0..=FRAC_PI_2).contains(t)),
            "rates.theta must be a non-empty list in [0, π/2]".into(),
        );

        if let Err(e) = self.noise.validate() {
            e.into_iter().for_each(|m| need(false, m));
        }
        need(
            kind != ScenarioKind::CoolWithNoise || !self.noise.ratios.is_empty(),
            "noise.ratios must list at least one Γc/Γe ratio".into(),
        );

        let i = &self.integrator;
        need(finite(i.rtol) && i.rtol > 0.0 && i.rtol < 1.0, format!("integrator.rtol = {}: need 0 < rtol < 1", i.rtol));
        need(finite(i.atol) && i.atol > 0.0, format!("integrator.atol = {}: must be positive", i.atol));
        need(finite(i.t_final) && i.t_final > 0.0, format!("integrator.t_final = {}: must be positive", i.t_final));
        need(i.samples >= 1, "integrator.samples must be at least 1".into());
        need(finite(i.dt) && i.dt > 0.0 && i.dt <= 0.1, format!("integrator.dt = {}: need 0 < dt ≤ 0.1", i.dt));

        let p = &self.output.prefix;
        need(!p.contains(['/', '\\']) && p != "." && p != "..", format!("output.prefix = {p:?}: must be a plain file stem"));

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_for_every_kind() {
        for k in ScenarioKind::ALL {
            ScenarioConfig::defaults(k).validate().unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn toml_round_trip_and_overlay() {
        let c = ScenarioConfig::defaults(ScenarioKind::Pump);
        let back = ScenarioConfig::from_toml(ScenarioKind::Pump, &c.to_toml()).unwrap();
        assert_eq!(back, c);
        let o = ScenarioConfig::from_toml(ScenarioKind::Pump, "seed = 9\n[rates]\ntheta = [0.5]\n").unwrap();
        assert_eq!(o.seed, 9);
        assert_eq!(o.rates.theta, vec![0.5]);
        assert_eq!(o.rates.gamma20, c.rates.gamma20);
    }

    #[test]
    fn unknown_fields_and_kind_mismatch_rejected() {
        assert!(matches!(ScenarioConfig::from_toml(ScenarioKind::Pump, "[rates]\nthetta = [0.5]\n"), Err(LoadError::Parse(_))));
        assert!(matches!(
            ScenarioConfig::from_toml(ScenarioKind::Pump, "kind = \"spectrum\"\n"),
            Err(LoadError::KindMismatch { .. })
        ));
    }

    #[test]
    fn every_failure_is_reported() {
        let mut c = ScenarioConfig::defaults(ScenarioKind::Thermalize);
        c.lattice.l = 3;
        c.rates.p = 1.5;
        c.noise.epg = 0.7;
        c.integrator.samples = 0;
        let e = c.validate().unwrap_err();
        assert_eq!(e.0.len(), 4, "{e}");
    }

    #[test]
    fn elimination_window_enforced() {
        let mut c = ScenarioConfig::defaults(ScenarioKind::Eliminate);
        c.rates.g = vec![0.2];
        let e = c.validate().unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("g/λ")), "{e}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::defaults(ScenarioKind::Pump);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
