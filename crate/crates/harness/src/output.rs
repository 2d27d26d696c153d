//! Run records, metric streams and figure data, written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strobo_core::spectra::{FidelityScan, SpectrumResult, FIDELITY_CSV_HEADER, SPECTRUM_CSV_HEADER};

/// Overrides `output.dir` when set.
pub const OUT_DIR_ENV: &str = "STROBO_OUT_DIR";

pub const RUN_SCHEMA: &str = "strobo.run/1";
pub const METRICS_SCHEMA: &str = "strobo.metrics/1";
pub const SPECTRUM_SCHEMA: &str = "strobo.spectrum/1";
pub const FIDELITY_SCHEMA: &str = "strobo.fidelity/1";

/// How the noise rate relates to the error per gate.
pub const OMEGA_DEFINITION: &str = "Omega = elementary gates per unit time of the configured schedule (1/tau for the echoed sequence); Gamma_e = EPG * Omega";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Prepends the schema comment line.
pub fn with_schema(schema: &str, body: &str) -> String {
    format!("# schema: {schema}\n{body}")
}

#[derive(Debug, thiserror::Error)]
#[error("schema mismatch: expected {expected:?}, found {found:?}")]
pub struct SchemaMismatch {
    pub expected: String,
    pub found: String,
}

/// Checks that `csv` starts with the schema comment and column header of
/// `kind`.
pub fn check_schema(kind: FigureKind, csv: &str) -> Result<(), SchemaMismatch> {
    let expected = format!("# schema: {}\n{}", kind.schema(), kind.header());
    let found: String = csv.split_inclusive('\n').take(2).collect();
    if found == expected {
        Ok(())
    } else {
        Err(SchemaMismatch { expected, found })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    Spectrum,
    Fidelity,
}

impl FigureKind {
    fn schema(self) -> &'static str {
        match self {
            Self::Spectrum => SPECTRUM_SCHEMA,
            Self::Fidelity => FIDELITY_SCHEMA,
        }
    }
    fn header(self) -> &'static str {
        match self {
            Self::Spectrum => SPECTRUM_CSV_HEADER,
            Self::Fidelity => FIDELITY_CSV_HEADER,
        }
    }
}

/// Upstream results a figure is drawn from.
pub enum FigureInput<'a> {
    /// `(χ, h_z, spectrum)` per point.
    Spectra(&'a [(f64, f64, SpectrumResult)]),
    Scan(&'a FidelityScan),
}

/// CSV in the plotting schema of `kind`. Energies are in units of
/// `J_e = J_m`.
pub fn emit_figure_data(kind: FigureKind, input: FigureInput<'_>) -> String {
    let body = match (kind, input) {
        (FigureKind::Spectrum, FigureInput::Spectra(points)) => {
            let mut s = String::from(SPECTRUM_CSV_HEADER);
            for (chi, h_z, r) in points {
                s.push_str(&r.csv_rows(*chi, *h_z));
            }
            s
        }
        (FigureKind::Spectrum, FigureInput::Scan(scan)) => scan.spectrum_csv(),
        (FigureKind::Fidelity, FigureInput::Scan(scan)) => scan.to_csv(),
        (FigureKind::Fidelity, FigureInput::Spectra(_)) => {
            let mut s = String::from(FIDELITY_CSV_HEADER);
            s.push_str("# no fidelity data: spectra carry no reference overlap\n");
            s
        }
    };
    with_schema(kind.schema(), &body)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub step: usize,
    /// Scan coordinate or time of the step.
    pub x: f64,
    pub name: String,
    pub value: f64,
}

/// Ordered metric stream with a fixed text form.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Metrics(pub Vec<Metric>);

impl Metrics {
    pub fn push(&mut self, step: usize, x: f64, name: &str, value: f64) {
        self.0.push(Metric {
            step,
            x,
            name: name.into(),
            value,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut s = with_schema(METRICS_SCHEMA, "step,x,metric,value\n");
        for m in &self.0 {
            let _ = writeln!(s, "{},{:.12e},{},{:.12e}", m.step, m.x, m.name, m.value);
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub strobo_core: &'static str,
    pub strobo_harness: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            strobo_core: strobo_core::VERSION,
            strobo_harness: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub schema: &'static str,
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub omega_definition: &'static str,
    pub wall_time_s: f64,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    /// Kind-specific summary.
    pub summary: serde_json::Value,
    pub metrics: Metrics,
    pub outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.csv");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn schema_check() {
        let spectra: Vec<(f64, f64, SpectrumResult)> = Vec::new();
        let s = emit_figure_data(FigureKind::Spectrum, FigureInput::Spectra(&spectra));
        assert!(check_schema(FigureKind::Spectrum, &s).is_ok());
        assert!(check_schema(FigureKind::Fidelity, &s).is_err());
    }

    #[test]
    fn metrics_text_is_stable() {
        let mut m = Metrics::default();
        m.push(0, 0.5, "energy", -8.0);
        assert_eq!(m.to_csv(), "# schema: strobo.metrics/1\nstep,x,metric,value\n0,5.000000000000e-1,energy,-8.000000000000e0\n");
    }
}
