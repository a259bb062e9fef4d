use std::f64::consts::LN_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::CliError;
use crate::{Format, OutputArgs, Units};

pub const CURVE_HEADER: &str = "threshold_I,rate_R,relevance,zeta,iterations,status,marginal_residual";

/// One solved point of a curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    #[serde(rename = "threshold_I")]
    pub threshold: f64,
    #[serde(rename = "rate_R")]
    pub rate: f64,
    pub relevance: f64,
    pub zeta: f64,
    pub iterations: usize,
    pub status: String,
    pub marginal_residual: f64,
}

impl CurveRow {
    pub fn in_units(mut self, units: Units) -> Self {
        let f = unit_factor(units);
        self.threshold *= f;
        self.rate *= f;
        self.relevance *= f;
        self
    }
}

pub fn unit_factor(units: Units) -> f64 {
    match units {
        Units::Nats => 1.0,
        Units::Bits => 1.0 / LN_2,
    }
}

/// Rows ordered by threshold; ties keep their input order.
pub fn sort_rows(rows: &mut [CurveRow]) {
    rows.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:e}\n",
            r.threshold, r.rate, r.relevance, r.zeta, r.iterations, r.status, r.marginal_residual
        ));
    }
    s
}

/// Renders records as CSV with the given header, or as a JSON array.
pub fn render<T: Serialize>(
    format: Format,
    rows: &[T],
    csv: impl Fn(&[T]) -> String,
) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(csv(rows)),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows).map_err(|e| CliError::Output(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Writes `body` to `--out` (plus the manifest sidecar) or to standard output.
pub fn emit(output: &OutputArgs, body: &str, manifest: &RunManifest) -> Result<(), CliError> {
    match &output.out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
            let side = manifest_path(path);
            let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Output(e.to_string()))?;
            std::fs::write(&side, text + "\n")
                .map_err(|e| CliError::Output(format!("{}: {e}", side.display())))?;
            Ok(())
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Bernoulli { e: f64 },
    Gaussian { snr: f64, half_width: f64, step: f64 },
    ConstantSlope,
    Empirical { data: PathBuf, label_col: usize, header: bool },
    Oracle { model: String, parameter: f64 },
}

/// Everything needed to reproduce a data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub command: String,
    /// Command-line arguments with any `--out` removed.
    pub args: Vec<String>,
    pub problem: ProblemSpec,
    pub solver: String,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        args: &[String],
        problem: ProblemSpec,
        solver: &str,
        config: serde_json::Value,
        seed: u64,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            command: command.to_string(),
            args: strip_out(args),
            problem,
            solver: solver.to_string(),
            config,
            seed,
        }
    }
}

fn strip_out(args: &[String]) -> Vec<String> {
    let mut kept = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        kept.push(a.clone());
    }
    kept
}
