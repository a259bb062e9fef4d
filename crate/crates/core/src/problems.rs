//! Generators for the experimental joint distributions and a loader for
//! labeled tabular data.

use std::collections::HashMap;
use std::io::BufRead;

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{JointDistribution, ProbError};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("grid size 2*half_width/step = {0} is not a positive integer")]
    GridSize(f64),
    #[error("no samples")]
    NoSamples,
    #[error("row {row}: cannot parse {token:?} as a number")]
    Parse { row: usize, token: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("input contains no data rows")]
    EmptyFile,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Binary symmetric source: X uniform, Y = X flipped with probability `e`.
pub fn bernoulli_joint(e: f64) -> Result<JointDistribution, ProblemError> {
    if !(0.0..=0.5).contains(&e) {
        return Err(ProblemError::Domain {
            name: "e",
            value: e,
            range: "[0, 1/2]",
        });
    }
    let pxy = array![[(1.0 - e) / 2.0, e / 2.0], [e / 2.0, (1.0 - e) / 2.0]];
    Ok(JointDistribution::new(pxy)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianGridSpec {
    pub snr: f64,
    pub half_width: f64,
    pub step: f64,
}

impl Default for GaussianGridSpec {
    fn default() -> Self {
        Self {
            snr: 1.0,
            half_width: 10.0,
            step: 0.2,
        }
    }
}

impl GaussianGridSpec {
    pub fn grid_size(&self) -> Result<usize, ProblemError> {
        for (name, value) in [
            ("snr", self.snr),
            ("half_width", self.half_width),
            ("step", self.step),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ProblemError::Domain {
                    name,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        let n = 2.0 * self.half_width / self.step;
        let rounded = n.round();
        if rounded < 1.0 || (n - rounded).abs() > 1e-9 {
            return Err(ProblemError::GridSize(n));
        }
        Ok(rounded as usize)
    }

    /// Grid points `-half_width + i * step`, `i = 0..n`.
    pub fn grid(&self) -> Result<Vec<f64>, ProblemError> {
        let n = self.grid_size()?;
        Ok((0..n)
            .map(|i| -self.half_width + i as f64 * self.step)
            .collect())
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Discretized `X = sqrt(snr) Y + S` with standard normal `Y` and `S`, on a
/// shared grid for both axes.
pub fn gaussian_discretized(spec: &GaussianGridSpec) -> Result<JointDistribution, ProblemError> {
    let g = spec.grid()?;
    let n = g.len();
    let gain = spec.snr.sqrt();
    let cell = spec.step * spec.step;
    let mut pxy = Array2::from_shape_fn((n, n), |(i, k)| {
        std_normal_pdf(g[k]) * std_normal_pdf(g[i] - gain * g[k]) * cell
    });
    let total = pxy.sum();
    pxy.mapv_inplace(|v| v / total);
    Ok(JointDistribution::new(pxy)?)
}

/// The 4x4 block-diagonal joint whose IB curve is a straight line.
pub fn constant_slope_joint() -> JointDistribution {
    let pxy = array![
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 1.0, 1.0]
    ] / 8.0;
    JointDistribution::new(pxy).expect("block matrix is a valid joint")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: String,
}

/// Empirical joint of (feature vector, label). X support is the distinct
/// feature vectors and Y support the distinct labels, both in
/// first-appearance order.
pub fn empirical_joint(samples: &[LabeledSample]) -> Result<JointDistribution, ProblemError> {
    if samples.is_empty() {
        return Err(ProblemError::NoSamples);
    }
    // Bit patterns give exact equality; -0.0 is folded into 0.0 first.
    let key = |f: &[f64]| -> Vec<u64> { f.iter().map(|v| (v + 0.0).to_bits()).collect() };
    let mut xs: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut ys: HashMap<&str, usize> = HashMap::new();
    let mut cells = Vec::with_capacity(samples.len());
    for s in samples {
        let nx = xs.len();
        let i = *xs.entry(key(&s.features)).or_insert(nx);
        let ny = ys.len();
        let k = *ys.entry(s.label.as_str()).or_insert(ny);
        cells.push((i, k));
    }
    let mut pxy = Array2::zeros((xs.len(), ys.len()));
    let unit = 1.0 / samples.len() as f64;
    for (i, k) in cells {
        pxy[[i, k]] += unit;
    }
    Ok(JointDistribution::new(pxy)?)
}

/// Reads comma-separated rows. Every column other than `label_column` must be
/// numeric. Blank lines are skipped; `skip_header` drops the first non-blank
/// line. Row numbers in errors are 1-based physical line numbers.
pub fn load_labeled_csv<R: BufRead>(
    source: R,
    label_column: usize,
    skip_header: bool,
) -> Result<Vec<LabeledSample>, ProblemError> {
    let mut out = Vec::new();
    let mut header_pending = skip_header;
    for (idx, line) in source.lines().enumerate() {
        let row = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        if label_column >= tokens.len() {
            return Err(ProblemError::Row {
                row,
                message: format!(
                    "label column {label_column} missing, row has {} columns",
                    tokens.len()
                ),
            });
        }
        let mut features = Vec::with_capacity(tokens.len() - 1);
        for (c, tok) in tokens.iter().enumerate() {
            if c == label_column {
                continue;
            }
            let v: f64 = tok.parse().map_err(|_| ProblemError::Parse {
                row,
                token: tok.to_string(),
            })?;
            features.push(v);
        }
        let label = tokens[label_column];
        if features.is_empty() || label.is_empty() {
            return Err(ProblemError::Row {
                row,
                message: "needs a label and at least one feature".into(),
            });
        }
        out.push(LabeledSample {
            features,
            label: label.to_string(),
        });
    }
    if out.is_empty() {
        return Err(ProblemError::EmptyFile);
    }
    Ok(out)
}
