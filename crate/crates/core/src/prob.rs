//! Validated discrete probability objects and the information functionals
//! built on them. Every quantity is in nats.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest simplex-sum deviation accepted at construction. Inputs within it
/// are renormalized exactly.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("empty support")]
    Empty,
    #[error("entry {index} is {value}, expected a finite non-negative probability")]
    BadEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, off the simplex by more than {SIMPLEX_TOL:e}")]
    NotNormalized { sum: f64 },
    #[error("column {column} of the conditional kernel sums to {sum}")]
    KernelColumn { column: usize, sum: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// `x ln x` with the limit convention `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn check_entries<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<f64, ProbError> {
    let mut sum = 0.0;
    for (index, &value) in values.into_iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ProbError::BadEntry { index, value });
        }
        sum += value;
    }
    Ok(sum)
}

/// A probability vector on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(mass: Vec<f64>) -> Result<Self, ProbError> {
        if mass.is_empty() {
            return Err(ProbError::Empty);
        }
        let sum = check_entries(&mass)?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(ProbError::NotNormalized { sum });
        }
        let mass = mass.into_iter().map(|m| m / sum).collect();
        Ok(Self { mass })
    }

    pub fn uniform(len: usize) -> Result<Self, ProbError> {
        if len == 0 {
            return Err(ProbError::Empty);
        }
        Ok(Self {
            mass: vec![1.0 / len as f64; len],
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.mass
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.mass[i]
    }
}

/// Column-stochastic `K x M` matrix with entry `(k, i) = P(y_k | x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    matrix: Array2<f64>,
}

impl ConditionalKernel {
    pub fn new(matrix: Array2<f64>) -> Result<Self, ProbError> {
        if matrix.is_empty() {
            return Err(ProbError::Empty);
        }
        check_entries(matrix.iter())?;
        let mut matrix = matrix;
        for (column, mut col) in matrix.columns_mut().into_iter().enumerate() {
            let sum = col.sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(ProbError::KernelColumn { column, sum });
            }
            col.mapv_inplace(|v| v / sum);
        }
        Ok(Self { matrix })
    }

    /// Number of outcomes `K`.
    pub fn outputs(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of conditioning inputs `M`.
    pub fn inputs(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// `P(Y | x_i)` as a view.
    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.column(i)
    }
}

/// An `M x K` joint distribution of `(X, Y)` with cached marginals and the
/// conditional `P(Y | X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pxy: Array2<f64>,
    px: Distribution,
    qy: Distribution,
    s: ConditionalKernel,
}

impl JointDistribution {
    pub fn new(pxy: Array2<f64>) -> Result<Self, ProbError> {
        if pxy.is_empty() {
            return Err(ProbError::Empty);
        }
        let sum = check_entries(pxy.iter())?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(ProbError::NotNormalized { sum });
        }
        let pxy = pxy.mapv(|v| v / sum);
        Ok(Self::from_normalized(pxy))
    }

    /// Builds `pxy_{ik} = px_i s_{ki}`.
    pub fn from_marginal_and_channel(
        px: &Distribution,
        s: &ConditionalKernel,
    ) -> Result<Self, ProbError> {
        if px.len() != s.inputs() {
            return Err(ProbError::Dimension {
                left: px.len(),
                right: s.inputs(),
            });
        }
        let (m, k) = (px.len(), s.outputs());
        let pxy = Array2::from_shape_fn((m, k), |(i, kk)| px[i] * s.matrix[[kk, i]]);
        Self::new(pxy)
    }

    fn from_normalized(pxy: Array2<f64>) -> Self {
        let (m, k) = pxy.dim();
        let px: Vec<f64> = pxy.rows().into_iter().map(|r| r.sum()).collect();
        let qy: Vec<f64> = pxy.columns().into_iter().map(|c| c.sum()).collect();
        let s = Array2::from_shape_fn((k, m), |(kk, i)| {
            if px[i] > 0.0 {
                pxy[[i, kk]] / px[i]
            } else {
                1.0 / k as f64
            }
        });
        // Row sums of a normalized matrix land on the simplex up to rounding,
        // so the plain constructors cannot fail here.
        let px_sum: f64 = px.iter().sum();
        let qy_sum: f64 = qy.iter().sum();
        Self {
            px: Distribution {
                mass: px.into_iter().map(|v| v / px_sum).collect(),
            },
            qy: Distribution {
                mass: qy.into_iter().map(|v| v / qy_sum).collect(),
            },
            s: ConditionalKernel { matrix: s },
            pxy,
        }
    }

    pub fn pxy(&self) -> &Array2<f64> {
        &self.pxy
    }

    pub fn px(&self) -> &Distribution {
        &self.px
    }

    pub fn qy(&self) -> &Distribution {
        &self.qy
    }

    pub fn conditional(&self) -> &ConditionalKernel {
        &self.s
    }

    /// `(M, K)`.
    pub fn dim(&self) -> (usize, usize) {
        self.pxy.dim()
    }

    /// Drops inputs with zero marginal mass. Returns the kept row indices.
    pub fn without_null_inputs(&self) -> (Self, Vec<usize>) {
        let keep: Vec<usize> = (0..self.px.len()).filter(|&i| self.px[i] > 0.0).collect();
        if keep.len() == self.px.len() {
            return (self.clone(), keep);
        }
        let k = self.pxy.ncols();
        let pxy = Array2::from_shape_fn((keep.len(), k), |(r, c)| self.pxy[[keep[r], c]]);
        (Self::from_normalized(pxy), keep)
    }
}

/// Shannon entropy in nats.
pub fn entropy(d: &Distribution) -> f64 {
    -d.mass.iter().copied().map(xlogx).sum::<f64>()
}

/// Entropy of a Bernoulli(`u`) variable in nats.
pub fn binary_entropy(u: f64) -> Result<f64, ProbError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(ProbError::Domain {
            name: "u",
            value: u,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(-xlogx(u) - xlogx(1.0 - u))
}

/// `I(X; Y)` of a joint distribution.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    mutual_information_of(&j.pxy)
}

/// Mutual information of an arbitrary non-negative matrix, treated as a joint
/// after normalization by its own total mass.
pub(crate) fn mutual_information_of(pxy: &Array2<f64>) -> f64 {
    let total: f64 = pxy.sum();
    if total <= 0.0 {
        return 0.0;
    }
    let rows: Vec<f64> = pxy.rows().into_iter().map(|r| r.sum() / total).collect();
    let cols: Vec<f64> = pxy.columns().into_iter().map(|c| c.sum() / total).collect();
    let mut mi = 0.0;
    for ((i, k), &v) in pxy.indexed_iter() {
        let v = v / total;
        if v > 0.0 {
            mi += v * (v / (rows[i] * cols[k])).ln();
        }
    }
    mi.max(0.0)
}

/// Result of a KL divergence, distinguishing the absolutely-continuous case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Divergence::Infinite)
    }
}

/// `KL(a || b)`.
pub fn kl_divergence(a: &Distribution, b: &Distribution) -> Result<Divergence, ProbError> {
    kl_slices(&a.mass, &b.mass)
}

pub(crate) fn kl_slices(a: &[f64], b: &[f64]) -> Result<Divergence, ProbError> {
    if a.len() != b.len() {
        return Err(ProbError::Dimension {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut d = 0.0;
    for (&ak, &bk) in a.iter().zip(b) {
        if ak > 0.0 {
            if bk <= 0.0 {
                return Ok(Divergence::Infinite);
            }
            d += ak * (ak / bk).ln();
        }
    }
    Ok(Divergence::Finite(d.max(0.0)))
}
