use ndarray::Array2;
use thiserror::Error;

use crate::prob::{entropy, mutual_information, xlogx, JointDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IbProblemError {
    #[error("threshold {0} must be finite and non-negative")]
    Threshold(f64),
    #[error("bottleneck size must be at least 1")]
    Bottleneck,
}

/// A joint distribution paired with a relevance threshold `I` (nats).
///
/// Inputs with zero marginal mass are dropped on construction; they carry no
/// information and would make `log p_i` undefined.
#[derive(Debug, Clone)]
pub struct IbProblem {
    joint: JointDistribution,
    threshold: f64,
    i_hat: f64,
    bottleneck: usize,
    mutual_info: f64,
    hx: f64,
}

impl IbProblem {
    pub fn new(joint: &JointDistribution, threshold: f64) -> Result<Self, IbProblemError> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(IbProblemError::Threshold(threshold));
        }
        let (joint, _) = joint.without_null_inputs();
        let sum_qlogq: f64 = joint.qy().as_slice().iter().copied().map(xlogx).sum();
        let bottleneck = joint.dim().0;
        Ok(Self {
            i_hat: threshold + sum_qlogq,
            mutual_info: mutual_information(&joint),
            hx: entropy(joint.px()),
            threshold,
            bottleneck,
            joint,
        })
    }

    /// Overrides the default `N = M`.
    pub fn with_bottleneck(mut self, n: usize) -> Result<Self, IbProblemError> {
        if n == 0 {
            return Err(IbProblemError::Bottleneck);
        }
        self.bottleneck = n;
        Ok(self)
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `I + sum_k q_k log q_k`.
    pub fn i_hat(&self) -> f64 {
        self.i_hat
    }

    pub fn bottleneck(&self) -> usize {
        self.bottleneck
    }

    /// `I(X; Y)`, the largest attainable relevance.
    pub fn mutual_info(&self) -> f64 {
        self.mutual_info
    }

    /// `H(X)`.
    pub fn entropy_x(&self) -> f64 {
        self.hx
    }

    pub fn px(&self) -> &[f64] {
        self.joint.px().as_slice()
    }

    pub fn qy(&self) -> &[f64] {
        self.joint.qy().as_slice()
    }

    /// `K x M` conditional `s_ki = P(y_k | x_i)`.
    pub fn s(&self) -> &Array2<f64> {
        self.joint.conditional().matrix()
    }

    /// `(M, K, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let (m, k) = self.joint.dim();
        (m, k, self.bottleneck)
    }
}
