//! Discrete information-bottleneck curves.
//!
//! The main entry point is [`gas::solve`], which computes one point
//! `R(I) = min I(X;T)` subject to `I(T;Y) >= I` by alternating Sinkhorn
//! scaling on the posterior `P(X|T)`. [`ba`] holds the fixed-multiplier
//! Blahut-Arimoto baseline, [`oracles`] the closed-form curves, and
//! [`problems`] the joint distributions used to exercise them.
//! All information quantities are in nats.

// NaN must fail validity checks, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ba;
pub mod gas;
pub mod numeric;
pub mod oracles;
pub mod prob;
pub mod problem;
pub mod problems;
pub mod root;
pub mod sweep;

pub use gas::{GasConfig, SolverReport, Status};
pub use prob::{ConditionalKernel, Distribution, JointDistribution, ProbError};
pub use problem::IbProblem;
