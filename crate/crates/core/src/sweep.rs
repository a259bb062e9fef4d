//! Independent solves over many thresholds or multipliers. With the
//! `parallel` feature the points run on the rayon pool; otherwise in order.
//! Output order always matches input order.

use crate::ba::{ba_solve, BaConfig, BaError};
use crate::gas::{solve, GasConfig, GasError, SolverReport};
use crate::prob::JointDistribution;
use crate::problem::IbProblem;

#[cfg(feature = "parallel")]
pub fn map_points<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_points<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Same as [`map_points`] but always sequential, for benchmarking against it.
pub fn map_points_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// One GAS solve per threshold.
pub fn gas_curve(
    joint: &JointDistribution,
    thresholds: &[f64],
    cfg: &GasConfig,
) -> Vec<Result<SolverReport, GasError>> {
    map_points(thresholds, |&i| gas_point(joint, i, cfg))
}

pub fn gas_curve_sequential(
    joint: &JointDistribution,
    thresholds: &[f64],
    cfg: &GasConfig,
) -> Vec<Result<SolverReport, GasError>> {
    map_points_sequential(thresholds, |&i| gas_point(joint, i, cfg))
}

fn gas_point(joint: &JointDistribution, i: f64, cfg: &GasConfig) -> Result<SolverReport, GasError> {
    let problem = IbProblem::new(joint, i).map_err(|e| GasError::InvalidConfig(e.to_string()))?;
    solve(&problem, cfg)
}

/// One BA solve per multiplier, all at threshold 0.
pub fn ba_sweep(
    joint: &JointDistribution,
    betas: &[f64],
    cfg: &BaConfig,
) -> Vec<Result<SolverReport, BaError>> {
    let problem = IbProblem::new(joint, 0.0).expect("zero threshold is valid");
    map_points(betas, |&b| ba_solve(&problem, b, cfg))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|t| lo + (hi - lo) * t as f64 / (n - 1) as f64)
            .collect(),
    }
}
