//! Generalized alternating Sinkhorn on the posterior (IB-OT) form of the
//! information bottleneck.
//!
//! Each iteration opens with the damped closed-form update of `r` (skipped
//! on the first iteration, so the marginals hold from the start), then runs
//! two blocks:
//!
//! * **A**: one Sinkhorn pass on `(phi, psi)`, the scalar solve for `zeta`,
//!   further passes at that `zeta` until the marginals settle, and
//!   `w = phi Lambda psi`;
//! * **B**: `lambda = -zeta` and `z = s (w r)`.

mod state;
mod zeta;

pub use state::{
    balanced_posterior, compute_kernel, init_state, lambda_projection, log_z_projection, rebalance_psi,
    sinkhorn_step, update_lambda, update_r, update_w, update_z, GasState, Kernel, DEAD_CLUSTER,
};
pub use zeta::{solve_zeta, solve_zeta_hybrid, ZetaContext, ZetaSource};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ndarray::Array2;

use crate::prob::xlogx;
use crate::root::bisect;
use crate::problem::IbProblem;

/// Margin below `I(X;Y)` a threshold must keep to be attempted.
pub const FEASIBILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasConfig {
    /// `N`; `None` uses the problem's default (`N = M`).
    pub bottleneck_size: Option<usize>,
    pub max_iter: usize,
    /// Stop when the objective moves less than this between iterations.
    pub rate_tol: f64,
    /// Required `|I(T;Y) - I|` while the constraint is active.
    pub constraint_tol: f64,
    /// Required `max_i |sum_j w_ij r_j - p_i|`.
    pub marginal_tol: f64,
    pub newton_tol: f64,
    pub newton_max_steps: usize,
    pub zeta_cap: f64,
    /// Trust-region factor for the balanced multiplier solve.
    pub zeta_growth: f64,
    /// Sinkhorn pass budget per iteration. Passes continue past it, up to
    /// four times the budget, only while the marginal residual exceeds
    /// `marginal_tol`.
    pub sinkhorn_passes: usize,
    /// Row-marginal residual that ends the passes early.
    pub pass_tol: f64,
    pub log_floor: f64,
    /// Stand-in for `zeta` inside the `r` update when the constraint is slack.
    pub zeta_floor: f64,
    pub jitter_scale: f64,
    pub rng_seed: u64,
    pub stabilized: bool,
}

impl Default for GasConfig {
    fn default() -> Self {
        Self {
            bottleneck_size: None,
            max_iter: 1000,
            rate_tol: 1e-10,
            constraint_tol: 1e-8,
            marginal_tol: 1e-10,
            newton_tol: 1e-12,
            newton_max_steps: 100,
            zeta_cap: 1e6,
            zeta_growth: 2.0,
            sinkhorn_passes: 20,
            pass_tol: 1e-12,
            log_floor: -700.0,
            zeta_floor: 1e-8,
            jitter_scale: 1e-2,
            rng_seed: 0,
            stabilized: true,
        }
    }
}

impl GasConfig {
    pub fn validate(&self) -> Result<(), GasError> {
        let positive = [
            ("rate_tol", self.rate_tol),
            ("constraint_tol", self.constraint_tol),
            ("marginal_tol", self.marginal_tol),
            ("newton_tol", self.newton_tol),
            ("pass_tol", self.pass_tol),
            ("zeta_cap", self.zeta_cap),
            ("zeta_floor", self.zeta_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GasError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.bottleneck_size == Some(0) {
            return Err(GasError::InvalidConfig("bottleneck_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.jitter_scale) {
            return Err(GasError::InvalidConfig(format!(
                "jitter_scale must lie in [0, 1), got {}",
                self.jitter_scale
            )));
        }
        if !(self.zeta_growth > 1.0) {
            return Err(GasError::InvalidConfig("zeta_growth must exceed 1".into()));
        }
        if self.max_iter == 0 || self.sinkhorn_passes == 0 || self.newton_max_steps == 0 {
            return Err(GasError::InvalidConfig("iteration caps must be at least 1".into()));
        }
        if !(self.log_floor < 0.0) {
            return Err(GasError::InvalidConfig("log_floor must be negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GasError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("threshold is not attainable")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Converged => "Converged",
            Status::MaxIterations => "MaxIterations",
            Status::Infeasible => "Infeasible",
            Status::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_i |sum_j w_ij r_j - p_i|`.
    pub marginal: f64,
    /// `|I(T;Y) - I|` when active, the shortfall `max(0, I - I(T;Y))` when slack.
    pub constraint: f64,
    /// Objective change over the last iteration.
    pub rate_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub threshold: f64,
    /// `I(X;T)` in nats.
    pub rate: f64,
    /// `I(T;Y)` in nats.
    pub relevance: f64,
    /// `sum_ij w_ij r_j log w_ij`.
    pub objective: f64,
    pub zeta: f64,
    pub iterations: usize,
    pub status: Status,
    pub residuals: Residuals,
}

impl SolverReport {
    fn unattempted(problem: &IbProblem, status: Status) -> Self {
        Self {
            threshold: problem.threshold(),
            rate: f64::NAN,
            relevance: f64::NAN,
            objective: f64::NAN,
            zeta: f64::NAN,
            iterations: 0,
            status,
            residuals: Residuals {
                marginal: f64::NAN,
                constraint: f64::NAN,
                rate_change: f64::NAN,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub objective: f64,
    pub relevance: f64,
    pub marginal_residual: f64,
    pub zeta: f64,
    /// Sinkhorn passes spent in block A.
    pub passes: usize,
    /// Whether the multiplier was held at its per-iteration ceiling.
    pub capped: bool,
}

/// Report plus the final iterate and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct Solution {
    pub report: SolverReport,
    pub state: Option<GasState>,
    pub trace: Vec<IterationDiagnostics>,
}

/// Whether the Sinkhorn passes of the current iteration may stop.
fn passes_done(state: &GasState, problem: &IbProblem, cfg: &GasConfig, passes: usize) -> bool {
    let residual = state.marginal_residual(problem);
    residual <= cfg.pass_tol
        || (passes >= cfg.sinkhorn_passes && residual <= cfg.marginal_tol)
        || passes >= PASS_EXTENSION * cfg.sinkhorn_passes
}

const PASS_EXTENSION: usize = 4;

/// Sinkhorn at a fixed multiplier from the current scalings, on a copy.
fn settle(
    state: &GasState,
    a: &Array2<f64>,
    b: &Array2<f64>,
    zeta: f64,
    problem: &IbProblem,
    cfg: &GasConfig,
) -> Result<GasState, GasError> {
    let kernel = compute_kernel(a, b, zeta, cfg.stabilized)?;
    let mut trial = state.clone();
    trial.zeta = zeta;
    for pass in 1.. {
        sinkhorn_step(&mut trial, &kernel, problem)?;
        balanced_posterior(&mut trial, &kernel);
        if passes_done(&trial, problem, cfg, pass) {
            break;
        }
    }
    update_z(&mut trial, problem);
    Ok(trial)
}

/// Far from a fixed point the multiplier can push the actual relevance well
/// past the threshold and freeze the posterior into hard clusters. When that
/// happens the multiplier is pulled back to where the settled posterior meets
/// the threshold.
fn overshoot_guard(
    state: &mut GasState,
    a: &Array2<f64>,
    b: &Array2<f64>,
    problem: &IbProblem,
    cfg: &GasConfig,
) -> Result<bool, GasError> {
    let target = problem.threshold();
    let top = state.zeta;
    if top <= 0.0 {
        return Ok(false);
    }
    let mut current = state.clone();
    update_z(&mut current, problem);
    if current.relevance(problem) <= target + OVERSHOOT_TOL {
        return Ok(false);
    }
    let mut failure = None;
    let zeta = bisect(
        |z| match settle(state, a, b, z, problem, cfg) {
            Ok(t) => t.relevance(problem) - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        top,
        GUARD_XTOL * top,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let zeta = zeta.map_err(|_| GasError::NumericalFailure("non-finite relevance"))?;
    let settled = settle(state, a, b, zeta, problem, cfg)?;
    state.w = settled.w;
    state.log_phi = settled.log_phi;
    state.log_psi = settled.log_psi;
    state.zeta = zeta;
    Ok(true)
}

/// Relevance overshoot, in nats, that triggers the guard.
const OVERSHOOT_TOL: f64 = 1e-3;

/// Relative resolution of the overshoot guard.
const GUARD_XTOL: f64 = 1e-6;

/// Runs one full iteration (`r`, then blocks A and B) in place.
pub fn iterate(
    state: &mut GasState,
    problem: &IbProblem,
    cfg: &GasConfig,
) -> Result<IterationDiagnostics, GasError> {
    let a = log_z_projection(&state.z, problem, cfg.log_floor);
    let b = lambda_projection(&state.lambda, problem);
    if state.iteration > 0 {
        update_r(state, &a, &b, cfg)?;
    }
    let c0 = -(state.r.iter().copied().map(xlogx).sum::<f64>() + problem.i_hat());

    let ceiling = cfg.zeta_growth * state.zeta.max(1.0);
    let mut passes = 0;
    let mut capped = false;
    // The multiplier is solved once, after the first scaling pass; the
    // remaining passes restore the marginals at that multiplier.
    let mut kernel = compute_kernel(&a, &b, state.zeta, cfg.stabilized)?;
    for pass in 0.. {
        sinkhorn_step(state, &kernel, problem)?;
        if pass == 0 {
            let ctx = ZetaContext {
                a: &a,
                b: &b,
                log_phi: &state.log_phi,
                log_psi: &state.log_psi,
                r: &state.r,
                c0,
                stabilized: cfg.stabilized,
            };
            // a zero threshold can never bind
            let (zeta, source) = if problem.threshold() <= 0.0 {
                (0.0, ZetaSource::Slack)
            } else {
                solve_zeta_hybrid(&ctx, state.zeta, ceiling, cfg)?
            };
            state.zeta = zeta;
            capped = source == ZetaSource::Capped;
            kernel = compute_kernel(&a, &b, zeta, cfg.stabilized)?;
        }
        balanced_posterior(state, &kernel);
        passes += 1;
        if passes_done(state, problem, cfg, passes) {
            break;
        }
    }

    capped |= overshoot_guard(state, &a, &b, problem, cfg)?;
    update_lambda(state);
    update_z(state, problem);
    state.iteration += 1;

    let diag = IterationDiagnostics {
        objective: state.objective(),
        relevance: state.relevance(problem),
        marginal_residual: state.marginal_residual(problem),
        zeta: state.zeta,
        passes,
        capped,
    };
    if !(diag.objective.is_finite() && diag.relevance.is_finite()) {
        return Err(GasError::NumericalFailure("non-finite objective"));
    }
    Ok(diag)
}

fn constraint_residual(relevance: f64, threshold: f64, zeta: f64) -> f64 {
    if zeta > 0.0 {
        (relevance - threshold).abs()
    } else {
        (threshold - relevance).max(0.0)
    }
}

/// Computes one point of the relevance-compression curve.
pub fn solve(problem: &IbProblem, cfg: &GasConfig) -> Result<SolverReport, GasError> {
    solve_detailed(problem, cfg).map(|s| s.report)
}

/// Like [`solve`] but also returns the final iterate and the trace.
pub fn solve_detailed(problem: &IbProblem, cfg: &GasConfig) -> Result<Solution, GasError> {
    cfg.validate()?;
    let problem = match cfg.bottleneck_size {
        Some(n) => problem
            .clone()
            .with_bottleneck(n)
            .map_err(|e| GasError::InvalidConfig(e.to_string()))?,
        None => problem.clone(),
    };
    if problem.threshold() > 0.0 && problem.threshold() >= problem.mutual_info() - FEASIBILITY_MARGIN
    {
        return Ok(Solution {
            report: SolverReport::unattempted(&problem, Status::Infeasible),
            state: None,
            trace: Vec::new(),
        });
    }

    let hx = problem.entropy_x();
    let threshold = problem.threshold();
    let mut state = init_state(&problem, cfg);
    let mut trace = Vec::with_capacity(cfg.max_iter.min(4096));
    let mut previous = f64::INFINITY;
    let mut status = Status::MaxIterations;
    let mut last: Option<(GasState, IterationDiagnostics, f64)> = None;

    for _ in 0..cfg.max_iter {
        let diag = match iterate(&mut state, &problem, cfg) {
            Ok(d) => d,
            Err(GasError::Infeasible) => {
                status = Status::Infeasible;
                break;
            }
            Err(GasError::NumericalFailure(_)) => {
                status = Status::NumericalFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        trace.push(diag);
        let change = (diag.objective - previous).abs();
        previous = diag.objective;
        let constraint = constraint_residual(diag.relevance, threshold, diag.zeta);
        last = Some((state.clone(), diag, change));
        if change <= cfg.rate_tol
            && constraint <= cfg.constraint_tol
            && diag.marginal_residual <= cfg.marginal_tol
        {
            status = Status::Converged;
            break;
        }
    }

    let Some((final_state, diag, change)) = last else {
        return Ok(Solution {
            report: SolverReport::unattempted(&problem, status),
            state: None,
            trace,
        });
    };
    let report = SolverReport {
        threshold,
        rate: diag.objective + hx,
        relevance: diag.relevance,
        objective: diag.objective,
        zeta: diag.zeta,
        iterations: trace.len(),
        status,
        residuals: Residuals {
            marginal: diag.marginal_residual,
            constraint: constraint_residual(diag.relevance, threshold, diag.zeta),
            rate_change: change,
        },
    };
    Ok(Solution {
        report,
        state: Some(final_state),
        trace,
    })
}
