//! Fixed-multiplier Blahut-Arimoto iteration for the information bottleneck,
//! and a bisection search for the multiplier that hits a target relevance.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gas::{Residuals, SolverReport, Status};
use crate::prob::kl_slices;
use crate::problem::IbProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaConfig {
    pub bottleneck_size: Option<usize>,
    pub max_iter: usize,
    /// Stop when `I(X;T)` moves less than this between steps.
    pub tol: f64,
    pub jitter_scale: f64,
    pub rng_seed: u64,
}

impl Default for BaConfig {
    fn default() -> Self {
        Self {
            bottleneck_size: None,
            max_iter: 10_000,
            tol: 1e-12,
            jitter_scale: 1e-2,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Accepted `|I(T;Y) - target|`.
    pub tol: f64,
    pub max_trials: usize,
    pub beta_max: f64,
    pub ba: BaConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_trials: 100,
            beta_max: 1e5,
            ba: BaConfig::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaError {
    #[error("target {target} must lie in (0, {cap})")]
    Target { target: f64, cap: f64 },
    #[error("no multiplier reaches relevance {target} (closest {closest} after {trials} trials)")]
    SearchFailed {
        target: f64,
        closest: f64,
        trials: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaState {
    /// `M x N`, `u_ij = P(t_j | x_i)`.
    pub u: Array2<f64>,
    pub r: Vec<f64>,
    /// `K x N`, `P(y_k | t_j)`.
    pub py_t: Array2<f64>,
    pub beta: f64,
}

impl BaState {
    /// Rows of `u` are uniform over `n` clusters times `1 + jitter * U(-1, 1)`.
    pub fn new(problem: &IbProblem, n: usize, beta: f64, jitter: f64, seed: u64) -> Self {
        let (m, k, _) = problem.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = Array2::from_elem((m, n), 1.0 / n as f64);
        if jitter > 0.0 {
            for v in u.iter_mut() {
                *v *= 1.0 + jitter * rng.random_range(-1.0..1.0);
            }
        }
        for mut row in u.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        let mut state = Self {
            u,
            r: vec![0.0; n],
            py_t: Array2::from_elem((k, n), 1.0 / k as f64),
            beta,
        };
        state.refresh_marginals(problem);
        state
    }

    fn refresh_marginals(&mut self, problem: &IbProblem) {
        let p = problem.px();
        let s = problem.s();
        let (m, n) = self.u.dim();
        let k = s.nrows();
        for j in 0..n {
            self.r[j] = (0..m).map(|i| p[i] * self.u[[i, j]]).sum();
        }
        for j in 0..n {
            if self.r[j] <= 0.0 {
                continue;
            }
            for kk in 0..k {
                let v: f64 = (0..m).map(|i| s[[kk, i]] * self.u[[i, j]] * p[i]).sum();
                self.py_t[[kk, j]] = v / self.r[j];
            }
        }
    }

    /// `I(X;T)` of the current encoder.
    pub fn rate(&self, problem: &IbProblem) -> f64 {
        let p = problem.px();
        let r: Vec<f64> = (0..self.u.ncols())
            .map(|j| (0..self.u.nrows()).map(|i| p[i] * self.u[[i, j]]).sum())
            .collect();
        let mut total = 0.0;
        for ((i, j), &u) in self.u.indexed_iter() {
            if u > 0.0 && r[j] > 0.0 {
                total += p[i] * u * (u / r[j]).ln();
            }
        }
        total.max(0.0)
    }

    /// `I(T;Y)` of the current encoder.
    pub fn relevance(&self, problem: &IbProblem) -> f64 {
        let p = problem.px();
        let q = problem.qy();
        let s = problem.s();
        let (m, n) = self.u.dim();
        let mut total = 0.0;
        for j in 0..n {
            for kk in 0..q.len() {
                let z: f64 = (0..m).map(|i| s[[kk, i]] * self.u[[i, j]] * p[i]).sum();
                let rj: f64 = (0..m).map(|i| p[i] * self.u[[i, j]]).sum();
                if z > 0.0 {
                    total += z * (z / (rj * q[kk])).ln();
                }
            }
        }
        total.max(0.0)
    }
}

/// One self-consistent update: cluster marginal, cluster-conditional of `Y`,
/// then `u_ij ~ r_j exp(-beta KL(s_i || P(Y|t_j)))` per row.
pub fn ba_step(state: &mut BaState, problem: &IbProblem) {
    state.refresh_marginals(problem);
    let s = problem.s();
    let (m, n) = state.u.dim();
    let mut logits = vec![0.0; n];
    for i in 0..m {
        let si = s.column(i);
        let si = si.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| si.to_vec());
        for (j, l) in logits.iter_mut().enumerate() {
            let col = state.py_t.column(j).to_vec();
            let d = kl_slices(&si, &col).map(|d| d.value()).unwrap_or(f64::INFINITY);
            *l = if state.r[j] > 0.0 && d.is_finite() {
                state.r[j].ln() - state.beta * d
            } else {
                f64::NEG_INFINITY
            };
        }
        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (j, &l) in logits.iter().enumerate() {
            let v = (l - mx).exp();
            state.u[[i, j]] = v;
            total += v;
        }
        for j in 0..n {
            state.u[[i, j]] /= total;
        }
    }
}

/// Iterates [`ba_step`] at fixed `beta` from a seeded start.
pub fn ba_solve(problem: &IbProblem, beta: f64, cfg: &BaConfig) -> Result<SolverReport, BaError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(BaError::InvalidConfig(format!("beta must be finite and non-negative, got {beta}")));
    }
    if cfg.max_iter == 0 || !(cfg.tol > 0.0) || !(0.0..1.0).contains(&cfg.jitter_scale) {
        return Err(BaError::InvalidConfig("max_iter >= 1, tol > 0, jitter in [0, 1)".into()));
    }
    let n = cfg.bottleneck_size.unwrap_or(problem.bottleneck()).max(1);
    let mut state = BaState::new(problem, n, beta, cfg.jitter_scale, cfg.rng_seed);
    let mut previous = state.rate(problem);
    let mut status = Status::MaxIterations;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        ba_step(&mut state, problem);
        iterations += 1;
        let rate = state.rate(problem);
        change = (rate - previous).abs();
        previous = rate;
        if change <= cfg.tol {
            status = Status::Converged;
            break;
        }
    }
    let relevance = state.relevance(problem);
    let rate = previous;
    Ok(SolverReport {
        threshold: problem.threshold(),
        rate,
        relevance,
        objective: rate - problem.entropy_x(),
        zeta: beta,
        iterations,
        status,
        residuals: Residuals {
            marginal: 0.0,
            constraint: (relevance - problem.threshold()).abs(),
            rate_change: change,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSearch {
    pub beta: f64,
    pub report: SolverReport,
    pub trials: usize,
}

/// Finds `beta` whose fixed point has `I(T;Y)` within `tol` of `target`.
/// Only converged runs count.
///
/// The bracket starts at `[0, 1]` and doubles its upper end until the
/// relevance passes the target, then bisects. Fails when the bracket
/// collapses or the trial budget runs out without meeting the tolerance,
/// which is what happens on linear pieces of the curve.
pub fn slope_search(
    problem: &IbProblem,
    target: f64,
    cfg: &SearchConfig,
) -> Result<SlopeSearch, BaError> {
    let cap = problem.mutual_info();
    if !(target > 0.0 && target < cap) {
        return Err(BaError::Target { target, cap });
    }
    let mut trials = 0;
    let mut closest = f64::NAN;
    let mut run = |beta: f64, trials: &mut usize| -> Result<SolverReport, BaError> {
        *trials += 1;
        let rep = ba_solve(problem, beta, &cfg.ba)?;
        if closest.is_nan() || (rep.relevance - target).abs() < (closest - target).abs() {
            closest = rep.relevance;
        }
        Ok(rep)
    };
    // an unconverged run is a transient, not a point of the curve
    let hit = |rep: &SolverReport| {
        rep.status == Status::Converged && (rep.relevance - target).abs() <= cfg.tol
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let rep = run(hi, &mut trials)?;
        if hit(&rep) {
            return Ok(SlopeSearch { beta: hi, report: rep, trials });
        }
        if rep.relevance > target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > cfg.beta_max || trials >= cfg.max_trials {
            return Err(BaError::SearchFailed { target, closest, trials });
        }
    }
    while trials < cfg.max_trials && hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        let rep = run(mid, &mut trials)?;
        if hit(&rep) {
            return Ok(SlopeSearch { beta: mid, report: rep, trials });
        }
        if rep.relevance < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(BaError::SearchFailed { target, closest, trials })
}
