//! The scalar equation that fixes the information multiplier each pass.

use ndarray::Array2;

use super::{GasConfig, GasError};
use crate::root::{safeguarded_newton, RootError};

/// Everything `G` depends on besides the candidate multiplier itself.
///
/// `a_ij = sum_k s_ki log z_kj` (floored) and `b_ij = sum_k s_ki lambda_kj`
/// are fixed for the whole solve; the scalings enter through their logs.
#[derive(Debug, Clone, Copy)]
pub struct ZetaContext<'a> {
    pub a: &'a Array2<f64>,
    pub b: &'a Array2<f64>,
    pub log_phi: &'a [f64],
    pub log_psi: &'a [f64],
    pub r: &'a [f64],
    /// `-(sum_j r_j log r_j + I_hat)`.
    pub c0: f64,
    pub stabilized: bool,
}

impl<'a> ZetaContext<'a> {
    /// Returns `(sum psi_j r_j phi_i e^{-b + zeta a} a, same with a^2)`.
    fn moments(&self, zeta: f64) -> (f64, f64) {
        let (m, n) = self.a.dim();
        let exponent = |i: usize, j: usize| {
            self.log_phi[i] + self.log_psi[j] + self.r[j].ln() - self.b[[i, j]] + zeta * self.a[[i, j]]
        };
        let shift = if self.stabilized {
            let mut mx = f64::NEG_INFINITY;
            for i in 0..m {
                for j in 0..n {
                    mx = mx.max(exponent(i, j));
                }
            }
            if mx.is_finite() {
                mx
            } else {
                0.0
            }
        } else {
            0.0
        };
        let (mut first, mut second) = (0.0, 0.0);
        for i in 0..m {
            for j in 0..n {
                let a = self.a[[i, j]];
                let t = (exponent(i, j) - shift).exp();
                first += t * a;
                second += t * a * a;
            }
        }
        let scale = shift.exp();
        (first * scale, second * scale)
    }

    /// `G(zeta)` with the scalings held at their current values.
    pub fn g_value(&self, zeta: f64) -> f64 {
        self.c0 + self.moments(zeta).0
    }

    /// `G'(zeta)`, a sum of positive terms.
    pub fn g_derivative(&self, zeta: f64) -> f64 {
        self.moments(zeta).1
    }

    fn g_pair(&self, zeta: f64) -> (f64, f64) {
        let (g1, g2) = self.moments(zeta);
        (self.c0 + g1, g2)
    }

    /// `G` with `psi` rebalanced for each candidate, so every column of the
    /// resulting posterior sums to one. Returns the value and its derivative,
    /// which is the `r`-weighted variance of `a` under each column's posterior.
    pub fn g_balanced(&self, zeta: f64) -> (f64, f64) {
        let (m, n) = self.a.dim();
        let mut value = self.c0;
        let mut slope = 0.0;
        let mut weights = vec![0.0; m];
        for j in 0..n {
            if self.r[j] <= 0.0 {
                continue;
            }
            let a = self.a.column(j);
            let b = self.b.column(j);
            let mut top = f64::NEG_INFINITY;
            for (i, wt) in weights.iter_mut().enumerate() {
                *wt = self.log_phi[i] - b[i] + zeta * a[i];
                top = top.max(*wt);
            }
            let (mut total, mut first, mut second) = (0.0, 0.0, 0.0);
            for (wt, &ai) in weights.iter().zip(a.iter()) {
                let e = (wt - top).exp();
                total += e;
                first += e * ai;
                second += e * ai * ai;
            }
            let mean = first / total;
            value += self.r[j] * mean;
            slope += self.r[j] * (second / total - mean * mean).max(0.0);
        }
        (value, slope)
    }
}

fn check(v: f64) -> Result<f64, GasError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GasError::NumericalFailure("non-finite G"))
    }
}

fn root_err(e: RootError) -> GasError {
    match e {
        RootError::NonFinite => GasError::NumericalFailure("non-finite G"),
        RootError::BadBracket => GasError::NumericalFailure("invalid bracket"),
    }
}

/// Solves `G(zeta) = 0` on `[0, inf)`.
///
/// `G(0) >= 0` means the constraint is slack and `0` is returned. Otherwise
/// the root is bracketed by doubling from `max(1, previous)` up to
/// `zeta_cap`, then refined by safeguarded Newton warm-started at `previous`.
pub fn solve_zeta(ctx: &ZetaContext<'_>, previous: f64, cfg: &GasConfig) -> Result<f64, GasError> {
    if check(ctx.g_value(0.0))? >= -cfg.newton_tol {
        return Ok(0.0);
    }
    let (lo, hi) = bracket(|z| ctx.g_value(z), previous, cfg.zeta_cap)?;
    let root = safeguarded_newton(
        |z| ctx.g_pair(z),
        lo,
        hi,
        previous,
        cfg.newton_tol,
        cfg.newton_max_steps,
    )
    .map_err(root_err)?;
    Ok(root.x)
}

fn bracket<F: FnMut(f64) -> f64>(mut g: F, previous: f64, cap: f64) -> Result<(f64, f64), GasError> {
    let mut lo = 0.0;
    let mut hi = previous.max(1.0).min(cap);
    loop {
        if check(g(hi))? >= 0.0 {
            return Ok((lo, hi));
        }
        if hi >= cap {
            return Err(GasError::Infeasible);
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
    }
}

/// Which branch produced the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZetaSource {
    /// `G(0) >= 0`: the constraint is slack.
    Slack,
    /// Root of the balanced equation inside the trust region.
    Balanced,
    /// No root inside the trust region; the multiplier sits on its ceiling.
    Capped,
}

/// The multiplier update used inside the solver loop.
///
/// Solves the balanced equation on `[0, ceiling]`, warm-started at
/// `previous`. A nonnegative value at zero means the constraint is slack.
/// When even `ceiling` leaves `G < 0` the ceiling itself is returned, unless
/// it has reached `zeta_cap`, in which case the threshold is declared
/// unreachable.
pub fn solve_zeta_hybrid(
    ctx: &ZetaContext<'_>,
    previous: f64,
    ceiling: f64,
    cfg: &GasConfig,
) -> Result<(f64, ZetaSource), GasError> {
    let hi = ceiling.min(cfg.zeta_cap);
    let x0 = previous.clamp(0.0, hi);
    let start = ctx.g_balanced(x0);
    check(start.0)?;
    if x0 > 0.0 && start.0.abs() <= cfg.newton_tol {
        // still need to rule out a slack constraint below the warm start
        if check(ctx.g_balanced(0.0).0)? >= -cfg.newton_tol {
            return Ok((0.0, ZetaSource::Slack));
        }
        return Ok((x0, ZetaSource::Balanced));
    }
    let (lo, up) = if start.0 >= 0.0 {
        if x0 == 0.0 || check(ctx.g_balanced(0.0).0)? >= -cfg.newton_tol {
            return Ok((0.0, ZetaSource::Slack));
        }
        (0.0, x0)
    } else {
        if x0 >= hi || check(ctx.g_balanced(hi).0)? < 0.0 {
            if hi >= cfg.zeta_cap {
                return Err(GasError::Infeasible);
            }
            return Ok((hi, ZetaSource::Capped));
        }
        (x0, hi)
    };
    let root = safeguarded_newton(
        |z| {
            if z == x0 {
                start
            } else {
                ctx.g_balanced(z)
            }
        },
        lo,
        up,
        x0,
        cfg.newton_tol,
        cfg.newton_max_steps,
    )
    .map_err(root_err)?;
    Ok((root.x, ZetaSource::Balanced))
}
