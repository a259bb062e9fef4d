use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GasConfig, GasError};
use crate::numeric::LogSumExp;
use crate::prob::xlogx;
use crate::problem::IbProblem;

/// Clusters whose mass falls below this are frozen.
pub const DEAD_CLUSTER: f64 = 1e-300;

/// Primal and dual iterates. The scalings are kept as logarithms so that
/// stabilized runs never materialize `psi`, which can underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct GasState {
    /// `M x N`, `w_ij = P(x_i | t_j)`.
    pub w: Array2<f64>,
    /// `P(t_j)`.
    pub r: Vec<f64>,
    /// `K x N`, `z_kj = P(y_k, t_j)`.
    pub z: Array2<f64>,
    pub log_phi: Vec<f64>,
    pub log_psi: Vec<f64>,
    /// `K x N`.
    pub lambda: Array2<f64>,
    pub zeta: f64,
    pub eta: f64,
    /// Completed iterations.
    pub iteration: usize,
    /// Fraction of the closed-form `log r` step currently taken.
    pub r_step: f64,
    /// Last applied change in `log r`, zero for dead clusters.
    pub r_delta: Vec<f64>,
}

impl GasState {
    pub fn phi(&self) -> Vec<f64> {
        self.log_phi.iter().map(|v| v.exp()).collect()
    }

    pub fn psi(&self) -> Vec<f64> {
        self.log_psi.iter().map(|v| v.exp()).collect()
    }

    /// `alpha_i = -log phi_i - 1/2`.
    pub fn alpha(&self) -> Vec<f64> {
        self.log_phi.iter().map(|v| -v - 0.5).collect()
    }

    /// `beta_j = -log psi_j - 1/2`.
    pub fn beta(&self) -> Vec<f64> {
        self.log_psi.iter().map(|v| -v - 0.5).collect()
    }

    /// `sum_ij w_ij r_j log w_ij`, equal to `-H(X | T)`.
    pub fn objective(&self) -> f64 {
        let mut total = 0.0;
        for ((_, j), &w) in self.w.indexed_iter() {
            total += self.r[j] * xlogx(w);
        }
        total
    }

    /// `I(T; Y) = sum_kj z_kj log(z_kj / (r_j q_k))`.
    pub fn relevance(&self, problem: &IbProblem) -> f64 {
        let q = problem.qy();
        let mut total = 0.0;
        for ((k, j), &z) in self.z.indexed_iter() {
            if z > 0.0 {
                total += z * (z / (self.r[j] * q[k])).ln();
            }
        }
        total
    }

    /// `max_i |sum_j w_ij r_j - p_i|`.
    pub fn marginal_residual(&self, problem: &IbProblem) -> f64 {
        let p = problem.px();
        self.w
            .rows()
            .into_iter()
            .zip(p)
            .map(|(row, &pi)| {
                let s: f64 = row.iter().zip(&self.r).map(|(w, r)| w * r).sum();
                (s - pi).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Initial iterate: unit scalings, `zeta = eta = 1`, `lambda = -1`, uniform
/// `r`, and uniform posterior columns perturbed by `1 + jitter * u` with
/// `u ~ U(-1, 1)`. `z` is derived from that `w` so the perturbation reaches
/// the first kernel.
pub fn init_state(problem: &IbProblem, cfg: &GasConfig) -> GasState {
    let (m, k, n) = problem.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut w = Array2::from_elem((m, n), 1.0 / m as f64);
    if cfg.jitter_scale > 0.0 {
        for v in w.iter_mut() {
            *v *= 1.0 + cfg.jitter_scale * rng.random_range(-1.0..1.0);
        }
        for mut col in w.columns_mut() {
            let s = col.sum();
            col.mapv_inplace(|v| v / s);
        }
    }
    let mut state = GasState {
        w,
        r: vec![1.0 / n as f64; n],
        z: Array2::zeros((k, n)),
        log_phi: vec![0.0; m],
        log_psi: vec![0.0; n],
        lambda: Array2::from_elem((k, n), -1.0),
        zeta: 1.0,
        eta: 1.0,
        iteration: 0,
        r_step: R_STEP_INIT,
        r_delta: vec![0.0; n],
    };
    update_z(&mut state, problem);
    state
}

/// `a_ij = sum_k s_ki max(log z_kj, log_floor)`.
pub fn log_z_projection(z: &Array2<f64>, problem: &IbProblem, log_floor: f64) -> Array2<f64> {
    let log_z = z.mapv(|v| if v > 0.0 { v.ln().max(log_floor) } else { log_floor });
    problem.s().t().dot(&log_z)
}

/// `b_ij = sum_k s_ki lambda_kj`.
pub fn lambda_projection(lambda: &Array2<f64>, problem: &IbProblem) -> Array2<f64> {
    problem.s().t().dot(lambda)
}

/// Kernel `Lambda_ij = exp(-b_ij + zeta a_ij)`.
///
/// Stabilized kernels store `log_values_ij = -b_ij + zeta (a_ij - Z_j)` with
/// `Z_j = max_i a_ij` and `offsets_j = zeta Z_j`, so the true kernel is
/// `exp(log_values + offsets)`. Plain kernels have zero offsets.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub log_values: Array2<f64>,
    pub offsets: Vec<f64>,
    pub stabilized: bool,
}

impl Kernel {
    pub fn values(&self) -> Array2<f64> {
        self.log_values.mapv(f64::exp)
    }
}

/// Smallest damping factor for the cluster-weight step.
const R_STEP_MIN: f64 = 1.0 / 1024.0;
const R_STEP_INIT: f64 = 0.1;

/// Largest exponent the plain kernel tolerates before `exp` overflows.
const EXP_SAFE: f64 = 709.0;

pub fn compute_kernel(
    a: &Array2<f64>,
    b: &Array2<f64>,
    zeta: f64,
    stabilized: bool,
) -> Result<Kernel, GasError> {
    let (m, n) = a.dim();
    if stabilized {
        let mut offsets = vec![f64::NEG_INFINITY; n];
        for ((_, j), &v) in a.indexed_iter() {
            offsets[j] = offsets[j].max(v);
        }
        let log_values = Array2::from_shape_fn((m, n), |(i, j)| {
            -b[[i, j]] + zeta * (a[[i, j]] - offsets[j])
        });
        for o in offsets.iter_mut() {
            *o *= zeta;
        }
        Ok(Kernel {
            log_values,
            offsets,
            stabilized,
        })
    } else {
        let log_values = Array2::from_shape_fn((m, n), |(i, j)| -b[[i, j]] + zeta * a[[i, j]]);
        if log_values.iter().any(|&v| !(v <= EXP_SAFE)) {
            return Err(GasError::NumericalFailure("kernel exponent out of range"));
        }
        Ok(Kernel {
            log_values,
            offsets: vec![0.0; n],
            stabilized,
        })
    }
}

/// One Sinkhorn sweep: `psi_j = 1 / sum_i Lambda_ij phi_i`, then
/// `phi_i = p_i / sum_j Lambda_ij psi_j r_j`.
pub fn sinkhorn_step(
    state: &mut GasState,
    kernel: &Kernel,
    problem: &IbProblem,
) -> Result<(), GasError> {
    let (m, n) = kernel.log_values.dim();
    let p = problem.px();
    if kernel.stabilized {
        let mut cols = vec![LogSumExp::new(); n];
        for i in 0..m {
            let lp = state.log_phi[i];
            for (j, acc) in cols.iter_mut().enumerate() {
                acc.push(kernel.log_values[[i, j]] + lp);
            }
        }
        // scaled psi, i.e. psi_j exp(offset_j)
        let scaled: Vec<f64> = cols.iter().map(|c| -c.value()).collect();
        let shift: Vec<f64> = scaled.iter().zip(&state.r).map(|(s, r)| s + r.ln()).collect();
        for i in 0..m {
            let mut acc = LogSumExp::new();
            for (&l, &t) in kernel.log_values.row(i).iter().zip(&shift) {
                acc.push(l + t);
            }
            state.log_phi[i] = p[i].ln() - acc.value();
        }
        for j in 0..n {
            state.log_psi[j] = scaled[j] - kernel.offsets[j];
        }
    } else {
        let lam = kernel.values();
        let phi = state.phi();
        let psi: Vec<f64> = (0..n)
            .map(|j| 1.0 / (0..m).map(|i| lam[[i, j]] * phi[i]).sum::<f64>())
            .collect();
        for i in 0..m {
            let d: f64 = (0..n).map(|j| lam[[i, j]] * psi[j] * state.r[j]).sum();
            state.log_phi[i] = (p[i] / d).ln();
        }
        for j in 0..n {
            state.log_psi[j] = psi[j].ln();
        }
    }
    if state
        .log_phi
        .iter()
        .chain(&state.log_psi)
        .any(|v| !v.is_finite())
    {
        return Err(GasError::NumericalFailure("scaling vector degenerate"));
    }
    Ok(())
}

/// Recomputes `psi` alone so every column of the next posterior sums to one.
pub fn rebalance_psi(state: &mut GasState, kernel: &Kernel) {
    let (m, n) = kernel.log_values.dim();
    let mut cols = vec![LogSumExp::new(); n];
    for i in 0..m {
        let lp = state.log_phi[i];
        for (j, acc) in cols.iter_mut().enumerate() {
            acc.push(kernel.log_values[[i, j]] + lp);
        }
    }
    for j in 0..n {
        state.log_psi[j] = -cols[j].value() - kernel.offsets[j];
    }
}

/// `w_ij = phi_i Lambda_ij psi_j`. Dead clusters keep their column.
pub fn update_w(state: &mut GasState, kernel: &Kernel) {
    let (m, n) = state.w.dim();
    if kernel.stabilized {
        for j in 0..n {
            if state.r[j] < DEAD_CLUSTER {
                continue;
            }
            let lpsi = state.log_psi[j] + kernel.offsets[j];
            for i in 0..m {
                state.w[[i, j]] = (state.log_phi[i] + kernel.log_values[[i, j]] + lpsi).exp();
            }
        }
    } else {
        let phi = state.phi();
        let psi = state.psi();
        for j in 0..n {
            if state.r[j] < DEAD_CLUSTER {
                continue;
            }
            for i in 0..m {
                state.w[[i, j]] = phi[i] * kernel.log_values[[i, j]].exp() * psi[j];
            }
        }
    }
}

/// [`rebalance_psi`] followed by [`update_w`], sharing the exponentials.
pub fn balanced_posterior(state: &mut GasState, kernel: &Kernel) {
    let (m, n) = state.w.dim();
    if !kernel.stabilized {
        rebalance_psi(state, kernel);
        update_w(state, kernel);
        return;
    }
    let mut col = vec![0.0; m];
    for j in 0..n {
        let mut top = f64::NEG_INFINITY;
        for (i, c) in col.iter_mut().enumerate() {
            *c = state.log_phi[i] + kernel.log_values[[i, j]];
            top = top.max(*c);
        }
        let mut total = 0.0;
        for c in col.iter_mut() {
            *c = (*c - top).exp();
            total += *c;
        }
        state.log_psi[j] = -(top + total.ln()) - kernel.offsets[j];
        if state.r[j] < DEAD_CLUSTER {
            continue;
        }
        for (i, c) in col.iter().enumerate() {
            state.w[[i, j]] = c / total;
        }
    }
}

/// `lambda_kj = -zeta`.
pub fn update_lambda(state: &mut GasState) {
    let zeta = state.zeta;
    state.lambda.fill(-zeta);
}

/// `z_kj = sum_i s_ki w_ij r_j`.
pub fn update_z(state: &mut GasState, problem: &IbProblem) {
    let mut wr = state.w.clone();
    for mut row in wr.rows_mut() {
        for (v, r) in row.iter_mut().zip(&state.r) {
            *v *= r;
        }
    }
    state.z = problem.s().dot(&wr);
}

/// Closed-form cluster weights: `log r~_j = -A_j / zeta - 1`, normalized in
/// the log domain, with `eta = zeta log sum_j r~_j`. A vanishing multiplier
/// is replaced by `zeta_floor` here only.
pub fn update_r(
    state: &mut GasState,
    a: &Array2<f64>,
    b: &Array2<f64>,
    cfg: &GasConfig,
) -> Result<(), GasError> {
    let (m, n) = state.w.dim();
    let zeta = state.zeta.max(cfg.zeta_floor);
    let alpha = state.alpha();
    let beta = state.beta();
    let mut log_rt = vec![0.0; n];
    for j in 0..n {
        let mut aj = -beta[j];
        for i in 0..m {
            let w = state.w[[i, j]];
            aj += xlogx(w) - zeta * w * a[[i, j]] + alpha[i] * w + beta[j] * w + w * b[[i, j]];
        }
        if !aj.is_finite() {
            return Err(GasError::NumericalFailure("non-finite cluster weight"));
        }
        log_rt[j] = -aj / zeta - 1.0;
    }
    let mut acc = LogSumExp::new();
    for &v in &log_rt {
        acc.push(v);
    }
    let norm = acc.value();
    state.eta = zeta * norm;
    let mut step: Vec<f64> = log_rt
        .iter()
        .zip(&state.r)
        .map(|(v, &r)| if r > 0.0 { v - norm - r.ln() } else { 0.0 })
        .collect();
    // Successive steps pointing against each other mean the closed form is
    // overshooting; shrink the step until they agree again.
    let turn: f64 = step.iter().zip(&state.r_delta).map(|(a, b)| a * b).sum();
    state.r_step = if turn < 0.0 {
        (0.5 * state.r_step).max(R_STEP_MIN)
    } else {
        (1.25 * state.r_step).min(1.0)
    };
    for v in step.iter_mut() {
        *v *= state.r_step;
    }
    for ((r, v), d) in state.r.iter_mut().zip(&step).zip(state.r_delta.iter_mut()) {
        *d = *v;
        if *r > 0.0 {
            *r *= v.exp();
        }
    }
    let total: f64 = state.r.iter().sum();
    for r in state.r.iter_mut() {
        *r /= total;
    }
    Ok(())
}
