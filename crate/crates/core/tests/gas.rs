mod common;

use ibgas::gas::*;
use ibgas::problems::{bernoulli_joint, constant_slope_joint};
use ibgas::{IbProblem, JointDistribution};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bern(i: f64) -> IbProblem {
    IbProblem::new(&bernoulli_joint(0.15).unwrap(), i).unwrap()
}

fn random_problem(rng: &mut ChaCha8Rng, m: usize, k: usize, n: usize, frac: f64) -> IbProblem {
    let pxy = Array2::from_shape_fn((m, k), |_| rng.random::<f64>() + 0.05);
    let total = pxy.sum();
    let joint = JointDistribution::new(pxy / total).unwrap();
    let mi = ibgas::prob::mutual_information(&joint);
    IbProblem::new(&joint, frac * mi).unwrap().with_bottleneck(n).unwrap()
}

/// A mid-run state and its fixed projections.
fn warmed(problem: &IbProblem, cfg: &GasConfig, iters: usize) -> (GasState, Array2<f64>, Array2<f64>) {
    let mut state = init_state(problem, cfg);
    for _ in 0..iters {
        iterate(&mut state, problem, cfg).unwrap();
    }
    let a = log_z_projection(&state.z, problem, cfg.log_floor);
    let b = lambda_projection(&state.lambda, problem);
    (state, a, b)
}

fn ctx<'a>(state: &'a GasState, a: &'a Array2<f64>, b: &'a Array2<f64>, problem: &IbProblem, stabilized: bool) -> ZetaContext<'a> {
    let c0 = -(state.r.iter().map(|&r| if r > 0.0 { r * r.ln() } else { 0.0 }).sum::<f64>() + problem.i_hat());
    ZetaContext {
        a,
        b,
        log_phi: &state.log_phi,
        log_psi: &state.log_psi,
        r: &state.r,
        c0,
        stabilized,
    }
}

fn z_by_loops(state: &GasState, problem: &IbProblem) -> Array2<f64> {
    let (m, k, n) = problem.dims();
    let s = problem.s();
    let mut z = Array2::zeros((k, n));
    for kk in 0..k {
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..m {
                acc += s[[kk, i]] * state.w[[i, j]] * state.r[j];
            }
            z[[kk, j]] = acc;
        }
    }
    z
}

fn assert_invariants(state: &GasState, problem: &IbProblem) {
    for col in state.w.columns() {
        assert!((col.sum() - 1.0).abs() < 1e-10);
    }
    assert!((state.r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(state.marginal_residual(problem) <= 1e-10);
    let z = z_by_loops(state, problem);
    assert!(z.iter().zip(state.z.iter()).all(|(a, b)| (a - b).abs() <= 1e-14));
    assert!(state.zeta >= 0.0);
    assert!(state.lambda.iter().all(|&l| l == -state.zeta));
}

#[test]
fn init_literal_and_jittered() {
    let p = bern(0.1);
    let literal = init_state(&p, &GasConfig { jitter_scale: 0.0, ..Default::default() });
    assert!(literal.w.iter().all(|&v| v == 0.5));
    assert_eq!(literal.r, vec![0.5, 0.5]);
    assert_eq!(literal.zeta, 1.0);
    assert_eq!(literal.eta, 1.0);
    assert!(literal.lambda.iter().all(|&l| l == -1.0));
    assert!(literal.log_phi.iter().chain(&literal.log_psi).all(|&v| v == 0.0));
    assert!(literal.z.iter().all(|&v| (v - 0.25).abs() < 1e-15));

    let cfg = GasConfig::default();
    let a = init_state(&p, &cfg);
    let b = init_state(&p, &cfg);
    assert_eq!(a, b);
    assert_ne!(a.w, literal.w);
    for col in a.w.columns() {
        assert!((col.sum() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn kernel_examples() {
    let p = bern(0.1);
    let st = init_state(&p, &GasConfig { jitter_scale: 0.0, ..Default::default() });
    let a = log_z_projection(&st.z, &p, -700.0);
    let b = lambda_projection(&st.lambda, &p);
    let plain = compute_kernel(&a, &b, 0.0, false).unwrap();
    assert!(plain.values().iter().all(|&v| (v - std::f64::consts::E).abs() < 1e-14));

    let (st, a, b) = warmed(&p, &GasConfig::default(), 3);
    let k = compute_kernel(&a, &b, st.zeta, true).unwrap();
    for j in 0..a.ncols() {
        let top = (0..a.nrows()).map(|i| st.zeta * (a[[i, j]] - a.column(j).fold(f64::MIN, |x, &y| x.max(y)))).fold(f64::MIN, f64::max);
        assert_eq!(top, 0.0);
    }
    // same kernel up to the stored offsets
    let plain = compute_kernel(&a, &b, st.zeta, false).unwrap();
    for ((i, j), &v) in plain.log_values.indexed_iter() {
        assert!((k.log_values[[i, j]] + k.offsets[j] - v).abs() < 1e-12);
    }
}

#[test]
fn unstabilized_kernel_rejects_overflow() {
    let a = Array2::from_elem((2, 2), -1.0);
    let b = Array2::from_elem((2, 2), -800.0);
    assert!(matches!(compute_kernel(&a, &b, 0.0, false), Err(GasError::NumericalFailure(_))));
    assert!(compute_kernel(&a, &b, 0.0, true).is_ok());
}

#[test]
fn modes_agree_after_five_iterations() {
    let p = bern(0.1308);
    let (s1, _, _) = warmed(&p, &GasConfig::default(), 5);
    let (s2, _, _) = warmed(&p, &GasConfig { stabilized: false, ..Default::default() }, 5);
    for (a, b) in s1.w.iter().zip(s2.w.iter()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn sinkhorn_uniform_kernel() {
    let p = IbProblem::new(&constant_slope_joint(), 0.1).unwrap();
    let mut st = init_state(&p, &GasConfig { jitter_scale: 0.0, ..Default::default() });
    for stabilized in [false, true] {
        let kernel = Kernel {
            log_values: Array2::zeros((4, 4)),
            offsets: vec![0.0; 4],
            stabilized,
        };
        st.log_phi = vec![0.0; 4];
        sinkhorn_step(&mut st, &kernel, &p).unwrap();
        for &lp in &st.log_psi {
            assert!((lp.exp() - 0.25).abs() < 1e-15);
        }
        let phi = st.phi();
        let psi = st.psi();
        for (&f, &px) in phi.iter().zip(p.px()) {
            let s: f64 = (0..4).map(|j| f * psi[j] * st.r[j]).sum();
            assert!((s - px).abs() < 1e-15);
        }
    }
}

#[test]
fn first_iteration_meets_marginals() {
    let p = bern(0.1308);
    let mut st = init_state(&p, &GasConfig::default());
    iterate(&mut st, &p, &GasConfig::default()).unwrap();
    assert!(st.marginal_residual(&p) <= 1e-12);
}

#[test]
fn g_derivative_positive_and_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let p = random_problem(&mut rng, 5, 4, 3, 0.5);
        let cfg = GasConfig::default();
        let (st, a, b) = warmed(&p, &cfg, 2);
        for stabilized in [true, false] {
            let c = ctx(&st, &a, &b, &p, stabilized);
            for _ in 0..20 {
                let z = rng.random_range(0.0..10.0);
                let d = c.g_derivative(z);
                assert!(d > 0.0);
                let h = 1e-5;
                let fd = (c.g_value(z + h) - c.g_value(z - h)) / (2.0 * h);
                assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{fd} vs {d}");
                let (_, s) = c.g_balanced(z);
                let fd = (c.g_balanced(z + h).0 - c.g_balanced(z - h).0) / (2.0 * h);
                assert!((fd - s).abs() <= 1e-6 * s.abs().max(1.0), "{fd} vs {s}");
            }
        }
    }
}

#[test]
fn slack_start_gives_zero_multiplier() {
    // A context whose zero-multiplier posterior is a separating channel with
    // relevance far above a small threshold: b_ij = -log w_ij, unit scalings.
    let p = bern(0.01);
    let cfg = GasConfig::default();
    let w = ndarray::array![[0.9, 0.1], [0.1, 0.9]];
    let mut st = init_state(&p, &GasConfig { jitter_scale: 0.0, ..cfg.clone() });
    st.w = w.clone();
    update_z(&mut st, &p);
    assert!(st.relevance(&p) > 0.1);
    let a = log_z_projection(&st.z, &p, cfg.log_floor);
    let b = w.mapv(|v: f64| -v.ln());
    let c = ctx(&st, &a, &b, &p, true);
    assert!(c.g_value(0.0) >= 0.0);
    assert!(c.g_balanced(0.0).0 >= 0.0);
    assert_eq!(solve_zeta(&c, 1.0, &cfg).unwrap(), 0.0);
    assert_eq!(solve_zeta_hybrid(&c, 1.0, 2.0, &cfg).unwrap(), (0.0, ZetaSource::Slack));
}

#[test]
fn newton_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = GasConfig::default();
    let mut checked = 0;
    for _ in 0..10 {
        let p = random_problem(&mut rng, 5, 4, 3, 0.6);
        let (st, a, b) = warmed(&p, &cfg, 1);
        let c = ctx(&st, &a, &b, &p, true);
        if c.g_value(0.0) >= 0.0 {
            continue;
        }
        let root = solve_zeta(&c, st.zeta, &cfg).unwrap();
        assert!(c.g_value(root).abs() <= cfg.newton_tol);
        let (mut lo, mut hi) = (0.0, 1.0);
        while c.g_value(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if c.g_value(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((root - 0.5 * (lo + hi)).abs() <= 1e-8);

        if let Ok((bal, ZetaSource::Balanced)) = solve_zeta_hybrid(&c, st.zeta, cfg.zeta_cap, &cfg) {
            let (mut lo, mut hi) = (0.0, cfg.zeta_cap);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if c.g_balanced(mid).0 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((bal - 0.5 * (lo + hi)).abs() <= 1e-8);
        }
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn unreachable_threshold_is_infeasible() {
    let mi = ibgas::prob::mutual_information(&bernoulli_joint(0.15).unwrap());
    for i in [mi, mi + 0.01, 0.6] {
        let rep = solve(&bern(i), &GasConfig::default()).unwrap();
        assert_eq!(rep.status, Status::Infeasible);
    }
}

#[test]
fn posterior_update_examples() {
    let p = bern(0.1308);
    let cfg = GasConfig::default();
    let (st, _, _) = warmed(&p, &cfg, 4);
    for col in st.w.columns() {
        assert!((col.sum() - 1.0).abs() < 1e-10);
    }
    assert!(st.marginal_residual(&p) < 1e-10);

    // identical z columns at zero multiplier give identical posterior columns
    let mut st = init_state(&p, &GasConfig { jitter_scale: 0.0, ..cfg.clone() });
    let a = log_z_projection(&st.z, &p, cfg.log_floor);
    let b = lambda_projection(&st.lambda, &p);
    let k = compute_kernel(&a, &b, 0.0, true).unwrap();
    sinkhorn_step(&mut st, &k, &p).unwrap();
    update_w(&mut st, &k);
    for i in 0..2 {
        assert!((st.w[[i, 0]] - st.w[[i, 1]]).abs() < 1e-15);
    }
}

#[test]
fn lambda_examples() {
    let p = bern(0.1);
    let mut st = init_state(&p, &GasConfig::default());
    st.zeta = 0.0;
    update_lambda(&mut st);
    assert!(st.lambda.iter().all(|&v| v == 0.0));
    st.zeta = 2.5;
    update_lambda(&mut st);
    assert!(st.lambda.iter().all(|&v| v == -2.5));
    let b = lambda_projection(&st.lambda, &p);
    assert!(b.iter().all(|&v| (v + 2.5).abs() < 1e-15));
}

#[test]
fn z_examples() {
    let p = IbProblem::new(&constant_slope_joint(), 0.1).unwrap();
    let mut st = init_state(&p, &GasConfig { jitter_scale: 0.0, ..Default::default() });
    st.r = vec![0.1, 0.2, 0.3, 0.4];
    update_z(&mut st, &p);
    for ((k, j), &z) in st.z.indexed_iter() {
        assert!((z - p.qy()[k] * st.r[j]).abs() < 1e-15);
    }
    let bp = bern(0.1308);
    let (mut st, _, _) = warmed(&bp, &GasConfig::default(), 6);
    update_z(&mut st, &bp);
    let loops = z_by_loops(&st, &bp);
    assert!(st.z.iter().zip(loops.iter()).all(|(a, b)| (a - b).abs() <= 1e-15));
    assert!((st.z.sum() - 1.0).abs() < 1e-12);
    for (j, col) in st.z.columns().into_iter().enumerate() {
        assert!((col.sum() - st.r[j]).abs() < 1e-12);
    }
}

#[test]
fn r_examples() {
    let p = bern(0.1308);
    let cfg = GasConfig::default();
    let mut st = init_state(&p, &GasConfig { jitter_scale: 0.0, ..cfg.clone() });
    let a = log_z_projection(&st.z, &p, cfg.log_floor);
    let b = lambda_projection(&st.lambda, &p);
    update_r(&mut st, &a, &b, &cfg).unwrap();
    assert!(st.r.iter().all(|&r| (r - 0.5).abs() < 1e-15));

    let mut st = init_state(&p, &cfg);
    let mut settled_at = None;
    for it in 1..=1000 {
        let before = st.r.clone();
        iterate(&mut st, &p, &cfg).unwrap();
        assert!((st.r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let change = before.iter().zip(&st.r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if it > 1 && change <= 1e-10 {
            settled_at = Some(it);
            break;
        }
    }
    assert!(settled_at.is_some());
}

#[test]
fn iteration_keeps_invariants_and_relevance_forms_agree() {
    let p = bern(0.1927);
    let cfg = GasConfig::default();
    let mut st = init_state(&p, &cfg);
    for _ in 0..8 {
        let d = iterate(&mut st, &p, &cfg).unwrap();
        assert_invariants(&st, &p);
        assert_eq!(d.zeta, st.zeta);
        // relevance recomputed from w, r and the joint directly
        let (m, k, n) = p.dims();
        let s = p.s();
        let q = p.qy();
        let mut direct = 0.0;
        for j in 0..n {
            for kk in 0..k {
                let z: f64 = (0..m).map(|i| st.w[[i, j]] * s[[kk, i]] * st.r[j]).sum();
                if z > 0.0 {
                    direct += z * z.ln();
                }
            }
            direct -= st.r[j] * st.r[j].ln();
        }
        direct -= q.iter().map(|v| v * v.ln()).sum::<f64>();
        assert!((direct - d.relevance).abs() < 1e-10);
    }
}

#[test]
fn trace_length_and_report_identities() {
    let p = bern(0.0823);
    let sol = solve_detailed(&p, &GasConfig::default()).unwrap();
    let rep = &sol.report;
    assert_eq!(sol.trace.len(), rep.iterations);
    assert!((rep.rate - (rep.objective + p.entropy_x())).abs() < 1e-12);
    // rate as the mutual information of the reconstructed (X, T) joint
    let st = sol.state.unwrap();
    let rows: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| st.w[[i, j]] * st.r[j]).collect()).collect();
    assert!((common::mi(&rows) - rep.rate).abs() < 1e-9);
}

#[test]
fn zero_threshold() {
    let rep = solve(&bern(0.0), &GasConfig::default()).unwrap();
    assert_eq!(rep.status, Status::Converged);
    assert_eq!(rep.zeta, 0.0);
    assert!(rep.rate.abs() < 1e-8);
}

#[test]
fn solves_are_deterministic() {
    let p = bern(0.1308);
    let a = solve_detailed(&p, &GasConfig::default()).unwrap();
    let b = solve_detailed(&p, &GasConfig::default()).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.state, b.state);
}

#[test]
fn config_validation() {
    let bad = [
        GasConfig { rate_tol: 0.0, ..Default::default() },
        GasConfig { bottleneck_size: Some(0), ..Default::default() },
        GasConfig { jitter_scale: 1.0, ..Default::default() },
        GasConfig { zeta_cap: -1.0, ..Default::default() },
        GasConfig { max_iter: 0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(solve(&bern(0.1), &cfg), Err(GasError::InvalidConfig(_))));
    }
}
