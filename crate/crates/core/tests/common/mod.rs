//! Test-side reference computations. None of these call into the solver
//! library's information functions; they work on plain arrays.

#![allow(dead_code)]

const GOLDEN: &str = include_str!("../fixtures/golden_curves.txt");

pub const LN2: f64 = std::f64::consts::LN_2;

pub fn h2(u: f64) -> f64 {
    let t = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
    t(u) + t(1.0 - u)
}

/// Inverse of `h2` on `[0, 1/2]` by Newton from the top, with a bisection
/// fallback. Independent of the library's pure-bisection version.
pub fn h2_inv(h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h >= LN2 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let mut u = 0.25;
    for _ in 0..200 {
        let f = h2(u) - h;
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let d = ((1.0 - u) / u).ln();
        let next = u - f / d;
        u = if next >= lo && next <= hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-16 || f.abs() < 1e-16 {
            break;
        }
    }
    u
}

pub fn bernoulli_curve(i: f64, e: f64) -> f64 {
    let u = h2_inv(LN2 - i);
    LN2 - h2((u - e) / (1.0 - 2.0 * e))
}

pub fn gaussian_curve(i: f64, snr: f64) -> f64 {
    -0.5 * (((1.0 + snr) * (-2.0 * i).exp() - 1.0) / snr).ln()
}

/// Mutual information of a joint given as nested rows.
pub fn mi(pxy: &[Vec<f64>]) -> f64 {
    let rows = pxy.len();
    let cols = pxy[0].len();
    let px: Vec<f64> = pxy.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..cols).map(|k| (0..rows).map(|i| pxy[i][k]).sum()).collect();
    let mut total = 0.0;
    for i in 0..rows {
        for k in 0..cols {
            let v = pxy[i][k];
            if v > 0.0 {
                total += v * (v / (px[i] * py[k])).ln();
            }
        }
    }
    total
}

/// `(I(X;T), I(T;Y))` for an encoder `enc[i][j] = P(t_j | x_i)`.
pub fn encoder_pair(pxy: &[Vec<f64>], enc: &[Vec<f64>]) -> (f64, f64) {
    let m = pxy.len();
    let k = pxy[0].len();
    let n = enc[0].len();
    let px: Vec<f64> = pxy.iter().map(|r| r.iter().sum()).collect();
    let pxt: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| px[i] * enc[i][j]).collect()).collect();
    let pty: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..k).map(|y| (0..m).map(|i| enc[i][j] * pxy[i][y]).sum()).collect())
        .collect();
    (mi(&pxt), mi(&pty))
}

/// Smallest `I(X;T)` over a grid of two-cluster stochastic encoders of a
/// 4-symbol source subject to `I(T;Y) >= target`. `steps` cells per axis.
pub fn brute_force_two_cluster(pxy: &[Vec<f64>], target: f64, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    let g = |t: usize| t as f64 / steps as f64;
    for a in 0..=steps {
        for b in 0..=steps {
            for c in 0..=steps {
                for d in 0..=steps {
                    let enc: Vec<Vec<f64>> =
                        [g(a), g(b), g(c), g(d)].iter().map(|&u| vec![u, 1.0 - u]).collect();
                    let (rate, rel) = encoder_pair(pxy, &enc);
                    if rel >= target && rate < best {
                        best = rate;
                    }
                }
            }
        }
    }
    best
}

pub fn constant_slope_rows() -> Vec<Vec<f64>> {
    let b = [[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]];
    b.iter().map(|r| r.iter().map(|v| v / 8.0).collect()).collect()
}

/// `(problem, parameter, threshold, rate)` rows of the golden file.
pub fn fixtures() -> Vec<(String, f64, f64, f64)> {
    GOLDEN
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(f.len(), 4, "bad fixture row {l:?}");
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

pub fn fixture(problem: &str, threshold: f64) -> f64 {
    fixtures()
        .into_iter()
        .find(|(p, _, i, _)| p == problem && (i - threshold).abs() < 1e-12)
        .unwrap_or_else(|| panic!("no fixture for {problem} at {threshold}"))
        .3
}

/// The 20 constant-slope thresholds used throughout.
pub fn constant_slope_thresholds() -> Vec<f64> {
    (0..20).map(|t| 0.05 + 0.6 * t as f64 / 19.0).collect()
}
