//! Scalar root finding for nondecreasing functions.

/// Outcome of a bracketed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootError {
    NonFinite,
    BadBracket,
}

fn width_converged(lo: f64, hi: f64) -> bool {
    hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE)
}

/// Newton's method on a nondecreasing `f` with `f(lo) < 0 <= f(hi)`.
///
/// `f` returns `(value, derivative)`. Any Newton step that leaves the current
/// bracket, or a flat derivative, is replaced by bisection. Stops when
/// `|f(x)| <= tol`, when the bracket collapses to a few ulps, or after
/// `max_steps` evaluations (returning the best point seen).
pub fn safeguarded_newton<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    max_steps: usize,
) -> Result<Root, RootError>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(lo <= hi) {
        return Err(RootError::BadBracket);
    }
    let mut x = if x0 >= lo && x0 <= hi { x0 } else { 0.5 * (lo + hi) };
    let mut best = Root {
        x,
        fx: f64::INFINITY,
        evaluations: 0,
    };
    for n in 1..=max_steps.max(1) {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(RootError::NonFinite);
        }
        if fx.abs() < best.fx.abs() {
            best = Root { x, fx, evaluations: n };
        }
        best.evaluations = n;
        if fx.abs() <= tol {
            return Ok(best);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if width_converged(lo, hi) {
            return Ok(best);
        }
        let step = x - fx / dfx;
        x = if dfx > 0.0 && step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(best)
}

/// Plain bisection on a nondecreasing `f` until the bracket is narrower than
/// `xtol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(RootError::BadBracket);
    }
    while hi - lo > xtol && !width_converged(lo, hi) {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if !v.is_finite() {
            return Err(RootError::NonFinite);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_matches_bisection() {
        let f = |x: f64| x.powi(3) + x - 3.0;
        let r = safeguarded_newton(|x| (f(x), 3.0 * x * x + 1.0), 0.0, 10.0, 9.0, 1e-14, 100).unwrap();
        let b = bisect(f, 0.0, 10.0, 1e-15).unwrap();
        assert!((r.x - b).abs() < 1e-12);
        assert!(r.fx.abs() <= 1e-14);
    }

    #[test]
    fn falls_back_on_flat_derivative() {
        // derivative reported as zero forces pure bisection
        let r = safeguarded_newton(|x| (x - 0.3, 0.0), 0.0, 1.0, 0.5, 1e-12, 200).unwrap();
        assert!((r.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(
            safeguarded_newton(|_| (f64::NAN, 1.0), 0.0, 1.0, 0.5, 1e-12, 10),
            Err(RootError::NonFinite)
        );
        assert_eq!(bisect(|x| x, 1.0, 0.0, 1e-9), Err(RootError::BadBracket));
    }
}
