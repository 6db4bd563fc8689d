//! Scalar root finding on a bracket.

use crate::error::{Error, Result};

/// Tolerance on the abscissa used throughout the crate.
pub const X_TOL: f64 = 1e-12;

/// Iteration cap shared by the bracketed solvers.
pub const MAX_ITER: usize = 200;

/// Brent's method (bisection + secant + inverse quadratic interpolation).
///
/// `f(lo)` and `f(hi)` must have opposite signs or one of them must be zero.
/// An exact zero at the lower end wins over one at the upper end.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::RootNotFound(format!(
            "no sign change on [{lo}, {hi}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::RootNotFound(format!(
        "Brent did not converge on [{lo}, {hi}] within {MAX_ITER} iterations"
    )))
}

/// Scan `n` equal subintervals of `[lo, hi]` and refine every sign change.
///
/// Non-finite samples break a bracket rather than producing a root.
pub fn all_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let h = (hi - lo) / n as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + h * i as f64 };
        let f1 = f(x1);
        if f0.is_finite() && f1.is_finite() {
            if f0 == 0.0 {
                if out.last().is_none_or(|&r| (r - x0).abs() > X_TOL) {
                    out.push(x0);
                }
            } else if f0.signum() != f1.signum() && f1 != 0.0 {
                if let Ok(r) = brent(&f, x0, x1, X_TOL) {
                    out.push(r);
                }
            }
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 && out.last().is_none_or(|&r| (r - x0).abs() > X_TOL) {
        out.push(x0);
    }
    out
}
