//! Bracketed scalar root finders.

use crate::error::{NsvhError, Result};
use crate::scalar::Real;

fn check_bracket<T: Real>(flo: T, fhi: T) -> Result<()> {
    if flo.is_nan() || fhi.is_nan() {
        return Err(NsvhError::NoSolution("function is NaN at a bracket end".into()));
    }
    if flo * fhi > T::zero() {
        return Err(NsvhError::NoSolution(format!(
            "root not bracketed: f(lo) = {flo}, f(hi) = {fhi}"
        )));
    }
    Ok(())
}

/// Plain bisection. Stops when the bracket is narrower than `xtol` or
/// cannot be split any further.
pub fn bisect<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, xtol: T) -> Result<T> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    check_bracket(flo, fhi)?;
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    let two = T::lit(2.0);
    for _ in 0..2000 {
        let mid = lo + (hi - lo) / two;
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / two)
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
pub fn brent<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, xtol: T, max_iter: usize) -> Result<T> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    check_bracket(fa, fb)?;
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
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
        let tol = two * T::epsilon() * b.abs() + half * xtol;
        let m = half * (c - b);
        if m.abs() <= tol || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (T::lit(3.0) * m * q - (tol * q).abs()).min((e * q).abs()) {
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
        b = b + if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b);
    }
    Err(NsvhError::NoSolution(format!(
        "brent did not converge in {max_iter} iterations"
    )))
}

/// Newton's method kept inside a shrinking bracket; falls back to bisection
/// whenever a step leaves the bracket or stalls.
///
/// `f` returns the value and its derivative. Converges when `|f| <= ftol`
/// or the bracket is narrower than `xtol`.
pub fn newton_bisect<T: Real, F: FnMut(T) -> (T, T)>(
    mut f: F,
    lo: T,
    hi: T,
    x0: T,
    xtol: T,
    ftol: T,
    max_iter: usize,
) -> Result<T> {
    let (mut lo, mut hi) = (lo, hi);
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    check_bracket(flo, fhi)?;
    if flo.abs() <= ftol {
        return Ok(lo);
    }
    if fhi.abs() <= ftol {
        return Ok(hi);
    }
    let lo_negative = flo < T::zero();
    let half = T::lit(0.5);
    let mut x = if x0 > lo && x0 < hi { x0 } else { half * (lo + hi) };
    let mut last_step = T::lit(2.0) * (hi - lo);
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx.is_nan() {
            return Err(NsvhError::NoSolution(format!("function is NaN at {x}")));
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if (fx < T::zero()) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= xtol {
            return Ok(half * (lo + hi));
        }
        let newton = x - fx / dfx;
        // bisect when Newton leaves the bracket or its steps stop halving
        let next = if newton.is_finite() && newton > lo && newton < hi && (newton - x).abs() <= half * last_step {
            newton
        } else {
            half * (lo + hi)
        };
        last_step = (next - x).abs();
        x = next;
    }
    Err(NsvhError::NoSolution(format!(
        "newton iteration did not converge in {max_iter} steps"
    )))
}
