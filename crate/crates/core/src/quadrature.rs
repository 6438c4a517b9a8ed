//! Adaptive Simpson quadrature and golden-section maximization.

use crate::scalar::{lit, Real};

fn simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, fa: T, b: T, fb: T) -> (T, T, T) {
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let m = (a + b) / two;
    let fm = f(m);
    let s = (b - a) / six * (fa + lit::<T>(4.0) * fm + fb);
    (m, fm, s)
}

fn adaptive<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    fa: T,
    b: T,
    fb: T,
    m: T,
    fm: T,
    whole: T,
    tol: T,
    depth: usize,
) -> T {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= lit::<T>(15.0) * tol {
        return left + right + delta / lit::<T>(15.0);
    }
    let half = tol / lit::<T>(2.0);
    adaptive(f, a, fa, m, fm, lm, flm, left, half, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, half, depth - 1)
}

/// Integrates f over [a, b] with adaptive Simpson to the given absolute tolerance.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    adaptive(&f, a, fa, b, fb, m, fm, whole, abs_tol, 48)
}

/// Locates the maximum of f on [a, b] by golden-section search.
///
/// A coarse scan first brackets the best sample so that mildly non-unimodal
/// integrands are still handled; the returned tolerance applies to the
/// abscissa. Returns (argmax, max).
pub fn golden_max<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, x_tol: T) -> (T, T) {
    let n = 64;
    let mut best_i = 0usize;
    let mut best = f(a);
    let span = b - a;
    for i in 1..=n {
        let x = a + span * lit::<T>(i as f64 / n as f64);
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let step = span * lit::<T>(1.0 / n as f64);
    let mut lo = a + step * lit::<T>(best_i.saturating_sub(1) as f64);
    let mut hi = (a + step * lit::<T>((best_i + 1) as f64)).min(b);

    let inv_phi = lit::<T>(0.618_033_988_749_894_8);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let xm = (lo + hi) / lit::<T>(2.0);
    (xm, f(xm))
}
