//! Adaptive Simpson quadrature.
//!
//! Used as an independent oracle for orthonormality and kernel identities;
//! nothing in the simulation path depends on it.

use crate::scalar::Real;

/// Integrates `f` over `[a, b]` to the requested absolute tolerance.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    let half = T::of(0.5);
    let m = (a + b) * half;
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[inline]
fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::of(6.0) * (fa + T::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let half = T::of(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::of(15.0) * tol {
        left + right + delta / T::of(15.0)
    } else {
        let half_tol = tol * half;
        adapt(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
    }
}
