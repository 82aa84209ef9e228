//! Independent reference computations shared by the integration tests.
//!
//! Everything here is evaluated straight from the closed-form definitions
//! with adaptive Simpson quadrature; nothing goes through the crate's
//! Gauss–Kronrod tables.

#![allow(dead_code)]

use qdo::ProblemParams;

pub fn canonical(b: f64) -> ProblemParams {
    ProblemParams::new(1.0, 1.0, b, 1.0, 1.0).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -simpson(f, b, a, tol);
    }
    // start from 16 panels so narrow features are not skipped
    let n = 16;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let m = 0.5 * (lo + hi);
            let (fa, fm, fb) = (f(lo), f(m), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / n as f64, 50)
        })
        .sum()
}

pub fn log_f(x: f64, alpha: f64) -> f64 {
    alpha * ((1.0 - x).ln() - x.ln() + 1.0 / x)
}

/// `f2(x) = K1 f(x) + f(x) ∫_A^x (-2/ρ²)(a y + b)/(y²(1-y)²) / f(y) dy` by direct quadrature.
pub fn f2_oracle(p: &ProblemParams, lower: f64, x: f64) -> f64 {
    let rho = p.r() / p.sigma();
    let alpha = 2.0 * p.lambda() / (rho * rho);
    let lfx = log_f(x, alpha);
    let integrand = |y: f64| {
        -2.0 / (rho * rho) * (p.a() * y + p.b()) / (y * y * (1.0 - y) * (1.0 - y)) * (lfx - log_f(y, alpha)).exp()
    };
    let k1_term = if lower > 0.0 {
        -(p.a() / p.lambda()) * lower / (1.0 - lower) * (lfx - log_f(lower, alpha)).exp()
    } else {
        0.0
    };
    k1_term + simpson(&integrand, lower.max(1e-10), x, 1e-12)
}

/// Root of `f2_oracle = -1` by bisection.
pub fn upper_oracle(p: &ProblemParams, lower: f64) -> f64 {
    let (mut lo, mut hi) = (lower + 1e-8, 1.0 - 1e-6);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f2_oracle(p, lower, mid) > -1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
