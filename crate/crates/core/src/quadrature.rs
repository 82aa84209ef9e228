//! Adaptive Gauss–Kronrod (10/21) quadrature and cumulative integral tables.
//!
//! Two table flavours are provided. [`CumulativeTable`] stores running
//! integrals of a moderate integrand on accepted panels. [`LogCumulative`]
//! stores the logarithm of running integrals of a positive integrand whose
//! values span hundreds of orders of magnitude; each panel is rescaled by its
//! largest node value before summation.
//!
//! Tables only store knots and partial sums. The integrand is passed again
//! on evaluation to integrate the tail from the nearest knot to `x`.

use std::collections::BinaryHeap;

use crate::error::{QdoError, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const MAX_DEPTH: u32 = 60;
const MAX_PANELS: usize = 20_000;

/// Error budget: `err ≤ max(abs, rel · |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }
}

/// Nodes of the 21-point Kronrod rule mapped to `[lo, hi]`, in the order
/// used by [`kronrod_sums`].
fn nodes(lo: f64, hi: f64) -> [f64; 21] {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut out = [0.0; 21];
    for j in 0..10 {
        out[2 * j] = c - h * XGK[j];
        out[2 * j + 1] = c + h * XGK[j];
    }
    out[20] = c;
    out
}

/// Kronrod and Gauss sums (without the half-width factor) of sampled values.
fn kronrod_sums(vals: &[f64; 21]) -> (f64, f64) {
    let mut k = WGK[10] * vals[20];
    let mut g = 0.0;
    for j in 0..10 {
        let pair = vals[2 * j] + vals[2 * j + 1];
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k, g)
}

/// One Gauss–Kronrod 21 panel. Returns `(integral, |K - G|)`.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let h = 0.5 * (hi - lo);
    let xs = nodes(lo, hi);
    let vals = xs.map(f);
    let (k, g) = kronrod_sums(&vals);
    (k * h, ((k - g) * h).abs())
}

/// Logarithm of the integral of `exp(log_f)` over one panel, and the relative
/// error estimate. `log_f` may return `-inf`.
pub fn gk21_log<F: Fn(f64) -> f64>(log_f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let h = 0.5 * (hi - lo);
    let xs = nodes(lo, hi);
    let logs = xs.map(log_f);
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    let vals = logs.map(|l| (l - shift).exp());
    let (k, g) = kronrod_sums(&vals);
    (shift + (k * h).ln(), ((k - g) / k).abs())
}

/// `ln(e^x + e^y)` with `-inf` handled.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Collects accepted panels of `[lo, hi]` in left-to-right order.
fn subdivide<P>(lo: f64, hi: f64, depth: u32, panel: &mut P, out: &mut Vec<(f64, f64, f64)>) -> Result<()>
where
    P: FnMut(f64, f64) -> (f64, bool),
{
    let (value, ok) = panel(lo, hi);
    if ok {
        out.push((lo, hi, value));
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    if depth >= MAX_DEPTH || mid <= lo || mid >= hi {
        return Err(QdoError::QuadratureFailure { lo, hi });
    }
    subdivide(lo, mid, depth + 1, panel, out)?;
    subdivide(mid, hi, depth + 1, panel, out)
}

struct Scored(f64, f64, f64, f64);

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.3.total_cmp(&other.3).is_eq()
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.3.total_cmp(&other.3)
    }
}

/// Globally adaptive bisection: the panel with the largest error estimate is
/// split until the summed estimate meets `max(abs, rel · |sum|)`.
fn linear_panels<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: Tolerance) -> Result<Vec<(f64, f64, f64)>> {
    let fail = QdoError::QuadratureFailure { lo, hi };
    let mut heap = BinaryHeap::new();
    let (v, e) = gk21(f, lo, hi);
    let (mut sum, mut err) = (v, e);
    heap.push(Scored(lo, hi, v, e));
    let mut splits = 0usize;
    while err > tol.abs.max(tol.rel * sum.abs()) {
        if !err.is_finite() || splits >= MAX_PANELS {
            return Err(fail);
        }
        let Scored(a, b, v, e) = heap.pop().ok_or(fail.clone())?;
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Err(fail);
        }
        let (v1, e1) = gk21(f, a, mid);
        let (v2, e2) = gk21(f, mid, b);
        sum += v1 + v2 - v;
        err += e1 + e2 - e;
        heap.push(Scored(a, mid, v1, e1));
        heap.push(Scored(mid, b, v2, e2));
        splits += 1;
        if splits.is_multiple_of(64) {
            // resum to limit drift from incremental updates
            sum = heap.iter().map(|p| p.2).sum();
            err = heap.iter().map(|p| p.3).sum();
        }
    }
    let mut out: Vec<(f64, f64, f64)> = heap.into_iter().map(|p| (p.0, p.1, p.2)).collect();
    if out.iter().any(|p| !p.2.is_finite()) {
        return Err(fail);
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(out)
}

/// Adaptive integral of `f` over `[lo, hi]` (either orientation).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if hi < lo {
        return integrate(f, hi, lo, tol).map(|v| -v);
    }
    Ok(linear_panels(f, lo, hi, tol)?.iter().map(|p| p.2).sum())
}

/// Panel acceptance for log-space integration: relative error below `rel`,
/// or absolute error below `abs` once scaled by `exp(log_scale(right end))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRule {
    pub rel: f64,
    pub abs: f64,
}

fn log_panels<F, S>(log_f: &F, log_scale: &S, lo: f64, hi: f64, rule: LogRule) -> Result<Vec<(f64, f64, f64)>>
where
    F: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let log_abs = rule.abs.ln();
    let mut out = Vec::new();
    let mut panel = |a: f64, b: f64| {
        let (v, e) = gk21_log(log_f, a, b);
        (v, e <= rule.rel || v + log_scale(b) + e.ln() <= log_abs)
    };
    subdivide(lo, hi, 0, &mut panel, &mut out)?;
    Ok(out)
}

/// Logarithm of the adaptive integral of `exp(log_f)` over `[lo, hi]`, `lo ≤ hi`.
pub fn integrate_log<F, S>(log_f: &F, log_scale: &S, lo: f64, hi: f64, rule: LogRule) -> Result<f64>
where
    F: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    if hi <= lo {
        return Ok(f64::NEG_INFINITY);
    }
    let out = log_panels(log_f, log_scale, lo, hi, rule)?;
    let acc = out.iter().fold(f64::NEG_INFINITY, |acc, p| log_add_exp(acc, p.2));
    if acc.is_nan() || acc == f64::INFINITY {
        return Err(QdoError::QuadratureFailure { lo, hi });
    }
    Ok(acc)
}

fn knot_index(knots: &[f64], x: f64) -> usize {
    // last k with knots[k] <= x, clamped to a valid panel start
    let k = knots.partition_point(|&t| t <= x);
    k.saturating_sub(1).min(knots.len().saturating_sub(2))
}

/// Running integral `∫_lo^x f` on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    knots: Vec<f64>,
    cum: Vec<f64>,
    tol: Tolerance,
}

impl CumulativeTable {
    pub fn build<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: Tolerance) -> Result<Self> {
        if !(hi > lo) {
            return Ok(Self { knots: vec![lo, lo], cum: vec![0.0, 0.0], tol });
        }
        let panels = linear_panels(f, lo, hi, tol)?;
        let mut knots = Vec::with_capacity(panels.len() + 1);
        let mut cum = Vec::with_capacity(panels.len() + 1);
        knots.push(lo);
        cum.push(0.0);
        let mut acc = 0.0;
        for (_, b, v) in panels {
            acc += v;
            knots.push(b);
            cum.push(acc);
        }
        Ok(Self { knots, cum, tol })
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn panels(&self) -> usize {
        self.knots.len() - 1
    }

    /// `∫_lo^x f`. `f` must be the integrand used in [`CumulativeTable::build`].
    pub fn eval<F: Fn(f64) -> f64>(&self, f: &F, x: f64) -> Result<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        if x < lo || x > hi {
            return Err(crate::error::domain(format!("{x} outside table range [{lo}, {hi}]")));
        }
        if x == hi {
            return Ok(self.total());
        }
        let k = knot_index(&self.knots, x);
        let start = self.knots[k];
        Ok(self.cum[k] + integrate(f, start, x, self.tol)?)
    }
}

/// Running `ln ∫_lo^x exp(log_f)` on `[lo, hi]`.
///
/// `log_scale` must be nonincreasing; it bounds how much a panel can
/// contribute to any later point and lets far-negligible panels pass on an
/// absolute criterion.
#[derive(Debug, Clone)]
pub struct LogCumulative {
    knots: Vec<f64>,
    log_cum: Vec<f64>,
    rule: LogRule,
}

impl LogCumulative {
    pub fn build<F, S>(log_f: &F, log_scale: &S, lo: f64, hi: f64, rule: LogRule) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        S: Fn(f64) -> f64,
    {
        if !(hi > lo) {
            return Ok(Self { knots: vec![lo, lo], log_cum: vec![f64::NEG_INFINITY; 2], rule });
        }
        let out = log_panels(log_f, log_scale, lo, hi, rule)?;
        let mut knots = Vec::with_capacity(out.len() + 1);
        let mut log_cum = Vec::with_capacity(out.len() + 1);
        knots.push(lo);
        log_cum.push(f64::NEG_INFINITY);
        let mut acc = f64::NEG_INFINITY;
        for (_, b, v) in out {
            acc = log_add_exp(acc, v);
            if acc.is_nan() || acc == f64::INFINITY {
                return Err(QdoError::QuadratureFailure { lo, hi });
            }
            knots.push(b);
            log_cum.push(acc);
        }
        Ok(Self { knots, log_cum, rule })
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn panels(&self) -> usize {
        self.knots.len() - 1
    }

    /// `ln ∫_lo^x exp(log_f)`; `-inf` at `x = lo`.
    pub fn log_eval<F, S>(&self, log_f: &F, log_scale: &S, x: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        S: Fn(f64) -> f64,
    {
        let (lo, hi) = (self.lo(), self.hi());
        if x < lo || x > hi {
            return Err(crate::error::domain(format!("{x} outside table range [{lo}, {hi}]")));
        }
        if x == hi {
            return Ok(*self.log_cum.last().unwrap());
        }
        let k = knot_index(&self.knots, x);
        let tail = integrate_log(log_f, log_scale, self.knots[k], x, self.rule)?;
        Ok(log_add_exp(self.log_cum[k], tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let (v, e) = gk21(&f, 0.0, 2.0);
        assert!((v - 6.0).abs() < 1e-14);
        assert!(e < 1e-13);
    }

    #[test]
    fn adaptive_sqrt_singularity() {
        let f = |x: f64| 1.0 / x.sqrt();
        let v = integrate(&f, 0.0, 1.0, Tolerance::absolute(1e-10)).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn reversed_limits() {
        let f = |x: f64| x.exp();
        let v = integrate(&f, 1.0, 0.0, Tolerance::absolute(1e-12)).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let f = |x: f64| x.cos();
        let t = CumulativeTable::build(&f, 0.0, 3.0, Tolerance::absolute(1e-12)).unwrap();
        for &x in &[0.0, 0.1, 1.234, 2.999, 3.0] {
            assert!((t.eval(&f, x).unwrap() - x.sin()).abs() < 1e-12);
        }
        assert!(t.eval(&f, 3.5).is_err());
    }

    #[test]
    fn log_cumulative_huge_range() {
        // ∫_0^x e^{500 y} dy = (e^{500x} - 1) / 500
        let lf = |y: f64| 500.0 * y;
        let none = |_: f64| 0.0;
        let t = LogCumulative::build(&lf, &none, 0.0, 2.0, LogRule { rel: 1e-13, abs: 0.0 }).unwrap();
        for &x in &[0.5f64, 1.0, 1.7, 2.0] {
            let expected = 500.0 * x + (-(-500.0 * x).exp()).ln_1p() - 500f64.ln();
            let got = t.log_eval(&lf, &none, x).unwrap();
            assert!((got - expected).abs() < 1e-12, "{x}: {got} vs {expected}");
        }
        assert_eq!(t.log_eval(&lf, &none, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_add_exp_edges() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.5), 1.5);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
