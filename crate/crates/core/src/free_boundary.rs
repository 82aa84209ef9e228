//! Two-threshold free-boundary solution and the candidate value function.
//!
//! On the observation region `]A, B[` the derivative `f2 = g'` solves the
//! first-order linear equation
//!
//! ```text
//! λ f2 (1-x) + a x + ½ f2' ρ² x² (1-x)² + b = 0
//! ```
//!
//! whose homogeneous solution is `f(x) = ((1-x)/x)^α e^{α/x}`, `α = 2λ/ρ²`.
//! `f` spans hundreds of orders of magnitude on `(0, 1)`, so it only ever
//! enters through `log_f` differences, and the variation-of-constants integral
//! is tabulated in log space.

use serde::Serialize;

use crate::error::{domain, QdoError, Result};
use crate::model::{DerivedParams, ProblemParams, Regime};
use crate::quadrature::{CumulativeTable, LogCumulative, LogRule, Tolerance};

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_ROOT_TOL: f64 = 1e-9;
/// Lower integration limit used in place of `A = 0` when `b = 0`.
pub const ZERO_COST_CUTOFF: f64 = 1e-10;
/// `f2` is not evaluated above this point; it behaves like `-(1-x)^{-1}` there.
pub const X_MAX: f64 = 1.0 - 1e-6;
const BRACKET_OFFSET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Absolute tolerance of the outer quadrature (`∫ f2`).
    pub quad_tol: f64,
    /// Tolerance on `|f2(B) + 1|`.
    pub root_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { quad_tol: DEFAULT_QUAD_TOL, root_tol: DEFAULT_ROOT_TOL }
    }
}

/// Which part of `[0, 1]` a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Piece {
    /// `[0, A]`: sensor off.
    NoObserve,
    /// `]A, B[`: sensor on, no alarm.
    Observe,
    /// `[B, 1]`: raise the alarm.
    Stop,
}

impl Piece {
    pub fn name(self) -> &'static str {
        match self {
            Piece::NoObserve => "NoObserve",
            Piece::Observe => "Observe",
            Piece::Stop => "Stop",
        }
    }
}

/// One-sided evaluation at a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `ln f(x) = α (ln(1-x) - ln x + 1/x)`.
pub fn log_f(x: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(domain(format!("log_f requires 0 < x < 1, got {x}")));
    }
    Ok(log_f_raw(x, alpha))
}

#[inline]
pub(crate) fn log_f_raw(x: f64, alpha: f64) -> f64 {
    alpha * ((-x).ln_1p() - x.ln() + 1.0 / x)
}

/// `A = √(2λb / (aρ²))`; refused in the never-observe regime.
pub fn threshold_a(p: &ProblemParams) -> Result<f64> {
    match p.regime() {
        Regime::NeverObserve => Err(QdoError::Regime("NeverObserve")),
        _ => {
            let rho = p.derive().rho;
            Ok((2.0 * p.lambda() * p.b() / (p.a() * rho * rho)).sqrt())
        }
    }
}

/// Log of the magnitude of the variation-of-constants integrand
/// `(2/ρ²)(a y + b) / (y² (1-y)²) / f(y)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SourceIntegrand {
    pub log_scale: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl SourceIntegrand {
    /// Cost source `a y + b`.
    pub fn cost(p: &ProblemParams, d: &DerivedParams) -> Self {
        Self { log_scale: (2.0 / (d.rho * d.rho)).ln(), a: p.a(), b: p.b(), alpha: d.alpha }
    }

    /// Unit source, used for expected hitting times.
    pub fn unit(d: &DerivedParams) -> Self {
        Self { log_scale: (2.0 / (d.rho * d.rho)).ln(), a: 0.0, b: 1.0, alpha: d.alpha }
    }

    #[inline]
    pub fn log_value(&self, y: f64) -> f64 {
        self.log_scale + (self.a * y + self.b).ln() - 2.0 * y.ln() - 2.0 * (-y).ln_1p() - log_f_raw(y, self.alpha)
    }
}

/// Solution `k f(x) - f(x) ∫_start^x |w| / f` of the inhomogeneous first-order
/// equation, with `k f(start)` given as `value_at_start`.
#[derive(Debug, Clone)]
pub(crate) struct FirstOrderSolution {
    pub start: f64,
    pub value_at_start: f64,
    pub log_f_start: f64,
    pub source: SourceIntegrand,
    pub inner: LogCumulative,
}

impl FirstOrderSolution {
    pub fn build(start: f64, end: f64, value_at_start: f64, source: SourceIntegrand, rule: LogRule) -> Result<Self> {
        let lv = |y: f64| source.log_value(y);
        let scale = |y: f64| log_f_raw(y, source.alpha);
        let inner = LogCumulative::build(&lv, &scale, start, end, rule)?;
        Ok(Self { start, value_at_start, log_f_start: log_f_raw(start, source.alpha), source, inner })
    }

    /// `ln ∫_start^x |w| / f`.
    pub fn log_integral(&self, x: f64) -> Result<f64> {
        let lv = |y: f64| self.source.log_value(y);
        let scale = |y: f64| log_f_raw(y, self.source.alpha);
        self.inner.log_eval(&lv, &scale, x)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let lf = log_f_raw(x, self.source.alpha);
        let homogeneous = if self.value_at_start == 0.0 {
            0.0
        } else {
            self.value_at_start * (lf - self.log_f_start).exp()
        };
        Ok(homogeneous - (lf + self.log_integral(x)?).exp())
    }
}

#[derive(Debug, Clone)]
struct ObservationRegion {
    f2: FirstOrderSolution,
    /// `∫_start^x f2` on `[start, B]`.
    outer: CumulativeTable,
}

/// Thresholds, integration constants and cached quadrature for `g`.
#[derive(Debug, Clone)]
pub struct FreeBoundarySolution {
    params: ProblemParams,
    derived: DerivedParams,
    regime: Regime,
    lower: f64,
    upper: f64,
    k1: Option<f64>,
    k2: Option<f64>,
    config: SolverConfig,
    region: Option<ObservationRegion>,
}

impl FreeBoundarySolution {
    pub fn solve(params: &ProblemParams) -> Result<Self> {
        Self::solve_with(params, SolverConfig::default())
    }

    pub fn solve_with(params: &ProblemParams, config: SolverConfig) -> Result<Self> {
        let derived = params.derive();
        let regime = params.regime();
        let (lam, a) = (params.lambda(), params.a());
        if regime == Regime::NeverObserve {
            let b = params.myopic_threshold();
            return Ok(Self {
                params: *params,
                derived,
                regime,
                lower: b,
                upper: b,
                k1: None,
                k2: None,
                config,
                region: None,
            });
        }

        let lower = threshold_a(params)?;
        let (start, f2_start, k1) = if regime == Regime::ZeroCost {
            (ZERO_COST_CUTOFF, 0.0, 0.0)
        } else {
            let f2a = -(a / lam) * lower / (1.0 - lower);
            (lower, f2a, f2a * (-log_f_raw(lower, derived.alpha)).exp())
        };
        let f2 = FirstOrderSolution::build(
            start,
            X_MAX,
            f2_start,
            SourceIntegrand::cost(params, &derived),
            inner_rule(&config),
        )?;
        let upper = solve_upper(&f2, start, config.root_tol)?;
        let eval = |y: f64| f2.eval(y).unwrap_or(f64::NAN);
        let outer = CumulativeTable::build(&eval, start, upper, Tolerance::absolute(config.quad_tol))?;
        let k2 = 1.0 - upper - outer.total();
        Ok(Self {
            params: *params,
            derived,
            regime,
            lower,
            upper,
            k1: Some(k1),
            k2: Some(k2),
            config,
            region: Some(ObservationRegion { f2, outer }),
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Lower threshold A.
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Upper (alarm) threshold B.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn k1(&self) -> Option<f64> {
        self.k1
    }

    pub fn k2(&self) -> Option<f64> {
        self.k2
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Number of cached panels in the inner and outer tables.
    pub fn cache_panels(&self) -> (usize, usize) {
        self.region.as_ref().map_or((0, 0), |r| (r.f2.inner.panels(), r.outer.panels()))
    }

    /// Copy with `K2` shifted by `delta`; used to exercise the candidate checks.
    #[doc(hidden)]
    pub fn with_perturbed_k2(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.k2 = out.k2.map(|k| k + delta);
        out
    }

    pub fn piece(&self, x: f64) -> Piece {
        if x >= self.upper {
            Piece::Stop
        } else if x <= self.lower {
            Piece::NoObserve
        } else {
            Piece::Observe
        }
    }

    pub fn piece_side(&self, x: f64, side: Side) -> Piece {
        let has_region = self.lower < self.upper;
        match side {
            Side::Left => {
                if x > self.upper {
                    Piece::Stop
                } else if x <= self.lower || !has_region {
                    if x > self.lower { Piece::Stop } else { Piece::NoObserve }
                } else {
                    Piece::Observe
                }
            }
            Side::Right => {
                if x >= self.upper {
                    Piece::Stop
                } else if x < self.lower {
                    Piece::NoObserve
                } else {
                    Piece::Observe
                }
            }
        }
    }

    fn check_unit(x: f64) -> Result<()> {
        if (0.0..=1.0).contains(&x) {
            Ok(())
        } else {
            Err(domain(format!("state {x} outside [0, 1]")))
        }
    }

    /// `f2(x) = g2'(x)` on `[A, 1 - 1e-6]`.
    pub fn f2(&self, x: f64) -> Result<f64> {
        let region = self.region.as_ref().ok_or(QdoError::Regime("NeverObserve"))?;
        if !(x >= self.lower && x <= X_MAX) {
            return Err(domain(format!("f2 defined on [{}, {X_MAX}], got {x}", self.lower)));
        }
        if x < region.f2.start {
            return Ok(self.f1(x));
        }
        region.f2.eval(x)
    }

    fn f1(&self, x: f64) -> f64 {
        -(self.params.a() / self.params.lambda()) * x / (1.0 - x)
    }

    fn f2_prime(&self, x: f64, f2: f64) -> f64 {
        let p = &self.params;
        let rho = self.derived.rho;
        let q = x * (1.0 - x);
        (-p.a() * x - p.b() - p.lambda() * f2 * (1.0 - x)) / (0.5 * rho * rho * q * q)
    }

    fn g_observe(&self, x: f64) -> Result<f64> {
        let region = self.region.as_ref().expect("observation region");
        let f2 = |y: f64| region.f2.eval(y).unwrap_or(f64::NAN);
        let y = x.max(region.outer.lo());
        let partial = region.outer.eval(&f2, y)?;
        Ok(1.0 - self.upper - (region.outer.total() - partial))
    }

    /// Candidate value function `g(x)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        Self::check_unit(x)?;
        let (lam, a) = (self.params.lambda(), self.params.a());
        match self.piece(x) {
            Piece::Stop => Ok(1.0 - x),
            Piece::NoObserve => match self.regime {
                Regime::NeverObserve => {
                    Ok((a / lam) * (x + (-x).ln_1p() - (a / (a + lam)).ln()))
                }
                _ => {
                    let k2 = self.k2.unwrap_or(0.0);
                    let al = self.lower;
                    Ok((a / lam) * (x + (-x).ln_1p() - al - (-al).ln_1p()) + k2)
                }
            },
            Piece::Observe => self.g_observe(x),
        }
    }

    fn derivatives_in(&self, piece: Piece, x: f64) -> Result<(f64, f64)> {
        let (lam, a) = (self.params.lambda(), self.params.a());
        match piece {
            Piece::Stop => Ok((-1.0, 0.0)),
            Piece::NoObserve => Ok((self.f1(x), -(a / lam) / ((1.0 - x) * (1.0 - x)))),
            Piece::Observe => {
                let region = self.region.as_ref().expect("observation region");
                if x < region.f2.start {
                    return Ok((self.f1(x), -(a / lam) / ((1.0 - x) * (1.0 - x))));
                }
                let f2 = self.f2(x)?;
                Ok((f2, self.f2_prime(x, f2)))
            }
        }
    }

    /// `g'(x)` on the piece containing `x`.
    pub fn dg(&self, x: f64) -> Result<f64> {
        Self::check_unit(x)?;
        Ok(self.derivatives_in(self.piece(x), x)?.0)
    }

    /// `g''(x)` on the piece containing `x`.
    pub fn d2g(&self, x: f64) -> Result<f64> {
        Self::check_unit(x)?;
        Ok(self.derivatives_in(self.piece(x), x)?.1)
    }

    pub fn dg_side(&self, x: f64, side: Side) -> Result<f64> {
        Self::check_unit(x)?;
        Ok(self.derivatives_in(self.piece_side(x, side), x)?.0)
    }

    pub fn d2g_side(&self, x: f64, side: Side) -> Result<f64> {
        Self::check_unit(x)?;
        Ok(self.derivatives_in(self.piece_side(x, side), x)?.1)
    }

    /// `L1 g(x) = λ g'(x)(1-x) + a x`.
    pub fn l1(&self, x: f64) -> Result<f64> {
        Self::check_unit(x)?;
        let (lam, a) = (self.params.lambda(), self.params.a());
        match self.piece(x) {
            // g1 solves L1 g = 0 in closed form
            Piece::NoObserve => Ok(0.0),
            Piece::Stop => Ok(a * x - lam * (1.0 - x)),
            Piece::Observe => Ok(lam * self.dg(x)? * (1.0 - x) + a * x),
        }
    }

    /// `L2 g(x) = L1 g(x) + ½ g''(x) ρ² x² (1-x)² + b`.
    pub fn l2(&self, x: f64) -> Result<f64> {
        Self::check_unit(x)?;
        let p = &self.params;
        let rho = self.derived.rho;
        match self.piece(x) {
            Piece::NoObserve => Ok(p.b() - p.a() * rho * rho / (2.0 * p.lambda()) * x * x),
            Piece::Stop => Ok(self.l1(x)? + p.b()),
            Piece::Observe => {
                let (d1, d2) = self.derivatives_in(Piece::Observe, x)?;
                let q = x * (1.0 - x);
                Ok(p.lambda() * d1 * (1.0 - x) + p.a() * x + 0.5 * d2 * rho * rho * q * q + p.b())
            }
        }
    }

    /// Grid check of the candidate's sign conditions, bounds and concavity.
    pub fn verify_candidate(&self, grid_size: usize) -> CandidateReport {
        verify_candidate(self, grid_size)
    }
}

pub(crate) fn inner_rule(config: &SolverConfig) -> LogRule {
    LogRule { rel: config.quad_tol * 1e-2, abs: config.quad_tol * 1e-4 }
}

fn solve_upper(f2: &FirstOrderSolution, start: f64, root_tol: f64) -> Result<f64> {
    let h = |x: f64| f2.eval(x).map(|v| v + 1.0);
    let (mut lo, mut hi) = (start + BRACKET_OFFSET, X_MAX);
    let (h_lo, h_hi) = (h(lo)?, h(hi)?);
    if !(h_lo > 0.0 && h_hi < 0.0) {
        return Err(QdoError::BracketFailure { lo, hi });
    }
    let (mut best, mut best_res) = if h_lo.abs() < h_hi.abs() { (lo, h_lo) } else { (hi, h_hi) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let hm = h(mid)?;
        if hm.abs() < best_res.abs() {
            best = mid;
            best_res = hm;
        }
        if hm == 0.0 {
            break;
        }
        if hm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 4.0 * f64::EPSILON * hi && best_res.abs() <= root_tol {
            break;
        }
    }
    if best_res.abs() > root_tol {
        return Err(QdoError::BracketFailure { lo, hi });
    }
    Ok(best)
}

/// Outcome of one inequality on the grid.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    /// Largest amount by which the inequality fails (0 when it holds).
    pub worst_violation: f64,
    pub worst_x: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateReport {
    pub grid_size: usize,
    pub threshold: f64,
    pub checks: Vec<InequalityCheck>,
}

impl CandidateReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Accumulator {
    name: &'static str,
    worst: f64,
    worst_x: f64,
}

impl Accumulator {
    fn new(name: &'static str) -> Self {
        Self { name, worst: 0.0, worst_x: f64::NAN }
    }

    fn record(&mut self, x: f64, violation: f64) {
        // NaN counts as an infinite violation
        let v = if violation.is_nan() { f64::INFINITY } else { violation.max(0.0) };
        if v > self.worst || self.worst_x.is_nan() {
            self.worst = self.worst.max(v);
            self.worst_x = x;
        }
    }
}

fn verify_candidate(sol: &FreeBoundarySolution, grid_size: usize) -> CandidateReport {
    let n = grid_size.max(1);
    let threshold = 10.0 * sol.config.quad_tol;
    let (lo, hi) = (sol.lower, sol.upper);
    let two_threshold = sol.regime != Regime::NeverObserve;

    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    grid.push(lo);
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut nonneg = Accumulator::new("g >= 0 on [0,1]");
    let mut below = Accumulator::new("g <= 1-x on [0,1]");
    let mut l1_zero = Accumulator::new("L1g = 0 on [0,A]");
    let mut l2_zero = Accumulator::new("L2g = 0 on [A,B)");
    let mut l2_low = Accumulator::new("L2g >= 0 on [0,A]");
    let mut l1_mid = Accumulator::new("L1g >= 0 on [A,B]");
    let mut l1_top = Accumulator::new("L1g >= 0 on [B,1]");
    let mut l2_top = Accumulator::new("L2g >= 0 on [B,1]");
    let mut concave = Accumulator::new("g'' < 0 on [0,B)");
    let mut monotone = Accumulator::new("g' <= 0 on [0,B]");

    let nan = f64::NAN;
    for &x in &grid {
        let g = sol.value(x).unwrap_or(nan);
        nonneg.record(x, -g);
        below.record(x, g - (1.0 - x));
        let l1 = sol.l1(x).unwrap_or(nan);
        let l2 = sol.l2(x).unwrap_or(nan);
        if x <= lo {
            l1_zero.record(x, l1.abs());
            l2_low.record(x, -l2);
        }
        if two_threshold && x >= lo && x < hi {
            let (d1, d2) = sol.derivatives_in(Piece::Observe, x).unwrap_or((nan, nan));
            let p = &sol.params;
            let rho = sol.derived.rho;
            let q = x * (1.0 - x);
            let l1o = p.lambda() * d1 * (1.0 - x) + p.a() * x;
            let l2o = l1o + 0.5 * d2 * rho * rho * q * q + p.b();
            l2_zero.record(x, l2o.abs());
            l1_mid.record(x, -l1o);
        }
        if x >= hi {
            l1_top.record(x, -l1);
            l2_top.record(x, -l2);
        }
        if x < hi {
            let d2 = sol.d2g(x).unwrap_or(nan);
            concave.record(x, if d2 < 0.0 { 0.0 } else { d2.max(f64::MIN_POSITIVE) });
        }
        if x <= hi {
            monotone.record(x, sol.dg_side(x, Side::Left).unwrap_or(nan));
        }
    }

    let mut accs = vec![nonneg, below, l1_zero];
    if two_threshold {
        accs.push(l2_zero);
        accs.push(l2_low);
        accs.push(l1_mid);
    } else {
        // b ≥ b_crit: L2g ≥ 0 must hold on the whole never-observe piece
        l2_low.name = "L2g >= 0 on [0,B]";
        accs.push(l2_low);
    }
    accs.extend([l1_top, l2_top, concave, monotone]);
    let checks = accs
        .into_iter()
        .map(|acc| InequalityCheck {
            name: acc.name,
            worst_violation: acc.worst,
            worst_x: acc.worst_x,
            pass: acc.worst <= threshold,
        })
        .collect();
    CandidateReport { grid_size: n, threshold, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(b: f64) -> ProblemParams {
        ProblemParams::new(1.0, 1.0, b, 1.0, 1.0).unwrap()
    }

    #[test]
    fn log_f_values() {
        assert!((log_f(0.5, 2.0).unwrap() - 4.0).abs() < 1e-15);
        let v = log_f(2.0 / 3.0, 2.0).unwrap().exp();
        assert!((v - 3f64.exp() / 4.0).abs() < 1e-13);
        assert!(log_f(1.0 - 1e-15, 2.0).unwrap() < -60.0);
        assert!(log_f(0.0, 2.0).is_err());
        assert!(log_f(1.0, 2.0).is_err());
    }

    #[test]
    fn threshold_a_values() {
        assert!((threshold_a(&canonical(0.05)).unwrap() - 0.1f64.sqrt()).abs() < 1e-15);
        assert_eq!(threshold_a(&canonical(0.0)).unwrap(), 0.0);
        let p = ProblemParams::new(2.0, 1.0, 0.05, 1.0, 1.0).unwrap();
        assert!((threshold_a(&p).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
        assert_eq!(threshold_a(&canonical(0.2)), Err(QdoError::Regime("NeverObserve")));
    }

    #[test]
    fn canonical_thresholds() {
        let sol = FreeBoundarySolution::solve(&canonical(0.05)).unwrap();
        assert_eq!(sol.regime(), Regime::TwoThreshold);
        let a = sol.lower();
        assert!((sol.f2(a).unwrap() - (-a / (1.0 - a))).abs() < 1e-15);
        assert!((sol.f2(a).unwrap() + 0.462_475_295_574_264).abs() < 1e-12);
        let b = sol.upper();
        assert!(b > 0.5 && b < 1.0);
        assert!((sol.f2(b).unwrap() + 1.0).abs() <= 1e-9);
        assert!(sol.f2(0.999_999_5).is_err());
        assert!(sol.f2(a - 1e-3).is_err());
    }

    #[test]
    fn never_observe_values() {
        let sol = FreeBoundarySolution::solve(&canonical(0.2)).unwrap();
        assert_eq!((sol.lower(), sol.upper()), (0.5, 0.5));
        assert!((sol.value(0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((sol.value(0.25).unwrap() - (0.25 + 1.5f64.ln())).abs() < 1e-15);
        assert_eq!(sol.value(0.7).unwrap(), 1.0 - 0.7);
        assert!(sol.f2(0.3).is_err());
        assert!(sol.k1().is_none());
    }

    #[test]
    fn smooth_fit_and_second_order_fit() {
        let sol = FreeBoundarySolution::solve(&canonical(0.05)).unwrap();
        let (a, b) = (sol.lower(), sol.upper());
        assert!((sol.dg_side(b, Side::Left).unwrap() + 1.0).abs() <= 1e-9);
        assert_eq!(sol.dg(b).unwrap(), -1.0);
        assert!((sol.value(b).unwrap() - (1.0 - b)).abs() <= 1e-10);
        assert!((sol.g_observe(b).unwrap() - (1.0 - b)).abs() <= 1e-15);
        assert_eq!(sol.dg(0.0).unwrap(), 0.0);
        let left = sol.d2g_side(a, Side::Left).unwrap();
        let right = sol.d2g_side(a, Side::Right).unwrap();
        assert!((left + 1.0 / ((1.0 - a) * (1.0 - a))).abs() < 1e-14);
        assert!((left - right).abs() < 1e-10, "{left} vs {right}");
        let dl = sol.dg_side(a, Side::Left).unwrap();
        let dr = sol.dg_side(a, Side::Right).unwrap();
        assert!((dl - dr).abs() < 1e-14);
        let gl = sol.value(a).unwrap();
        let gr = sol.g_observe(a + 1e-12).unwrap();
        assert!((gl - gr).abs() < 1e-10);
    }

    #[test]
    fn operators_on_pieces() {
        let sol = FreeBoundarySolution::solve(&canonical(0.05)).unwrap();
        assert_eq!(sol.l1(0.1).unwrap(), 0.0);
        assert!((sol.l2(0.2).unwrap() - 0.03).abs() < 1e-15);
        let mid = 0.5 * (sol.lower() + sol.upper());
        assert!(sol.l2(mid).unwrap().abs() < 1e-10);
        assert!(sol.l1(mid).unwrap() > 0.0);
        assert!((sol.l1(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn candidate_report() {
        let sol = FreeBoundarySolution::solve(&canonical(0.05)).unwrap();
        let report = sol.verify_candidate(2000);
        assert!(report.pass(), "{report:#?}");
        let never = FreeBoundarySolution::solve(&canonical(0.2)).unwrap();
        assert!(never.verify_candidate(2000).pass());
        let bad = sol.with_perturbed_k2(0.1).verify_candidate(2000);
        assert!(!bad.pass());
        assert!(!bad.check("g <= 1-x on [0,1]").unwrap().pass);
    }

    #[test]
    fn domain_errors() {
        let sol = FreeBoundarySolution::solve(&canonical(0.05)).unwrap();
        assert!(sol.value(-0.1).is_err());
        assert!(sol.value(1.1).is_err());
        assert!(sol.dg(f64::NAN).is_err());
        assert_eq!(sol.value(1.0).unwrap(), 0.0);
    }
}
