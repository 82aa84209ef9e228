//! ε-smoothed strategies: the control ramps linearly from 0 at `A` to 1 at
//! `A + ε`, which gives the posterior equation a strong solution.
//!
//! For a fixed ε this module builds the exact expected cost `g_ε` and the
//! expected time `γ_ε` to reach the alarm threshold `B`. Both solve
//!
//! ```text
//! λ(1-x) u' + ½ ρ² x² (1-x)² h_ε(x) u'' = -source(x)
//! ```
//!
//! with `source = a x + b h_ε(x)` for the cost and `source = 1` for the time,
//! pasted C¹ across `A` and `A + ε`.
//!
//! On the ramp the homogeneous solution is `f̄(x) = ψ(x) (x-A)^{-β}` and the
//! bounded particular solution is
//!
//! ```text
//! u'(x) = f̄(x) ∫_A^x c(y) (y-A)^{-1} / f̄(y) dy,   c(y) = -(2ε/ρ²) source(y) / (y²(1-y)²)
//! ```
//!
//! Writing `y = A + (x-A) v^{1/β}` turns the weakly singular integrand
//! `(y-A)^{β-1}` into the bounded `(1/β) c(y) ψ(x)/ψ(y)` on `v ∈ [0, 1]`.

use serde::Serialize;

use crate::error::{domain, QdoError, Result};
use crate::free_boundary::{inner_rule, log_f_raw, FirstOrderSolution, FreeBoundarySolution, SourceIntegrand};
use crate::model::Regime;
use crate::quadrature::{integrate, CumulativeTable, Tolerance};

/// `h_ε(x)`: 0 on `[0, A]`, `(x-A)/ε` on `(A, A+ε)`, 1 from `A+ε` on.
pub fn h_eps(x: f64, lower: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("state {x} outside [0, 1]")));
    }
    Ok(ramp(x, lower, epsilon))
}

#[inline]
pub(crate) fn ramp(x: f64, lower: f64, epsilon: f64) -> f64 {
    if x <= lower {
        0.0
    } else if x >= lower + epsilon {
        1.0
    } else {
        (x - lower) / epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EpsPiece {
    /// `[0, A]`
    Idle,
    /// `(A, A+ε)`
    Ramp,
    /// `[A+ε, B)`
    Full,
    /// `[B, 1]`
    Stop,
}

/// Options for [`EpsilonPolicy::build`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpsilonOptions {
    /// Accept `(B-A)/2 < ε < B-A`.
    pub allow_wide: bool,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Cost,
    Unit,
}

/// Ramp exponents `ψ(x) = x^{p} (1-x)^{q} e^{-s/x}` and `β`.
#[derive(Debug, Clone, Copy, Serialize)]
struct RampShape {
    lower: f64,
    epsilon: f64,
    beta: f64,
    p: f64,
    q: f64,
    s: f64,
}

impl RampShape {
    fn log_psi(&self, x: f64) -> f64 {
        self.p * x.ln() + self.q * (-x).ln_1p() - self.s / x
    }
}

/// The ε-strategy with the constants of its cost and hitting-time functions.
#[derive(Debug, Clone)]
pub struct EpsilonPolicy {
    base: FreeBoundarySolution,
    shape: RampShape,
    a: f64,
    b: f64,
    lambda: f64,
    rho: f64,
    inner_tol: Tolerance,
    k1e: f64,
    k2e: f64,
    k3e: f64,
    k4e: f64,
    d1: f64,
    d3: f64,
    d4: f64,
    d5: f64,
    ramp_cost: CumulativeTable,
    ramp_time: CumulativeTable,
    full_cost_slope: FirstOrderSolution,
    full_time_slope: FirstOrderSolution,
    full_cost: CumulativeTable,
    full_time: CumulativeTable,
}

/// Constants of `g_ε` and `γ_ε`, for reporting.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpsilonConstants {
    pub epsilon: f64,
    pub beta_eps: f64,
    pub k1e: f64,
    pub k2e: f64,
    pub k3e: f64,
    pub k4e: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
}

impl EpsilonPolicy {
    pub fn new(base: &FreeBoundarySolution, epsilon: f64) -> Result<Self> {
        Self::build(base, epsilon, EpsilonOptions::default())
    }

    pub fn build(base: &FreeBoundarySolution, epsilon: f64, options: EpsilonOptions) -> Result<Self> {
        if base.regime() != Regime::TwoThreshold {
            return Err(QdoError::Regime(base.regime().name()));
        }
        let (lower, upper) = (base.lower(), base.upper());
        let gap = upper - lower;
        let max = if options.allow_wide { gap } else { 0.5 * gap };
        let valid = if options.allow_wide { epsilon < max } else { epsilon <= max };
        if !(epsilon > 0.0 && valid && epsilon.is_finite()) {
            return Err(QdoError::EpsilonTooLarge { epsilon, max });
        }

        let p = *base.params();
        let d = *base.derived();
        let (lambda, rho) = (p.lambda(), d.rho);
        let rho2 = rho * rho;
        let scale = 2.0 * lambda * epsilon / rho2;
        let shape = RampShape {
            lower,
            epsilon,
            beta: scale / (lower * lower * (1.0 - lower)),
            p: scale * (1.0 + lower) / (lower * lower),
            q: scale / (1.0 - lower),
            s: scale / lower,
        };
        let quad_tol = base.config().quad_tol;
        let knee = lower + epsilon;
        let inner_tol = Tolerance { abs: quad_tol * 1e-3, rel: 1e-13 };

        let mut policy = Self {
            base: base.clone(),
            shape,
            a: p.a(),
            b: p.b(),
            lambda,
            rho,
            inner_tol,
            k1e: 0.0,
            k2e: 0.0,
            k3e: 0.0,
            k4e: 0.0,
            d1: 0.0,
            d3: 0.0,
            d4: 0.0,
            d5: 0.0,
            ramp_cost: CumulativeTable::build(&|_| 0.0, lower, lower, Tolerance::absolute(quad_tol))?,
            ramp_time: CumulativeTable::build(&|_| 0.0, lower, lower, Tolerance::absolute(quad_tol))?,
            full_cost_slope: FirstOrderSolution::build(knee, knee, 0.0, SourceIntegrand::cost(&p, &d), inner_rule(base.config()))?,
            full_time_slope: FirstOrderSolution::build(knee, knee, 0.0, SourceIntegrand::unit(&d), inner_rule(base.config()))?,
            full_cost: CumulativeTable::build(&|_| 0.0, knee, knee, Tolerance::absolute(quad_tol))?,
            full_time: CumulativeTable::build(&|_| 0.0, knee, knee, Tolerance::absolute(quad_tol))?,
        };

        let outer_tol = Tolerance::absolute(quad_tol);
        {
            let hc = |x: f64| policy.ramp_slope(x, Source::Cost).unwrap_or(f64::NAN);
            policy.ramp_cost = CumulativeTable::build(&hc, lower, knee, outer_tol)?;
            let ht = |x: f64| policy.ramp_slope(x, Source::Unit).unwrap_or(f64::NAN);
            policy.ramp_time = CumulativeTable::build(&ht, lower, knee, outer_tol)?;
        }
        let h2_knee = policy.ramp_slope(knee, Source::Cost)?;
        let h4_knee = policy.ramp_slope(knee, Source::Unit)?;
        policy.full_cost_slope =
            FirstOrderSolution::build(knee, upper, h2_knee, SourceIntegrand::cost(&p, &d), inner_rule(base.config()))?;
        policy.full_time_slope =
            FirstOrderSolution::build(knee, upper, h4_knee, SourceIntegrand::unit(&d), inner_rule(base.config()))?;
        {
            let h3 = |x: f64| policy.full_cost_slope.eval(x).unwrap_or(f64::NAN);
            policy.full_cost = CumulativeTable::build(&h3, knee, upper, outer_tol)?;
            let h5 = |x: f64| policy.full_time_slope.eval(x).unwrap_or(f64::NAN);
            policy.full_time = CumulativeTable::build(&h5, knee, upper, outer_tol)?;
        }

        let log_f_knee = log_f_raw(knee, d.alpha);
        let (a, lam) = (p.a(), lambda);
        policy.k2e = h2_knee * (-log_f_knee).exp();
        policy.k3e = 1.0 - upper - policy.full_cost.total();
        policy.k4e = policy.k3e - policy.ramp_cost.total();
        policy.k1e = policy.k4e - (a / lam) * (lower + (-lower).ln_1p());
        policy.d5 = h4_knee * (-log_f_knee).exp();
        policy.d4 = -policy.full_time.total();
        policy.d3 = policy.d4 - policy.ramp_time.total();
        policy.d1 = policy.d3 - (-lower).ln_1p() / lam;
        Ok(policy)
    }

    pub fn base(&self) -> &FreeBoundarySolution {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.shape.epsilon
    }

    pub fn beta_eps(&self) -> f64 {
        self.shape.beta
    }

    pub fn lower(&self) -> f64 {
        self.shape.lower
    }

    pub fn upper(&self) -> f64 {
        self.base.upper()
    }

    /// End of the ramp, `A + ε`.
    pub fn knee(&self) -> f64 {
        self.shape.lower + self.shape.epsilon
    }

    pub fn constants(&self) -> EpsilonConstants {
        EpsilonConstants {
            epsilon: self.shape.epsilon,
            beta_eps: self.shape.beta,
            k1e: self.k1e,
            k2e: self.k2e,
            k3e: self.k3e,
            k4e: self.k4e,
            d1: self.d1,
            d2: 0.0,
            d3: self.d3,
            d4: self.d4,
            d5: self.d5,
        }
    }

    pub fn control(&self, x: f64) -> f64 {
        ramp(x, self.shape.lower, self.shape.epsilon)
    }

    pub fn piece(&self, x: f64) -> EpsPiece {
        if x >= self.upper() {
            EpsPiece::Stop
        } else if x <= self.shape.lower {
            EpsPiece::Idle
        } else if x < self.knee() {
            EpsPiece::Ramp
        } else {
            EpsPiece::Full
        }
    }

    /// `ln f̄(x) = ln ψ(x) - β ln(x - A)` on `(A, A+ε]`.
    pub fn log_f2bar_eps(&self, x: f64) -> Result<f64> {
        if !(x > self.shape.lower && x <= self.knee()) {
            return Err(domain(format!("f̄ defined on (A, A+ε], got {x}")));
        }
        Ok(self.shape.log_psi(x) - self.shape.beta * (x - self.shape.lower).ln())
    }

    fn source(&self, y: f64, which: Source) -> f64 {
        match which {
            Source::Cost => self.a * y + self.b * (y - self.shape.lower) / self.shape.epsilon,
            Source::Unit => 1.0,
        }
    }

    fn ramp_coefficient(&self, y: f64, which: Source) -> f64 {
        let q = y * (1.0 - y);
        -2.0 * self.shape.epsilon / (self.rho * self.rho) * self.source(y, which) / (q * q)
    }

    /// Bounded particular solution of the first-order equation on the ramp.
    fn ramp_slope(&self, x: f64, which: Source) -> Result<f64> {
        let sh = self.shape;
        let gap = x - sh.lower;
        if gap <= 0.0 {
            return Ok(self.ramp_coefficient(sh.lower, which) / sh.beta);
        }
        let log_psi_x = sh.log_psi(x);
        let inv_beta = 1.0 / sh.beta;
        let integrand = |v: f64| {
            let y = sh.lower + gap * v.powf(inv_beta);
            self.ramp_coefficient(y, which) * (log_psi_x - sh.log_psi(y)).exp()
        };
        Ok(integrate(&integrand, 0.0, 1.0, self.inner_tol)? * inv_beta)
    }

    fn check(&self, x: f64) -> Result<()> {
        if (0.0..=1.0).contains(&x) {
            Ok(())
        } else {
            Err(domain(format!("state {x} outside [0, 1]")))
        }
    }

    /// Expected cost `g_ε(x)` of the ε-strategy started at `x`.
    pub fn g_eps(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        match self.piece(x) {
            EpsPiece::Stop => Ok(1.0 - x),
            EpsPiece::Idle => Ok((self.a / self.lambda) * (x + (-x).ln_1p()) + self.k1e),
            EpsPiece::Ramp => {
                let h = |y: f64| self.ramp_slope(y, Source::Cost).unwrap_or(f64::NAN);
                Ok(self.ramp_cost.eval(&h, x)? + self.k4e)
            }
            EpsPiece::Full => {
                let h = |y: f64| self.full_cost_slope.eval(y).unwrap_or(f64::NAN);
                Ok(self.full_cost.eval(&h, x)? + self.k3e)
            }
        }
    }

    /// `g_ε'(x)` on the piece containing `x`.
    pub fn dg_eps(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        match self.piece(x) {
            EpsPiece::Stop => Ok(-1.0),
            EpsPiece::Idle => Ok(-(self.a / self.lambda) * x / (1.0 - x)),
            EpsPiece::Ramp => self.ramp_slope(x, Source::Cost),
            EpsPiece::Full => self.full_cost_slope.eval(x),
        }
    }

    /// Expected time `γ_ε(x)` to reach `B`; 0 from `B` on.
    pub fn gamma_eps(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        match self.piece(x) {
            EpsPiece::Stop => Ok(0.0),
            EpsPiece::Idle => Ok((-x).ln_1p() / self.lambda + self.d1),
            EpsPiece::Ramp => {
                let h = |y: f64| self.ramp_slope(y, Source::Unit).unwrap_or(f64::NAN);
                Ok(self.ramp_time.eval(&h, x)? + self.d3)
            }
            EpsPiece::Full => {
                let h = |y: f64| self.full_time_slope.eval(y).unwrap_or(f64::NAN);
                Ok(self.full_time.eval(&h, x)? + self.d4)
            }
        }
    }

    /// `γ_ε'(x)` on the piece containing `x`.
    pub fn dgamma_eps(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        match self.piece(x) {
            EpsPiece::Stop => Ok(0.0),
            EpsPiece::Idle => Ok(-1.0 / (self.lambda * (1.0 - x))),
            EpsPiece::Ramp => self.ramp_slope(x, Source::Unit),
            EpsPiece::Full => self.full_time_slope.eval(x),
        }
    }

    /// Generator `λ(1-x) u' + ½ρ²x²(1-x)² h_ε(x) u''` applied to given derivatives.
    pub fn generator(&self, x: f64, du: f64, d2u: f64) -> f64 {
        let q = x * (1.0 - x);
        self.lambda * (1.0 - x) * du + 0.5 * self.rho * self.rho * q * q * self.control(x) * d2u
    }

    /// Running cost `a x + b h_ε(x)`.
    pub fn running_cost(&self, x: f64) -> f64 {
        self.a * x + self.b * self.control(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemParams;

    fn canonical_policy(eps: f64) -> EpsilonPolicy {
        let p = ProblemParams::new(1.0, 1.0, 0.05, 1.0, 1.0).unwrap();
        let sol = FreeBoundarySolution::solve(&p).unwrap();
        EpsilonPolicy::new(&sol, eps).unwrap()
    }

    #[test]
    fn ramp_values() {
        let (a, e) = (0.3, 0.02);
        assert_eq!(h_eps(a, a, e).unwrap(), 0.0);
        assert_eq!(h_eps(a + e, a, e).unwrap(), 1.0);
        assert!((h_eps(a + e / 2.0, a, e).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(h_eps(0.0, a, e).unwrap(), 0.0);
        assert_eq!(h_eps(1.0, a, e).unwrap(), 1.0);
        assert!(h_eps(1.5, a, e).is_err());
    }

    #[test]
    fn epsilon_validation() {
        let p = ProblemParams::new(1.0, 1.0, 0.05, 1.0, 1.0).unwrap();
        let sol = FreeBoundarySolution::solve(&p).unwrap();
        let gap = sol.upper() - sol.lower();
        assert!(matches!(EpsilonPolicy::new(&sol, 0.0), Err(QdoError::EpsilonTooLarge { .. })));
        assert!(matches!(EpsilonPolicy::new(&sol, 0.6 * gap), Err(QdoError::EpsilonTooLarge { .. })));
        let wide = EpsilonOptions { allow_wide: true };
        assert!(EpsilonPolicy::build(&sol, 0.6 * gap, wide).is_ok());
        assert!(EpsilonPolicy::build(&sol, gap, wide).is_err());
        let never = FreeBoundarySolution::solve(&p.with_cost(0.2).unwrap()).unwrap();
        assert_eq!(EpsilonPolicy::new(&never, 0.01).unwrap_err(), QdoError::Regime("NeverObserve"));
        let free = FreeBoundarySolution::solve(&p.with_cost(0.0).unwrap()).unwrap();
        assert!(EpsilonPolicy::new(&free, 0.01).is_err());
    }

    #[test]
    fn homogeneous_ramp_solution() {
        let pol = canonical_policy(0.02);
        let (a, knee) = (pol.lower(), pol.knee());
        // d/dx ln f̄ = -2λε / (ρ² x² (1-x) (x-A))
        for i in 1..10 {
            let x = a + (knee - a) * i as f64 / 10.0;
            let h = 1e-7;
            let fd = (pol.log_f2bar_eps(x + h).unwrap() - pol.log_f2bar_eps(x - h).unwrap()) / (2.0 * h);
            let exact = -2.0 * 0.02 / (x * x * (1.0 - x) * (x - a));
            assert!((fd - exact).abs() < 1e-5 * exact.abs(), "{fd} vs {exact}");
        }
        assert!(pol.log_f2bar_eps(a + 1e-12).unwrap() > pol.log_f2bar_eps(pol.knee()).unwrap() + 10.0);
        assert!(pol.log_f2bar_eps(a).is_err());
        let tiny = canonical_policy(1e-9);
        assert!(tiny.log_f2bar_eps(tiny.knee()).unwrap().abs() < 1e-5);
    }

    #[test]
    fn ramp_slope_is_continuous_at_lower() {
        let pol = canonical_policy(0.02);
        let a = pol.lower();
        let limit = pol.ramp_slope(a, Source::Cost).unwrap();
        assert!((limit + a / (1.0 - a)).abs() < 1e-14);
        let near = pol.ramp_slope(a + 1e-9, Source::Cost).unwrap();
        assert!((near - limit).abs() < 1e-6);
    }

    #[test]
    fn stopping_region_and_endpoints() {
        let pol = canonical_policy(0.02);
        let b = pol.upper();
        assert_eq!(pol.g_eps(b).unwrap(), 1.0 - b);
        assert_eq!(pol.g_eps(0.9).unwrap(), 1.0 - 0.9);
        assert_eq!(pol.gamma_eps(b).unwrap(), 0.0);
        assert!((pol.g_eps(b - 1e-12).unwrap() - (1.0 - b)).abs() < 1e-10);
        assert!(pol.gamma_eps(b - 1e-12).unwrap().abs() < 1e-10);
    }
}
