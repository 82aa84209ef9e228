//! Model constants, derived quantities and the cost-regime split.
//!
//! The observed process is `dX = r h 1{θ ≤ t} dt + σ √h dW` with an
//! exponential(λ) disorder time carrying an atom `π₀` at zero. Stopping
//! late costs `a` per unit time, an early alarm costs 1 and keeping the
//! sensor on costs `b` per unit time.

use serde::{Deserialize, Serialize};

use crate::error::{domain, QdoError, Result};

/// Validated model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    lambda: f64,
    a: f64,
    b: f64,
    r: f64,
    sigma: f64,
}

/// Quantities derived from [`ProblemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Signal-to-noise ratio `r / σ`.
    pub rho: f64,
    /// Exponent `2λ / ρ²` of the homogeneous solution.
    pub alpha: f64,
    /// Critical observation cost `λ a ρ² / (2 (a + λ)²)`.
    pub b_crit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `b = 0`: observing is free, classical single-threshold problem.
    ZeroCost,
    /// `0 < b < b_crit`: ignore the sensor below A, observe on ]A,B[, stop at B.
    TwoThreshold,
    /// `b ≥ b_crit`: never observe, stop at `λ / (a + λ)`.
    NeverObserve,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::ZeroCost => "ZeroCost",
            Regime::TwoThreshold => "TwoThreshold",
            Regime::NeverObserve => "NeverObserve",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl ProblemParams {
    /// Validates `(λ, a, b, r, σ)`.
    pub fn new(lambda: f64, a: f64, b: f64, r: f64, sigma: f64) -> Result<Self> {
        for (name, value) in [("lambda", lambda), ("a", a), ("b", b), ("r", r), ("sigma", sigma)] {
            if !value.is_finite() {
                return Err(QdoError::NonFinite { name });
            }
        }
        for (name, value) in [("lambda", lambda), ("a", a), ("r", r), ("sigma", sigma)] {
            if value <= 0.0 {
                return Err(QdoError::NonPositiveParameter { name, value });
            }
        }
        if b < 0.0 {
            return Err(QdoError::NegativeCost(b));
        }
        Ok(Self { lambda, a, b, r, sigma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same model with a different observation cost.
    pub fn with_cost(&self, b: f64) -> Result<Self> {
        Self::new(self.lambda, self.a, b, self.r, self.sigma)
    }

    pub fn derive(&self) -> DerivedParams {
        let rho = self.r / self.sigma;
        let rho2 = rho * rho;
        let alpha = 2.0 * self.lambda / rho2;
        let apl = self.a + self.lambda;
        let b_crit = self.lambda * self.a * rho2 / (2.0 * apl * apl);
        DerivedParams { rho, alpha, b_crit }
    }

    /// Boundary `b = b_crit` is assigned to [`Regime::NeverObserve`].
    pub fn regime(&self) -> Regime {
        if self.b == 0.0 {
            Regime::ZeroCost
        } else if self.b < self.derive().b_crit {
            Regime::TwoThreshold
        } else {
            Regime::NeverObserve
        }
    }

    /// `λ / (a + λ)`: where the never-observe value function meets `1 - x`
    /// with slope -1.
    pub fn myopic_threshold(&self) -> f64 {
        self.lambda / (self.a + self.lambda)
    }
}

/// `φ = π / (1 - π)`.
pub fn odds_of_prob(pi: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&pi) {
        return Err(domain(format!("odds undefined for probability {pi}")));
    }
    Ok(pi / (1.0 - pi))
}

/// `π = φ / (1 + φ)`.
pub fn prob_of_odds(phi: f64) -> Result<f64> {
    if phi.is_nan() || phi < 0.0 {
        return Err(domain(format!("odds must be nonnegative, got {phi}")));
    }
    if phi.is_infinite() {
        return Ok(1.0);
    }
    Ok(phi / (1.0 + phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn canonical(b: f64) -> ProblemParams {
        ProblemParams::new(1.0, 1.0, b, 1.0, 1.0).unwrap()
    }

    #[test]
    fn validation() {
        assert!(ProblemParams::new(1.0, 1.0, 0.05, 1.0, 1.0).is_ok());
        assert_eq!(
            ProblemParams::new(0.0, 1.0, 0.05, 1.0, 1.0),
            Err(QdoError::NonPositiveParameter { name: "lambda", value: 0.0 })
        );
        assert_eq!(ProblemParams::new(1.0, 1.0, -0.1, 1.0, 1.0), Err(QdoError::NegativeCost(-0.1)));
        assert_eq!(
            ProblemParams::new(1.0, f64::NAN, 0.05, 1.0, 1.0),
            Err(QdoError::NonFinite { name: "a" })
        );
        assert!(matches!(
            ProblemParams::new(1.0, 1.0, 0.05, f64::INFINITY, 1.0),
            Err(QdoError::NonFinite { .. })
        ));
        assert!(matches!(
            ProblemParams::new(1.0, 1.0, 0.05, 1.0, -2.0),
            Err(QdoError::NonPositiveParameter { name: "sigma", .. })
        ));
    }

    #[test]
    fn derived_values() {
        let d = canonical(0.05).derive();
        assert_eq!((d.rho, d.alpha, d.b_crit), (1.0, 2.0, 0.125));
        let d = ProblemParams::new(1.0, 1.0, 0.0, 2.0, 1.0).unwrap().derive();
        assert_eq!((d.rho, d.alpha, d.b_crit), (2.0, 0.5, 0.5));
        let d = ProblemParams::new(2.0, 1.0, 0.0, 1.0, 1.0).unwrap().derive();
        assert_eq!((d.rho, d.alpha), (1.0, 4.0));
        assert!((d.b_crit - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        assert_eq!(canonical(0.05).regime(), Regime::TwoThreshold);
        assert_eq!(canonical(0.125).regime(), Regime::NeverObserve);
        assert_eq!(canonical(0.0).regime(), Regime::ZeroCost);
        assert_eq!(canonical(3.0).regime(), Regime::NeverObserve);
    }

    #[test]
    fn odds() {
        assert_eq!(odds_of_prob(0.5).unwrap(), 1.0);
        assert_eq!(prob_of_odds(0.0).unwrap(), 0.0);
        assert!((odds_of_prob(0.8).unwrap() - 4.0).abs() < 1e-14);
        assert!((prob_of_odds(4.0).unwrap() - 0.8).abs() < 1e-15);
        assert!(odds_of_prob(1.0).is_err());
        assert!(odds_of_prob(-0.1).is_err());
        assert!(prob_of_odds(-1.0).is_err());
    }

    #[test]
    fn b_crit_increases_in_rho_and_lambda() {
        let grid = [0.2, 0.5, 1.0, 2.0, 5.0];
        for w in grid.windows(2) {
            let lo = ProblemParams::new(1.0, 1.0, 0.0, w[0], 1.0).unwrap().derive().b_crit;
            let hi = ProblemParams::new(1.0, 1.0, 0.0, w[1], 1.0).unwrap().derive().b_crit;
            assert!(hi > lo);
        }
        // λ a / (a+λ)² increases in λ while λ < a.
        let lambdas = [0.1, 0.3, 0.6, 0.9];
        for w in lambdas.windows(2) {
            let lo = ProblemParams::new(w[0], 1.0, 0.0, 1.0, 1.0).unwrap().derive().b_crit;
            let hi = ProblemParams::new(w[1], 1.0, 0.0, 1.0, 1.0).unwrap().derive().b_crit;
            assert!(hi > lo);
        }
    }

    proptest! {
        #[test]
        fn odds_round_trip(pi in 0.0f64..(1.0 - 1e-12)) {
            let back = prob_of_odds(odds_of_prob(pi).unwrap()).unwrap();
            prop_assert!((back - pi).abs() <= 4.0 * f64::EPSILON * pi);
        }

        #[test]
        fn regime_depends_on_signs_only(
            lambda in 0.05f64..5.0, a in 0.05f64..5.0, r in 0.05f64..5.0,
            sigma in 0.05f64..5.0, frac in 0.0f64..3.0,
        ) {
            let p = ProblemParams::new(lambda, a, 0.0, r, sigma).unwrap();
            let b = frac * p.derive().b_crit;
            let q = p.with_cost(b).unwrap();
            let expected = if b == 0.0 {
                Regime::ZeroCost
            } else if b < q.derive().b_crit {
                Regime::TwoThreshold
            } else {
                Regime::NeverObserve
            };
            prop_assert_eq!(q.regime(), expected);
            prop_assert_eq!(q.derive(), q.derive());
        }
    }
}
