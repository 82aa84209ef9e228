//! Posterior reconstruction from a recorded observation path.
//!
//! [`posterior_exact`] uses the explicit solution of the linear odds equation,
//!
//! ```text
//! q_t = e^{E_t} (q_0 + ∫_0^t λ e^{-E_s} ds),   E_t = (r/σ²) X_t + λ t - ½ (r²/σ⁴) ⟨X⟩_t,
//! ```
//!
//! carried entirely in log space; [`posterior_euler`] integrates the posterior
//! equation directly and serves as an independent discretisation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, QdoError, Result};
use crate::model::ProblemParams;
use crate::quadrature::log_add_exp;

/// Observed process `X` and control `h` on a time grid.
///
/// The quadratic variation is the model value `Σ σ² h dt`, not the realised
/// sum of squared increments.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPath {
    times: Vec<f64>,
    x: Vec<f64>,
    h: Vec<f64>,
    qv: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    #[serde(rename = "X")]
    x: f64,
    h: f64,
}

impl ObservationPath {
    pub fn new(times: Vec<f64>, x: Vec<f64>, h: Vec<f64>, sigma: f64) -> Result<Self> {
        if times.is_empty() || times.len() != x.len() || times.len() != h.len() {
            return Err(domain("times, X and h must be non-empty and of equal length"));
        }
        if times[0] != 0.0 || x[0] != 0.0 {
            return Err(domain("path must start at t = 0 with X = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("times must be strictly increasing"));
        }
        if h.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(domain("h must lie in [0, 1]"));
        }
        if x.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(QdoError::NonFinite { name: "path" });
        }
        let mut qv = Vec::with_capacity(times.len());
        qv.push(0.0);
        for i in 1..times.len() {
            qv.push(qv[i - 1] + sigma * sigma * h[i - 1] * (times[i] - times[i - 1]));
        }
        Ok(Self { times, x, h, qv })
    }

    /// A path on which the sensor is never switched on.
    pub fn unobserved(dt: f64, steps: usize) -> Self {
        let times = (0..=steps).map(|i| i as f64 * dt).collect();
        Self { times, x: vec![0.0; steps + 1], h: vec![0.0; steps + 1], qv: vec![0.0; steps + 1] }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn qv(&self) -> &[f64] {
        &self.qv
    }

    /// Reads columns `t,X,h` (header required).
    pub fn read_csv<R: Read>(reader: R, sigma: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let (mut t, mut x, mut h) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| QdoError::Io(e.to_string()))?;
            t.push(row.t);
            x.push(row.x);
            h.push(row.h);
        }
        Self::new(t, x, h, sigma)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for i in 0..self.len() {
            wtr.serialize(Row { t: self.times[i], x: self.x[i], h: self.h[i] })
                .map_err(|e| QdoError::Io(e.to_string()))?;
        }
        wtr.flush().map_err(|e| QdoError::Io(e.to_string()))
    }
}

fn check_prior(pi0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi0) {
        Ok(())
    } else {
        Err(domain(format!("pi0 = {pi0} outside [0, 1]")))
    }
}

fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Posterior on the grid from the explicit odds formula (trapezoidal inner integral).
pub fn posterior_exact(path: &ObservationPath, p: &ProblemParams, pi0: f64) -> Result<Vec<f64>> {
    check_prior(pi0)?;
    if pi0 == 1.0 {
        return Ok(vec![1.0; path.len()]);
    }
    let (lam, r, s2) = (p.lambda(), p.r(), p.sigma() * p.sigma());
    let exponent = |i: usize| r / s2 * path.x[i] + lam * path.times[i] - 0.5 * r * r / (s2 * s2) * path.qv[i];

    // ln S_t with S_t = q_0 + ∫_0^t λ e^{-E_s} ds
    let mut log_s = pi0.ln() - (-pi0).ln_1p();
    let mut prev = exponent(0);
    let mut out = Vec::with_capacity(path.len());
    out.push(logistic(prev + log_s));
    for i in 1..path.len() {
        let e = exponent(i);
        let dt = path.times[i] - path.times[i - 1];
        let log_panel = (0.5 * lam * dt).ln() + log_add_exp(-prev, -e);
        log_s = log_add_exp(log_s, log_panel);
        out.push(logistic(e + log_s));
        prev = e;
    }
    Ok(out)
}

/// Posterior on the grid by an Euler step of the filtering equation, clamped to `[0, 1]`.
pub fn posterior_euler(path: &ObservationPath, p: &ProblemParams, pi0: f64) -> Result<Vec<f64>> {
    check_prior(pi0)?;
    let (lam, r, s2) = (p.lambda(), p.r(), p.sigma() * p.sigma());
    let mut pi = pi0;
    let mut out = Vec::with_capacity(path.len());
    out.push(pi);
    for i in 1..path.len() {
        let dt = path.times[i] - path.times[i - 1];
        let dx = path.x[i] - path.x[i - 1];
        let h = path.h[i - 1];
        let q = pi * (1.0 - pi);
        pi += lam * (1.0 - pi) * dt + r / s2 * q * dx - r * r / s2 * pi * q * h * dt;
        pi = pi.clamp(0.0, 1.0);
        out.push(pi);
    }
    Ok(out)
}

/// `1 - (1 - π₀) e^{-λ t}`: the posterior while nothing is observed.
pub fn unobserved_posterior(lambda: f64, pi0: f64, t: f64) -> f64 {
    1.0 - (1.0 - pi0) * (-lambda * t).exp()
}
