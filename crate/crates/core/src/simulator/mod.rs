//! Monte Carlo engine for the controlled posterior.
//!
//! Two equivalent-in-law dynamics are available: the physical model, which
//! draws the disorder time and feeds the filter the observed increments, and
//! the innovation form driven directly by the observer's Brownian motion.
//! Every path owns a ChaCha stream keyed by `(seed, path_index)`, and
//! estimates are reduced in path order, so results do not depend on how the
//! paths were distributed across workers.

mod exec;
mod path;

use serde::Serialize;

pub use exec::{default_workers, map_paths};
pub use path::{
    path_rng, record_observation_path, sample_theta, simulate_path_innovation, simulate_path_physical, PathResult,
    RecordedPath,
};

use crate::epsilon::{ramp, EpsilonPolicy};
use crate::error::{domain, QdoError, Result};
use crate::free_boundary::FreeBoundarySolution;
use crate::model::ProblemParams;

/// Observation control and alarm threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StrategySpec {
    NeverObserve { upper: f64 },
    /// Indicator control `1{π > A}`. Euler on the indicator is only an
    /// approximation of the optimally controlled posterior, which is sticky at `A`.
    SharpTwoThreshold { lower: f64, upper: f64 },
    EpsilonSmoothed { lower: f64, upper: f64, epsilon: f64 },
    AlwaysObserve { upper: f64 },
}

impl StrategySpec {
    pub fn validate(&self) -> Result<()> {
        let upper = self.upper();
        if !(upper > 0.0 && upper <= 1.0) {
            return Err(domain(format!("alarm threshold {upper} outside (0, 1]")));
        }
        match *self {
            Self::SharpTwoThreshold { lower, .. } | Self::EpsilonSmoothed { lower, .. } if !(lower >= 0.0 && lower < upper) => {
                Err(domain(format!("need 0 <= A < B, got A = {lower}, B = {upper}")))
            }
            Self::EpsilonSmoothed { lower, epsilon, .. } if !(epsilon > 0.0 && epsilon < upper - lower) => {
                Err(QdoError::EpsilonTooLarge { epsilon, max: upper - lower })
            }
            _ => Ok(()),
        }
    }

    pub fn from_policy(policy: &EpsilonPolicy) -> Self {
        Self::EpsilonSmoothed { lower: policy.lower(), upper: policy.upper(), epsilon: policy.epsilon() }
    }

    pub fn sharp(sol: &FreeBoundarySolution) -> Self {
        Self::SharpTwoThreshold { lower: sol.lower(), upper: sol.upper() }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Self::NeverObserve { upper }
            | Self::SharpTwoThreshold { upper, .. }
            | Self::EpsilonSmoothed { upper, .. }
            | Self::AlwaysObserve { upper } => upper,
        }
    }

    /// `h` as a function of the current posterior.
    #[inline]
    pub fn control(&self, pi: f64) -> f64 {
        match *self {
            Self::NeverObserve { .. } => 0.0,
            Self::SharpTwoThreshold { lower, .. } => {
                if pi > lower {
                    1.0
                } else {
                    0.0
                }
            }
            Self::EpsilonSmoothed { lower, epsilon, .. } => ramp(pi, lower, epsilon),
            Self::AlwaysObserve { .. } => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::NeverObserve { .. } => "NeverObserve",
            Self::SharpTwoThreshold { .. } => "SharpTwoThreshold",
            Self::EpsilonSmoothed { .. } => "EpsilonSmoothed",
            Self::AlwaysObserve { .. } => "AlwaysObserve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Physical,
    Innovation,
}

impl std::str::FromStr for Mode {
    type Err = QdoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "physical" => Ok(Self::Physical),
            "innovation" => Ok(Self::Innovation),
            _ => Err(domain(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub pi0: f64,
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub mode: Mode,
    pub allow_censoring: bool,
    /// `None` uses the available cores.
    pub workers: Option<usize>,
    /// Physical mode: start the controller's filter here while `θ` is drawn
    /// with `pi0`. The strategy then no longer depends on `pi0`, and the mean
    /// raw cost is affine in `pi0`.
    pub controller_prior: Option<f64>,
}

impl SimConfig {
    /// `dt = 10⁻³`, `t_max = 50/λ`, physical mode.
    pub fn new(p: &ProblemParams, pi0: f64, n_paths: u64, seed: u64) -> Self {
        Self {
            pi0,
            dt: 1e-3,
            t_max: 50.0 / p.lambda(),
            n_paths,
            seed,
            mode: Mode::Physical,
            allow_censoring: false,
            workers: None,
            controller_prior: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(domain(format!("pi0 = {} outside [0, 1]", self.pi0)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QdoError::NonPositiveParameter { name: "dt", value: self.dt });
        }
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return Err(domain(format!("need dt <= t_max, got dt = {}, t_max = {}", self.dt, self.t_max)));
        }
        if self.n_paths == 0 {
            return Err(domain("n_paths must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(domain("workers must be at least 1"));
        }
        match self.controller_prior {
            Some(c) if !(0.0..=1.0).contains(&c) => Err(domain(format!("controller prior {c} outside [0, 1]"))),
            Some(_) if self.mode == Mode::Innovation => Err(domain("controller prior needs physical mode")),
            _ => Ok(()),
        }
    }

    pub(crate) fn max_steps(&self) -> u64 {
        (self.t_max / self.dt - 1e-9).ceil() as u64
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// `sd/√n`; reported as 0 with `stderr_defined = false` when `n = 1`.
    pub stderr: f64,
    pub stderr_defined: bool,
    pub n: u64,
    pub n_censored: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], n_censored: u64, seed: u64) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let (stderr, stderr_defined) = if n > 1 {
            let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
            ((ss / (n - 1) as f64 / n as f64).sqrt(), true)
        } else {
            (0.0, false)
        };
        Self { mean, stderr, stderr_defined, n: n as u64, n_censored, seed }
    }

    /// `|self - other| <= k · √(se₁² + se₂²) + slack`
    pub fn agrees_with(&self, other: &McEstimate, k: f64, slack: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr) + slack
    }

    /// `|self - value| <= k · se + slack`
    pub fn agrees_with_value(&self, value: f64, k: f64, slack: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + slack
    }
}

/// Every estimate from one batch of paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub cost_stat: McEstimate,
    pub cost_raw: Option<McEstimate>,
    pub tau: McEstimate,
    pub observe_time: McEstimate,
    pub steps: u64,
    pub clamp_events: u64,
}

fn prepare(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig) -> Result<()> {
    let _ = p;
    strategy.validate()?;
    cfg.validate()
}

/// All paths of the batch, in path-index order; the first failing path decides the error.
pub fn simulate_paths(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig) -> Result<Vec<PathResult>> {
    prepare(p, strategy, cfg)?;
    let mode = cfg.mode;
    map_paths(cfg.n_paths, cfg.workers, |i| path::simulate(p, strategy, cfg, mode, i)).into_iter().collect()
}

pub fn mc_summary(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig) -> Result<McSummary> {
    let paths = simulate_paths(p, strategy, cfg)?;
    Ok(summarize(&paths, cfg.seed))
}

pub fn summarize(paths: &[PathResult], seed: u64) -> McSummary {
    let censored = paths.iter().filter(|r| r.censored).count() as u64;
    let collect = |f: &dyn Fn(&PathResult) -> f64| paths.iter().map(f).collect::<Vec<_>>();
    let est = |v: Vec<f64>| McEstimate::from_samples(&v, censored, seed);
    let cost_raw = if paths.iter().all(|r| r.cost_raw.is_some()) {
        Some(est(paths.iter().filter_map(|r| r.cost_raw).collect()))
    } else {
        None
    };
    McSummary {
        cost_stat: est(collect(&|r| r.cost_stat)),
        cost_raw,
        tau: est(collect(&|r| r.tau)),
        observe_time: est(collect(&|r| r.observe_time)),
        steps: paths.iter().map(|r| r.steps).sum(),
        clamp_events: paths.iter().map(|r| r.clamp_events).sum(),
    }
}

/// Mean of the sufficient-statistic cost.
pub fn mc_cost(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig) -> Result<McEstimate> {
    Ok(mc_summary(p, strategy, cfg)?.cost_stat)
}

/// Mean time to the alarm.
pub fn mc_hitting_time(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig) -> Result<McEstimate> {
    Ok(mc_summary(p, strategy, cfg)?.tau)
}

/// Alarm time and cost of never observing and stopping at `upper`, from `pi0`.
pub fn never_observe_cost(p: &ProblemParams, upper: f64, pi0: f64) -> (f64, f64) {
    if pi0 >= upper {
        return (0.0, 1.0 - pi0);
    }
    let (lam, a) = (p.lambda(), p.a());
    let tau = ((1.0 - pi0) / (1.0 - upper)).ln() / lam;
    let cost = (1.0 - upper) + a * (tau - (1.0 - pi0) * (-(-lam * tau).exp_m1()) / lam);
    (tau, cost)
}

/// [`never_observe_cost`] at the threshold `λ/(a+λ)`.
pub fn never_observe_closed_form(p: &ProblemParams, pi0: f64) -> (f64, f64) {
    never_observe_cost(p, p.myopic_threshold(), pi0)
}
