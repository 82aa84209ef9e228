use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::{Mode, SimConfig, StrategySpec};
use crate::error::{domain, QdoError, Result};
use crate::filter::ObservationPath;
use crate::model::ProblemParams;

/// Outcome of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PathResult {
    pub tau: f64,
    /// Disorder time; physical mode only.
    pub theta: Option<f64>,
    pub pi_at_tau: f64,
    /// `(1 - π_τ) + a ∫π dt + b ∫h dt`
    pub cost_stat: f64,
    /// `1{τ<θ} + a (τ-θ)⁺ + b ∫h dt`; physical mode only.
    pub cost_raw: Option<f64>,
    pub observe_time: f64,
    pub censored: bool,
    pub steps: u64,
    pub clamp_events: u64,
}

/// Independent stream for `(seed, path_index)`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// `θ = 0` with probability `π₀`, otherwise exponential with rate `λ`.
pub fn sample_theta<R: Rng + ?Sized>(pi0: f64, lambda: f64, rng: &mut R) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(domain(format!("pi0 = {pi0} outside [0, 1]")));
    }
    let exp = Exp::new(lambda).map_err(|_| QdoError::NonPositiveParameter { name: "lambda", value: lambda })?;
    let u: f64 = rng.random();
    Ok(if u < pi0 { 0.0 } else { exp.sample(rng) })
}

pub fn simulate_path_physical(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig, path_index: u64) -> Result<PathResult> {
    simulate(p, strategy, cfg, Mode::Physical, path_index)
}

pub fn simulate_path_innovation(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig, path_index: u64) -> Result<PathResult> {
    simulate(p, strategy, cfg, Mode::Innovation, path_index)
}

pub(crate) fn simulate(p: &ProblemParams, strategy: &StrategySpec, cfg: &SimConfig, mode: Mode, path_index: u64) -> Result<PathResult> {
    let (lam, a, b, r, sigma) = (p.lambda(), p.a(), p.b(), p.r(), p.sigma());
    let dt = cfg.dt;
    let sdt = dt.sqrt();
    let decay = (-lam * dt).exp();
    let rho = r / sigma;
    let r_s2 = r / (sigma * sigma);
    let upper = strategy.upper();

    let mut rng = path_rng(cfg.seed, path_index);
    let theta = match mode {
        Mode::Physical => Some(sample_theta(cfg.pi0, lam, &mut rng)?),
        Mode::Innovation => None,
    };
    let mut pi = match mode {
        Mode::Physical => cfg.controller_prior.unwrap_or(cfg.pi0),
        Mode::Innovation => cfg.pi0,
    };
    let max_steps = cfg.max_steps();
    let (mut step, mut int_pi, mut int_h, mut clamps) = (0u64, 0.0, 0.0, 0u64);

    while pi < upper && step < max_steps {
        let t = step as f64 * dt;
        let h = strategy.control(pi);
        int_pi += pi * dt;
        int_h += h * dt;
        if h == 0.0 {
            // nothing observed: exact flow of dπ = λ(1-π) dt
            pi = 1.0 - (1.0 - pi) * decay;
        } else {
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = sdt * z;
            let q = pi * (1.0 - pi);
            let sh = h.sqrt();
            let next = match mode {
                Mode::Physical => {
                    let signal = if theta.is_some_and(|th| th <= t) { 1.0 } else { 0.0 };
                    let dx = r * h * signal * dt + sigma * sh * dw;
                    pi + lam * (1.0 - pi) * dt + r_s2 * q * dx - r * r_s2 * pi * q * h * dt
                }
                Mode::Innovation => pi + lam * (1.0 - pi) * dt + rho * q * sh * dw,
            };
            if !(0.0..=1.0).contains(&next) {
                clamps += 1;
            }
            pi = next.clamp(0.0, 1.0);
        }
        step += 1;
    }

    let censored = pi < upper;
    let tau = if censored { cfg.t_max } else { step as f64 * dt };
    if censored && !cfg.allow_censoring {
        return Err(QdoError::CensoredPath { path_index, t_max: cfg.t_max });
    }
    let cost_raw = theta.map(|th| {
        let false_alarm = if tau < th { 1.0 } else { 0.0 };
        false_alarm + a * (tau - th).max(0.0) + b * int_h
    });
    Ok(PathResult {
        tau,
        theta,
        pi_at_tau: pi,
        cost_stat: (1.0 - pi) + a * int_pi + b * int_h,
        cost_raw,
        observe_time: int_h,
        censored,
        steps: step,
        clamp_events: clamps,
    })
}

/// A physical-mode path recorded on a fixed horizon for the filter.
#[derive(Debug, Clone)]
pub struct RecordedPath {
    pub path: ObservationPath,
    pub theta: f64,
    /// The controller's own Euler posterior, which chose `h`.
    pub controller: Vec<f64>,
}

/// Simulates `X` on `[0, horizon]` under the strategy's control without stopping.
pub fn record_observation_path(
    p: &ProblemParams,
    strategy: &StrategySpec,
    pi0: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    path_index: u64,
) -> Result<RecordedPath> {
    if !(dt > 0.0 && horizon >= dt) {
        return Err(domain("need 0 < dt <= horizon"));
    }
    let (lam, r, sigma) = (p.lambda(), p.r(), p.sigma());
    let s2 = sigma * sigma;
    let steps = (horizon / dt).round() as usize;
    let sdt = dt.sqrt();
    let mut rng = path_rng(seed, path_index);
    let theta = sample_theta(pi0, lam, &mut rng)?;

    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut hs = Vec::with_capacity(steps + 1);
    let mut controller = Vec::with_capacity(steps + 1);
    let (mut x, mut pi) = (0.0, pi0);
    for i in 0..=steps {
        let t = i as f64 * dt;
        let h = strategy.control(pi);
        times.push(t);
        xs.push(x);
        hs.push(h);
        controller.push(pi);
        if i == steps {
            break;
        }
        let dx = if h == 0.0 {
            0.0
        } else {
            let z: f64 = StandardNormal.sample(&mut rng);
            let signal = if theta <= t { 1.0 } else { 0.0 };
            r * h * signal * dt + sigma * h.sqrt() * sdt * z
        };
        let q = pi * (1.0 - pi);
        pi = (pi + lam * (1.0 - pi) * dt + r / s2 * q * dx - r * r / s2 * pi * q * h * dt).clamp(0.0, 1.0);
        x += dx;
    }
    Ok(RecordedPath { path: ObservationPath::new(times, xs, hs, sigma)?, theta, controller })
}
