use std::io::Write;

use serde::Serialize;

use super::config::{RunConfig, StrategyChoice};
use super::format::{fmt12, payload};
use super::CliError;
use crate::epsilon::EpsilonPolicy;
use crate::filter::{posterior_euler, posterior_exact, unobserved_posterior, ObservationPath};
use crate::free_boundary::FreeBoundarySolution;
use crate::model::Regime;
use crate::simulator::{self, mc_summary, never_observe_cost, McSummary, SimConfig, StrategySpec};

const DEFAULT_EPSILON: f64 = 0.02;
pub(super) const DEFAULT_PATHS: u64 = 20_000;

type CmdResult = Result<i32, CliError>;

fn emit(cfg: &RunConfig, out: &mut dyn Write, text: &str, to_stdout: bool) -> Result<(), CliError> {
    if let Some(path) = &cfg.output {
        std::fs::write(path, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    if to_stdout {
        out.write_all(text.as_bytes()).map_err(|e| CliError::numeric(e.to_string()))?;
    }
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<FreeBoundarySolution, CliError> {
    Ok(FreeBoundarySolution::solve_with(&cfg.params, cfg.solver())?)
}

fn sim_config(cfg: &RunConfig, default_paths: u64) -> SimConfig {
    SimConfig {
        pi0: cfg.pi0,
        dt: cfg.dt,
        t_max: cfg.t_max,
        n_paths: cfg.n_paths.unwrap_or(default_paths),
        seed: cfg.seed,
        mode: cfg.mode,
        allow_censoring: cfg.allow_censoring,
        workers: cfg.workers,
        controller_prior: None,
    }
}

fn policy(cfg: &RunConfig, sol: &FreeBoundarySolution) -> Result<EpsilonPolicy, CliError> {
    Ok(EpsilonPolicy::new(sol, cfg.epsilon.unwrap_or(DEFAULT_EPSILON))?)
}

fn strategy(cfg: &RunConfig, sol: &FreeBoundarySolution) -> Result<(StrategySpec, Option<EpsilonPolicy>), CliError> {
    let choice = match cfg.strategy {
        StrategyChoice::Auto => match sol.regime() {
            Regime::NeverObserve => StrategyChoice::Never,
            Regime::ZeroCost => StrategyChoice::Always,
            Regime::TwoThreshold if cfg.epsilon.is_some() => StrategyChoice::Epsilon,
            Regime::TwoThreshold => StrategyChoice::Sharp,
        },
        other => other,
    };
    let upper = sol.upper();
    Ok(match choice {
        StrategyChoice::Never => (StrategySpec::NeverObserve { upper }, None),
        StrategyChoice::Always => (StrategySpec::AlwaysObserve { upper }, None),
        StrategyChoice::Sharp => (StrategySpec::sharp(sol), None),
        _ => {
            let pol = policy(cfg, sol)?;
            (StrategySpec::from_policy(&pol), Some(pol))
        }
    })
}

#[derive(Serialize)]
struct SolveReport {
    regime: Regime,
    lower: f64,
    upper: f64,
    k1: Option<f64>,
    k2: Option<f64>,
    b_crit: f64,
    rho: f64,
    alpha: f64,
    candidate_verified: bool,
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let sol = solve(cfg)?;
    let d = sol.derived();
    let report = SolveReport {
        regime: sol.regime(),
        lower: sol.lower(),
        upper: sol.upper(),
        k1: sol.k1(),
        k2: sol.k2(),
        b_crit: d.b_crit,
        rho: d.rho,
        alpha: d.alpha,
        candidate_verified: sol.verify_candidate(1000).pass(),
    };
    let opt = |v: Option<f64>| v.map_or("-".to_string(), fmt12);
    let text = format!(
        "regime    {}\nA         {}\nB         {}\nK1        {}\nK2        {}\nb_crit    {}\nverified  {}\n",
        report.regime,
        fmt12(report.lower),
        fmt12(report.upper),
        opt(report.k1),
        opt(report.k2),
        fmt12(report.b_crit),
        report.candidate_verified,
    );
    out.write_all(text.as_bytes()).map_err(|e| CliError::numeric(e.to_string()))?;
    if cfg.output.is_some() {
        emit(cfg, out, &payload("solve", cfg, &report), false)?;
    }
    Ok(if report.candidate_verified { 0 } else { 3 })
}

pub fn cmd_table(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let sol = solve(cfg)?;
    let pol = match cfg.epsilon {
        Some(_) => Some(policy(cfg, &sol)?),
        None => None,
    };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x", "g", "dg", "d2g", "piece", "L1", "L2"];
    if pol.is_some() {
        header.extend(["g_eps", "gamma_eps"]);
    }
    let csv_err = |e: csv::Error| CliError::numeric(e.to_string());
    wtr.write_record(&header).map_err(csv_err)?;
    for i in 0..=cfg.grid_n {
        let x = i as f64 / cfg.grid_n as f64;
        let mut row = vec![
            fmt12(x),
            fmt12(sol.value(x)?),
            fmt12(sol.dg(x)?),
            fmt12(sol.d2g(x)?),
            sol.piece(x).name().to_string(),
            fmt12(sol.l1(x)?),
            fmt12(sol.l2(x)?),
        ];
        if let Some(pol) = &pol {
            row.push(fmt12(pol.g_eps(x)?));
            row.push(fmt12(pol.gamma_eps(x)?));
        }
        wtr.write_record(&row).map_err(csv_err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| CliError::numeric(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::numeric(e.to_string()))?;
    emit(cfg, out, &text, cfg.output.is_none())?;
    Ok(0)
}

#[derive(Serialize)]
struct Analytic {
    g: f64,
    g_eps: Option<f64>,
    gamma_eps: Option<f64>,
    never_observe_tau: Option<f64>,
    never_observe_cost: Option<f64>,
}

fn analytic(sol: &FreeBoundarySolution, pol: Option<&EpsilonPolicy>, s: &StrategySpec, pi0: f64) -> Result<Analytic, CliError> {
    let no = match s {
        StrategySpec::NeverObserve { upper } => Some(never_observe_cost(sol.params(), *upper, pi0)),
        _ => None,
    };
    Ok(Analytic {
        g: sol.value(pi0)?,
        g_eps: pol.map(|p| p.g_eps(pi0)).transpose()?,
        gamma_eps: pol.map(|p| p.gamma_eps(pi0)).transpose()?,
        never_observe_tau: no.map(|v| v.0),
        never_observe_cost: no.map(|v| v.1),
    })
}

#[derive(Serialize)]
struct SimulateReport {
    regime: Regime,
    strategy: StrategySpec,
    /// Euler on the indicator control does not reproduce the sticky optimal posterior.
    approximation: bool,
    summary: McSummary,
    clamp_fraction: f64,
    analytic: Analytic,
}

pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let sol = solve(cfg)?;
    let (s, pol) = strategy(cfg, &sol)?;
    let sc = sim_config(cfg, DEFAULT_PATHS);
    let summary = mc_summary(&cfg.params, &s, &sc)?;
    let report = SimulateReport {
        regime: sol.regime(),
        strategy: s,
        approximation: matches!(s, StrategySpec::SharpTwoThreshold { .. }),
        clamp_fraction: clamp_fraction(&summary),
        analytic: analytic(&sol, pol.as_ref(), &s, cfg.pi0)?,
        summary,
    };
    emit(cfg, out, &payload("simulate", cfg, &report), true)?;
    Ok(0)
}

fn clamp_fraction(s: &McSummary) -> f64 {
    if s.steps == 0 {
        0.0
    } else {
        s.clamp_events as f64 / s.steps as f64
    }
}

#[derive(Serialize)]
struct Comparison {
    name: &'static str,
    estimate: f64,
    reference: f64,
    tolerance: f64,
    pass: bool,
}

impl Comparison {
    fn new(name: &'static str, estimate: f64, reference: f64, tolerance: f64) -> Self {
        Self { name, estimate, reference, tolerance, pass: (estimate - reference).abs() <= tolerance }
    }
}

#[derive(Serialize)]
struct ValidateReport {
    regime: Regime,
    strategy: StrategySpec,
    g: f64,
    g_eps: Option<f64>,
    mc_mean: f64,
    mc_stderr: f64,
    comparisons: Vec<Comparison>,
    pass: bool,
}

/// Monte Carlo against the analytic cost of the regime's reference strategy.
pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let sol = solve(cfg)?;
    let p = &cfg.params;
    let pi0 = cfg.pi0;
    let g = sol.value(pi0)?;
    let mut sc = sim_config(cfg, DEFAULT_PATHS);
    let mut comparisons = Vec::new();
    let (s, g_eps) = match sol.regime() {
        Regime::TwoThreshold => {
            let pol = policy(cfg, &sol)?;
            let ge = pol.g_eps(pi0)?;
            comparisons.push(Comparison {
                name: "g_eps >= g",
                estimate: ge,
                reference: g,
                tolerance: 1e-8,
                pass: ge >= g - 1e-8,
            });
            (StrategySpec::from_policy(&pol), Some(ge))
        }
        Regime::NeverObserve => {
            let s = StrategySpec::NeverObserve { upper: sol.upper() };
            let (_, cost) = never_observe_cost(p, sol.upper(), pi0);
            comparisons.push(Comparison::new("closed form = g", cost, g, 1e-10));
            (s, None)
        }
        Regime::ZeroCost => (StrategySpec::AlwaysObserve { upper: sol.upper() }, None),
    };
    sc.mode = simulator::Mode::Physical;
    let sum = mc_summary(p, &s, &sc)?;
    let est = sum.cost_stat;
    let (target, slack) = match sol.regime() {
        Regime::TwoThreshold => (g_eps.unwrap_or(g), 0.01),
        Regime::NeverObserve => (g, sc.dt),
        Regime::ZeroCost => (g, 0.01),
    };
    comparisons.push(Comparison::new("mc cost_stat vs analytic", est.mean, target, 3.0 * est.stderr + slack));
    if let Some(raw) = sum.cost_raw {
        comparisons.push(Comparison::new("mc cost_raw vs cost_stat", raw.mean, est.mean, 3.0 * raw.stderr.hypot(est.stderr)));
    }
    comparisons.push(Comparison::new("clamp fraction", clamp_fraction(&sum), 0.0, 1e-3));
    let pass = comparisons.iter().all(|c| c.pass);
    let report = ValidateReport {
        regime: sol.regime(),
        strategy: s,
        g,
        g_eps,
        mc_mean: est.mean,
        mc_stderr: est.stderr,
        comparisons,
        pass,
    };
    emit(cfg, out, &payload("validate", cfg, &report), true)?;
    Ok(if pass { 0 } else { 3 })
}

#[derive(Serialize)]
struct HitReport {
    regime: Regime,
    strategy: StrategySpec,
    mc: simulator::McEstimate,
    analytic: Option<f64>,
    comparison: Option<Comparison>,
}

/// Expected time to the alarm: Monte Carlo and, where available, the exact value.
pub fn cmd_hittime(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let sol = solve(cfg)?;
    let (s, exact) = match sol.regime() {
        Regime::TwoThreshold => {
            let pol = policy(cfg, &sol)?;
            let g = if cfg.pi0 <= sol.upper() { Some(pol.gamma_eps(cfg.pi0)?) } else { Some(0.0) };
            (StrategySpec::from_policy(&pol), g)
        }
        Regime::NeverObserve => {
            let s = StrategySpec::NeverObserve { upper: sol.upper() };
            (s, Some(never_observe_cost(&cfg.params, sol.upper(), cfg.pi0).0))
        }
        Regime::ZeroCost => (StrategySpec::AlwaysObserve { upper: sol.upper() }, None),
    };
    let sc = sim_config(cfg, DEFAULT_PATHS);
    let mc = mc_summary(&cfg.params, &s, &sc)?.tau;
    let slack = if sol.regime() == Regime::NeverObserve { sc.dt } else { 0.01 };
    let comparison = exact.map(|e| Comparison::new("mc tau vs analytic", mc.mean, e, 3.0 * mc.stderr + slack));
    let pass = comparison.as_ref().is_none_or(|c| c.pass);
    let report = HitReport { regime: sol.regime(), strategy: s, mc, analytic: exact, comparison };
    emit(cfg, out, &payload("hittime", cfg, &report), true)?;
    Ok(if pass { 0 } else { 3 })
}

#[derive(Serialize)]
struct FilterReport {
    source: &'static str,
    strategy: Option<StrategySpec>,
    paths: usize,
    steps_per_path: usize,
    max_exact_vs_euler: f64,
    /// Every path has `h ≡ 0`: the exact filter is compared with the closed form.
    unobserved: bool,
    max_exact_vs_closed_form: Option<f64>,
    final_exact: f64,
    final_euler: f64,
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact and Euler posteriors on simulated or supplied observation paths.
pub fn cmd_filter_demo(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let p = &cfg.params;
    let (paths, strategy, source) = match &cfg.input {
        Some(file) => {
            let f = std::fs::File::open(file).map_err(|e| CliError::config(format!("cannot open {}: {e}", file.display())))?;
            (vec![ObservationPath::read_csv(f, p.sigma())?], None, "csv")
        }
        None => {
            let sol = solve(cfg)?;
            let (s, _) = strategy(cfg, &sol)?;
            let n = cfg.n_paths.unwrap_or(1);
            let recorded = simulator::map_paths(n, cfg.workers, |i| {
                simulator::record_observation_path(p, &s, cfg.pi0, cfg.dt, cfg.horizon, cfg.seed, i).map(|r| r.path)
            });
            (recorded.into_iter().collect::<crate::Result<Vec<_>>>()?, Some(s), "simulated")
        }
    };
    let mut worst = 0.0f64;
    let mut worst_closed: Option<f64> = None;
    let unobserved = paths.iter().all(|path| path.h().iter().all(|&h| h == 0.0));
    let mut last = (f64::NAN, f64::NAN);
    for path in &paths {
        let exact = posterior_exact(path, p, cfg.pi0)?;
        let euler = posterior_euler(path, p, cfg.pi0)?;
        worst = worst.max(max_gap(&exact, &euler));
        if unobserved {
            let closed: Vec<f64> = path.times().iter().map(|&t| unobserved_posterior(p.lambda(), cfg.pi0, t)).collect();
            worst_closed = Some(worst_closed.unwrap_or(0.0).max(max_gap(&exact, &closed)));
        }
        last = (*exact.last().unwrap_or(&f64::NAN), *euler.last().unwrap_or(&f64::NAN));
    }
    let report = FilterReport {
        source,
        strategy,
        paths: paths.len(),
        steps_per_path: paths.first().map_or(0, |p| p.len().saturating_sub(1)),
        max_exact_vs_euler: worst,
        unobserved,
        max_exact_vs_closed_form: worst_closed,
        final_exact: last.0,
        final_euler: last.1,
    };
    emit(cfg, out, &payload("filter-demo", cfg, &report), true)?;
    Ok(0)
}
