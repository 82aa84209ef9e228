//! Run configuration: defaults, then the `key = value` file, then flags, then
//! `QDO_SEED`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use super::CliError;
use crate::free_boundary::{SolverConfig, DEFAULT_QUAD_TOL, DEFAULT_ROOT_TOL};
use crate::model::ProblemParams;
use crate::simulator::Mode;

/// Every configurable key; flags are the keys with a leading `--`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file of `key = value` lines
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pi0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long = "t_max", alias = "t-max", global = true, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    #[arg(long = "n_paths", alias = "n-paths", global = true)]
    pub n_paths: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "grid_n", alias = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// physical | innovation
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long = "allow_censoring", alias = "allow-censoring", global = true)]
    pub allow_censoring: Option<bool>,
    /// auto | never | sharp | epsilon | always
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    #[arg(long = "quad_tol", alias = "quad-tol", global = true, allow_hyphen_values = true)]
    pub quad_tol: Option<f64>,
    #[arg(long = "root_tol", alias = "root-tol", global = true, allow_hyphen_values = true)]
    pub root_tol: Option<f64>,
    /// Filter horizon
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    /// Observation path CSV (t,X,h) for filter-demo
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::config(format!("invalid value `{value}` for `{key}`")))
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut o = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "lambda" => o.lambda = Some(parse(key, value)?),
                "a" => o.a = Some(parse(key, value)?),
                "b" => o.b = Some(parse(key, value)?),
                "r" => o.r = Some(parse(key, value)?),
                "sigma" => o.sigma = Some(parse(key, value)?),
                "pi0" => o.pi0 = Some(parse(key, value)?),
                "epsilon" => o.epsilon = Some(parse(key, value)?),
                "dt" => o.dt = Some(parse(key, value)?),
                "t_max" => o.t_max = Some(parse(key, value)?),
                "n_paths" => o.n_paths = Some(parse(key, value)?),
                "seed" => o.seed = Some(parse(key, value)?),
                "grid_n" => o.grid_n = Some(parse(key, value)?),
                "output" => o.output = Some(value.into()),
                "workers" => o.workers = Some(parse(key, value)?),
                "mode" => o.mode = Some(value.to_string()),
                "allow_censoring" => o.allow_censoring = Some(parse(key, value)?),
                "strategy" => o.strategy = Some(value.to_string()),
                "quad_tol" => o.quad_tol = Some(parse(key, value)?),
                "root_tol" => o.root_tol = Some(parse(key, value)?),
                "horizon" => o.horizon = Some(parse(key, value)?),
                "input" => o.input = Some(value.into()),
                _ => return Err(CliError::config(format!("line {}: unknown key `{key}`", n + 1))),
            }
        }
        Ok(o)
    }

    /// Values set here win over `base`.
    pub fn over(self, base: Self) -> Self {
        Self {
            config: self.config.or(base.config),
            lambda: self.lambda.or(base.lambda),
            a: self.a.or(base.a),
            b: self.b.or(base.b),
            r: self.r.or(base.r),
            sigma: self.sigma.or(base.sigma),
            pi0: self.pi0.or(base.pi0),
            epsilon: self.epsilon.or(base.epsilon),
            dt: self.dt.or(base.dt),
            t_max: self.t_max.or(base.t_max),
            n_paths: self.n_paths.or(base.n_paths),
            seed: self.seed.or(base.seed),
            grid_n: self.grid_n.or(base.grid_n),
            output: self.output.or(base.output),
            workers: self.workers.or(base.workers),
            mode: self.mode.or(base.mode),
            allow_censoring: self.allow_censoring.or(base.allow_censoring),
            strategy: self.strategy.or(base.strategy),
            quad_tol: self.quad_tol.or(base.quad_tol),
            root_tol: self.root_tol.or(base.root_tol),
            horizon: self.horizon.or(base.horizon),
            input: self.input.or(base.input),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyChoice {
    Auto,
    Never,
    Sharp,
    Epsilon,
    Always,
}

impl std::str::FromStr for StrategyChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "auto" => Ok(Self::Auto),
            "never" => Ok(Self::Never),
            "sharp" => Ok(Self::Sharp),
            "epsilon" => Ok(Self::Epsilon),
            "always" => Ok(Self::Always),
            _ => Err(CliError::config(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Fully resolved configuration, echoed in every JSON payload.
///
/// `workers` is left out of the payload: it never changes the results.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub sigma: f64,
    pub pi0: f64,
    pub epsilon: Option<f64>,
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: Option<u64>,
    pub seed: u64,
    pub grid_n: usize,
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
    pub mode: Mode,
    pub allow_censoring: bool,
    pub strategy: StrategyChoice,
    pub quad_tol: f64,
    pub root_tol: f64,
    pub horizon: f64,
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub params: ProblemParams,
}

impl RunConfig {
    /// Defaults < file < flags < `QDO_SEED`.
    pub fn resolve(flags: Overrides, env_seed: Option<&str>) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => Overrides::from_file(path)?,
            None => Overrides::default(),
        };
        let o = flags.over(file);
        let lambda = o.lambda.unwrap_or(1.0);
        let params = ProblemParams::new(lambda, o.a.unwrap_or(1.0), o.b.unwrap_or(0.05), o.r.unwrap_or(1.0), o.sigma.unwrap_or(1.0))
            .map_err(CliError::from)?;
        let seed = match env_seed {
            Some(s) => parse::<u64>("QDO_SEED", s.trim())?,
            None => o.seed.unwrap_or(0),
        };
        let mode = match &o.mode {
            Some(m) => m.parse::<Mode>().map_err(CliError::from)?,
            None => Mode::Physical,
        };
        let strategy = match &o.strategy {
            Some(s) => s.parse()?,
            None => StrategyChoice::Auto,
        };
        let cfg = Self {
            lambda,
            a: params.a(),
            b: params.b(),
            r: params.r(),
            sigma: params.sigma(),
            pi0: o.pi0.unwrap_or(0.2),
            epsilon: o.epsilon,
            dt: o.dt.unwrap_or(1e-3),
            t_max: o.t_max.unwrap_or(50.0 / lambda),
            n_paths: o.n_paths,
            seed,
            grid_n: o.grid_n.unwrap_or(100),
            output: o.output,
            workers: o.workers,
            mode,
            allow_censoring: o.allow_censoring.unwrap_or(false),
            strategy,
            quad_tol: o.quad_tol.unwrap_or(DEFAULT_QUAD_TOL),
            root_tol: o.root_tol.unwrap_or(DEFAULT_ROOT_TOL),
            horizon: o.horizon.unwrap_or(5.0 / lambda),
            input: o.input,
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::config(m));
        if !(0.0..=1.0).contains(&self.pi0) {
            return bad(format!("pi0 = {} outside [0, 1]", self.pi0));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_max >= self.dt && self.t_max.is_finite()) {
            return bad(format!("need 0 < dt <= t_max, got dt = {}, t_max = {}", self.dt, self.t_max));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return bad(format!("need dt <= horizon, got {}", self.horizon));
        }
        if self.n_paths == Some(0) || self.grid_n == 0 || self.workers == Some(0) {
            return bad("n_paths, grid_n and workers must be at least 1".into());
        }
        if !(self.quad_tol > 0.0 && self.root_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig { quad_tol: self.quad_tol, root_tol: self.root_tol }
    }
}
