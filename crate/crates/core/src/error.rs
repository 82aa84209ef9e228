use thiserror::Error;

/// Errors raised by the solver, the strategy constructions and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QdoError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("observation cost b must be nonnegative, got {0}")]
    NegativeCost(f64),
    #[error("parameter `{name}` is not finite")]
    NonFinite { name: &'static str },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operation not available in the {0} regime")]
    Regime(&'static str),
    #[error("quadrature did not reach tolerance on [{lo}, {hi}]")]
    QuadratureFailure { lo: f64, hi: f64 },
    #[error("no sign change of f2 + 1 on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("epsilon = {epsilon} must lie in (0, {max})")]
    EpsilonTooLarge { epsilon: f64, max: f64 },
    #[error("path {path_index} did not stop before t_max = {t_max}")]
    CensoredPath { path_index: u64, t_max: f64 },
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, QdoError>;

pub(crate) fn domain(msg: impl Into<String>) -> QdoError {
    QdoError::Domain(msg.into())
}
