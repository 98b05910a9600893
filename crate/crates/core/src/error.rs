use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("invalid lottery: {0}")]
    InvalidLottery(String),
    #[error("lottery is not Bayes plausible: barycenter deviates from prior by {gap:e}")]
    NotBayesPlausible { gap: f64 },
    #[error("uncertainty measure is not concave near belief {at} (violation {violation:e})")]
    NotConcave { at: f64, violation: f64 },
    #[error("invalid discount function: {0}")]
    InvalidDiscount(String),
    #[error(
        "discount is not convex decreasing: recursion residual {residual:e} at period {period}"
    )]
    NotConvexDiscount { period: usize, residual: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("distribution is improper: terminal cdf {terminal_cdf}")]
    ImproperDistribution { terminal_cdf: f64 },
    #[error("discount tail not negligible: missing mass {missing_mass:e} weighted by discount {discount_at_horizon:e}")]
    DivergentTail {
        missing_mass: f64,
        discount_at_horizon: f64,
    },
    #[error("enumeration budget exceeded: {needed} evaluations > {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        trace: Vec<f64>,
    },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
