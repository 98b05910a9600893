//! Scenario files: JSON descriptions of a learning problem.
//!
//! Every field is optional; omitted fields fall back to the worked binary
//! example (prior 1/2, quadratic uncertainty, full revelation,
//! guess-the-state payoff, capacity 1, exponential discount at rate 1).
//! The schema is documented in `docs/scenario.md`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use seqinfo::discount::TabulatedDiscount;
use seqinfo::measure::{full_info_value, info_cost, Atom, TabulatedMeasure};
use seqinfo::{Belief, DecisionUtility, DiscountFunction, PosteriorLottery, UncertaintyMeasure};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "defaults::states")]
    pub states: usize,
    /// Uniform when omitted.
    #[serde(default)]
    pub prior: Option<BeliefSpec>,
    #[serde(default)]
    pub uncertainty: MeasureSpec,
    /// Full revelation when omitted.
    #[serde(default)]
    pub target: Option<Vec<AtomSpec>>,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default = "defaults::capacity")]
    pub capacity: f64,
    #[serde(default)]
    pub discount: DiscountSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub mc: McSpec,
}

/// A binary scalar (probability of the second state) or a full weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BeliefSpec {
    Scalar(f64),
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub posterior: BeliefSpec,
    pub prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    #[default]
    Quadratic,
    Shannon,
    /// Binary only: `H` interpolated on `grid` over `[0, 1]`.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    #[default]
    GuessState,
    /// `table[action][state]`.
    Payoffs { table: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountSpec {
    Exponential {
        rate: f64,
    },
    Hyperbolic {
        k: f64,
    },
    TruncatedLinear {
        horizon: f64,
    },
    Constant,
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// Discrete discount `rho_1, rho_2, ...`; zero after the last entry.
    Periods {
        values: Vec<f64>,
    },
}

impl Default for DiscountSpec {
    fn default() -> Self {
        Self::Exponential { rate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Periods of the discrete program.
    #[serde(default = "defaults::periods")]
    pub periods: usize,
    #[serde(default = "defaults::info_points")]
    pub info_points: usize,
    /// Stop-probability grid of the brute-force oracle.
    #[serde(default)]
    pub oracle_stop: Option<Vec<f64>>,
    /// Information grid of the brute-force oracle.
    #[serde(default)]
    pub oracle_info: Option<Vec<f64>>,
    #[serde(default = "defaults::budget")]
    pub budget: u64,
    /// Tolerance of the convex-decomposition check.
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    /// Points of strategy time grids.
    #[serde(default = "defaults::time_points")]
    pub time_points: usize,
    /// Binary priors for the target comparative-static sweep.
    #[serde(default)]
    pub prior_sweep: Option<Vec<f64>>,
    /// Iteration cap of the target fixed point.
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    /// Value change at which the target fixed point stops.
    #[serde(default = "defaults::solver_tol")]
    pub solver_tol: f64,
    /// Exponential discount rates for the patience sweep of `target`.
    #[serde(default)]
    pub rate_sweep: Option<Vec<f64>>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            periods: defaults::periods(),
            info_points: defaults::info_points(),
            oracle_stop: None,
            oracle_info: None,
            budget: defaults::budget(),
            eps: defaults::eps(),
            time_points: defaults::time_points(),
            prior_sweep: None,
            max_iter: defaults::max_iter(),
            solver_tol: defaults::solver_tol(),
            rate_sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default = "defaults::seed")]
    pub mc: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            mc: defaults::seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStrategy {
    #[default]
    Poisson,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default)]
    pub strategy: SimStrategy,
    #[serde(default = "defaults::paths")]
    pub paths: usize,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    /// Defaults to 60 mean decision times.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Pairs `(t, t')` for the capacity audit, flattened; defaults scale
    /// with the mean decision time.
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default = "defaults::bridge")]
    pub bridge: bool,
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            strategy: SimStrategy::default(),
            paths: defaults::paths(),
            dt: defaults::dt(),
            horizon: None,
            checkpoints: None,
            bridge: defaults::bridge(),
        }
    }
}

mod defaults {
    pub fn states() -> usize {
        2
    }
    pub fn capacity() -> f64 {
        1.0
    }
    pub fn periods() -> usize {
        6
    }
    pub fn info_points() -> usize {
        101
    }
    pub fn budget() -> u64 {
        10_000_000
    }
    pub fn eps() -> f64 {
        1e-6
    }
    pub fn time_points() -> usize {
        25_001
    }
    pub fn max_iter() -> usize {
        seqinfo::target::DEFAULT_MAX_ITER
    }
    pub fn solver_tol() -> f64 {
        seqinfo::target::DEFAULT_TOL
    }
    pub fn seed() -> u64 {
        42
    }
    pub fn paths() -> usize {
        100_000
    }
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn bridge() -> bool {
        true
    }
}

impl Default for Scenario {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty scenario uses defaults")
    }
}

/// A scenario turned into library objects, with every invariant checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub prior: Belief,
    pub measure: UncertaintyMeasure,
    pub target: PosteriorLottery,
    pub utility: DecisionUtility,
    pub discount: DiscountFunction,
    pub c: f64,
    pub info_total: f64,
    pub vstar: f64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("scenario: {e}")))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let bad = |msg: String| CliError::Input(msg);
        if !(2..=4).contains(&self.states) {
            return Err(bad(format!(
                "states must be 2, 3 or 4, got {}",
                self.states
            )));
        }
        let prior = match &self.prior {
            Some(b) => belief(b, self.states)?,
            None => Belief::uniform(self.states),
        };
        let measure = match &self.uncertainty {
            MeasureSpec::Quadratic => UncertaintyMeasure::Quadratic,
            MeasureSpec::Shannon => UncertaintyMeasure::Shannon,
            MeasureSpec::Tabulated { grid, values } => {
                let m = UncertaintyMeasure::Tabulated(TabulatedMeasure::new(
                    grid.clone(),
                    values.clone(),
                )?);
                m.check_concavity(1001)?;
                m
            }
        };
        if !measure.supports_dim(self.states) {
            return Err(bad(format!(
                "uncertainty measure does not support {} states",
                self.states
            )));
        }
        let target = match &self.target {
            Some(atoms) => {
                let atoms = atoms
                    .iter()
                    .map(|a| {
                        Ok(Atom {
                            posterior: belief(&a.posterior, self.states)?,
                            prob: a.prob,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                PosteriorLottery::new(prior.clone(), atoms)?
            }
            None => PosteriorLottery::full_revelation(prior.clone()),
        };
        let utility = match &self.utility {
            UtilitySpec::GuessState => DecisionUtility::guess_state(self.states),
            UtilitySpec::Payoffs { table } => DecisionUtility::new(table.clone())?,
        };
        if utility.dim() != self.states {
            return Err(bad(format!(
                "payoff table has {} states, scenario has {}",
                utility.dim(),
                self.states
            )));
        }
        let discount = match &self.discount {
            DiscountSpec::Exponential { rate } => DiscountFunction::exponential(*rate)?,
            DiscountSpec::Hyperbolic { k } => DiscountFunction::hyperbolic(*k)?,
            DiscountSpec::TruncatedLinear { horizon } => {
                DiscountFunction::truncated_linear(*horizon)?
            }
            DiscountSpec::Constant => DiscountFunction::Constant,
            DiscountSpec::Tabulated { times, values } => {
                DiscountFunction::Tabulated(TabulatedDiscount::new(times.clone(), values.clone())?)
            }
            DiscountSpec::Periods { values } => {
                if values.is_empty() {
                    return Err(bad("periods discount needs at least one value".into()));
                }
                let mut all = vec![1.0];
                all.extend(values.iter().copied());
                if values.last() != Some(&0.0) {
                    all.push(0.0);
                }
                DiscountFunction::Tabulated(TabulatedDiscount::from_periods(all)?)
            }
        };
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(bad(format!("capacity {} must be positive", self.capacity)));
        }
        let info_total = info_cost(&target, &measure)?;
        let vstar = full_info_value(&target, &utility)?;
        if self.mc.paths == 0 || !(self.mc.dt > 0.0) {
            return Err(bad("mc.paths must be positive and mc.dt > 0".into()));
        }
        if self.grids.periods == 0 || self.grids.info_points < 2 || self.grids.time_points < 2 {
            return Err(bad(
                "grids.periods must be positive and point counts at least 2".into(),
            ));
        }
        if self.grids.max_iter == 0 || !(self.grids.solver_tol > 0.0) {
            return Err(bad(
                "grids.max_iter must be positive and grids.solver_tol > 0".into(),
            ));
        }
        if let Some(cp) = &self.mc.checkpoints {
            if cp.len() % 2 != 0 {
                return Err(bad("mc.checkpoints must come in (t, t') pairs".into()));
            }
        }
        Ok(Resolved {
            scenario: self.clone(),
            prior,
            measure,
            target,
            utility,
            discount,
            c: self.capacity,
            info_total,
            vstar,
        })
    }
}

fn belief(spec: &BeliefSpec, states: usize) -> Result<Belief, CliError> {
    match spec {
        BeliefSpec::Scalar(p) if states == 2 => Ok(Belief::binary(*p)?),
        BeliefSpec::Scalar(_) => Err(CliError::Input(format!(
            "scalar beliefs are only allowed with 2 states, scenario has {states}"
        ))),
        BeliefSpec::Weights(w) if w.len() == states => Ok(Belief::new(w.clone())?),
        BeliefSpec::Weights(w) => Err(CliError::Input(format!(
            "belief has {} weights, scenario has {states} states",
            w.len()
        ))),
    }
}
