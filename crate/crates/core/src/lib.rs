//! Capacity-constrained sequential learning toward a target information
//! structure.
//!
//! The crate computes decision-time laws of canonical learning strategies,
//! certifies the relaxed dynamic program under convex discounting, and
//! solves for an optimal target lottery by concavification. All numerics are
//! generic over [`Real`] (`f32` or `f64`); the aliases at the crate root fix
//! the scalar to `f64`.

pub mod discount;
pub mod dp;
pub mod error;
pub mod fpt;
pub mod measure;
pub mod montecarlo;
pub mod scalar;
pub mod strategies;
pub mod target;
pub mod timedist;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Belief = measure::Belief<f64>;
pub type PosteriorLottery = measure::PosteriorLottery<f64>;
pub type UncertaintyMeasure = measure::UncertaintyMeasure<f64>;
pub type DecisionUtility = measure::DecisionUtility<f64>;
pub type DiscountFunction = discount::DiscountFunction<f64>;
pub type LinearPiece = discount::LinearPiece<f64>;
pub type DecisionTimeDistribution = timedist::DecisionTimeDistribution<f64>;
pub type FptProblem = fpt::FptProblem<f64>;
pub type StrategySpec = strategies::StrategySpec<f64>;
pub type StrategyOutcome = strategies::StrategyOutcome<f64>;
pub type SimConfig = montecarlo::SimConfig<f64>;
pub type PathBundle = montecarlo::PathBundle<f64>;
pub type GrossValue = target::GrossValue<f64>;
pub type TargetProblem = target::TargetProblem<f64>;
pub type TargetSolution = target::TargetSolution<f64>;
