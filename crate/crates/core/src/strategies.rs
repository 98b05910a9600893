//! Three ways to spend a flow capacity `c` on a target lottery: bank
//! everything and decide at a fixed time, let the belief diffuse until it
//! hits a target posterior, or receive the whole target signal at a Poisson
//! arrival.

use serde::Serialize;

use crate::discount::{expected_discount, DiscountFunction};
use crate::error::{Error, Result};
use crate::fpt::{fpt_series, FptProblem};
use crate::measure::{
    full_info_value, info_cost, DecisionUtility, PosteriorLottery, UncertaintyMeasure,
};
use crate::scalar::{linspace, lit, Real};
use crate::timedist::DecisionTimeDistribution;

/// Default output horizon, in multiples of the mean decision time.
pub const DEFAULT_HORIZON_FACTOR: f64 = 25.0;
/// Default number of output grid points.
pub const DEFAULT_GRID_POINTS: usize = 25_001;
/// Offset from the prior at which the accumulation path starts.
pub const PATH_START_OFFSET: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    PureAccumulation,
    Gaussian,
    Poisson,
}

/// A learning strategy aimed at `target` under flow capacity `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySpec<T> {
    pub kind: StrategyKind,
    pub c: T,
    pub measure: UncertaintyMeasure<T>,
    pub target: PosteriorLottery<T>,
    pub utility: DecisionUtility<T>,
    /// Output grid `[0, horizon_factor * I_bar / c]`.
    pub horizon_factor: T,
    pub grid_points: usize,
}

impl<T: Real> StrategySpec<T> {
    pub fn new(
        kind: StrategyKind,
        c: T,
        measure: UncertaintyMeasure<T>,
        target: PosteriorLottery<T>,
        utility: DecisionUtility<T>,
    ) -> Result<Self> {
        if !(c > T::zero() && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "capacity {c} must be positive"
            )));
        }
        let info_total = info_cost(&target, &measure)?;
        if info_total <= T::zero() {
            return Err(Error::InvalidParameter(
                "target carries no information".into(),
            ));
        }
        full_info_value(&target, &utility)?;
        Ok(Self {
            kind,
            c,
            measure,
            target,
            utility,
            horizon_factor: lit(DEFAULT_HORIZON_FACTOR),
            grid_points: DEFAULT_GRID_POINTS,
        })
    }

    /// Binary state, quadratic `H`, full revelation at prior 1/2, guess-the-state payoff.
    pub fn paper(kind: StrategyKind, c: T) -> Result<Self> {
        let target =
            PosteriorLottery::binary(lit(0.5), &[(T::zero(), lit(0.5)), (T::one(), lit(0.5))])?;
        Self::new(
            kind,
            c,
            UncertaintyMeasure::Quadratic,
            target,
            DecisionUtility::guess_state(2),
        )
    }

    pub fn with_grid(mut self, horizon_factor: T, grid_points: usize) -> Result<Self> {
        if !(horizon_factor > T::zero()) || grid_points < 2 {
            return Err(Error::InvalidParameter(
                "grid needs a positive horizon and two points".into(),
            ));
        }
        self.horizon_factor = horizon_factor;
        self.grid_points = grid_points;
        Ok(self)
    }

    pub fn info_total(&self) -> T {
        info_cost(&self.target, &self.measure).expect("validated at construction")
    }

    pub fn vstar(&self) -> T {
        full_info_value(&self.target, &self.utility).expect("validated at construction")
    }

    /// `I_bar / c`.
    pub fn mean_time(&self) -> T {
        self.info_total() / self.c
    }

    fn grid(&self) -> Vec<T> {
        linspace(
            T::zero(),
            self.horizon_factor * self.mean_time(),
            self.grid_points,
        )
    }

    /// Arrival rate `c / I_bar` of the Poisson implementation.
    pub fn poisson_rate(&self) -> T {
        self.c / self.info_total()
    }

    /// The diffusion behind Gaussian learning: barriers at the two target
    /// posteriors and `sigma^2 = 2 c / (-H'')`, which is belief-independent
    /// only for quadratic `H`.
    pub fn diffusion(&self) -> Result<FptProblem<T>> {
        if self.measure != UncertaintyMeasure::Quadratic {
            return Err(Error::Unsupported(
                "Gaussian learning needs a quadratic uncertainty measure so that the diffusion variance is constant".into(),
            ));
        }
        let Some(prior) = self.target.prior().scalar() else {
            return Err(Error::Unsupported(
                "Gaussian learning is implemented for binary states only".into(),
            ));
        };
        let mut posts: Vec<T> = self
            .target
            .atoms()
            .iter()
            .filter(|a| a.prob > T::zero())
            .map(|a| a.posterior.scalar().expect("binary lottery"))
            .collect();
        posts.sort_by(|a, b| a.partial_cmp(b).expect("finite beliefs"));
        posts.dedup();
        if posts.len() != 2 {
            return Err(Error::Unsupported(
                "Gaussian learning needs a target with exactly two posteriors".into(),
            ));
        }
        let (lo, hi) = (posts[0], posts[1]);
        if ((prior - lo) - (hi - prior)).abs() > T::tolerance(SYMMETRY_TOL) {
            return Err(Error::Unsupported(format!(
                "target posteriors {lo} and {hi} are not symmetric about the prior {prior}; only the symmetric case is supported"
            )));
        }
        let sigma2 = lit::<T>(2.0) * self.c / -self.measure.second_derivative(prior);
        let horizon = self.horizon_factor * self.mean_time();
        let dt = horizon / T::from_count(self.grid_points - 1);
        FptProblem::new(prior, lo, hi, sigma2, horizon, dt)
    }
}

/// Decision-time law of a strategy and what it is worth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome<T> {
    pub kind: StrategyKind,
    pub time_dist: DecisionTimeDistribution<T>,
    pub info_total: T,
    pub vstar: T,
    pub mean_time: T,
    /// Diffusion variance of Gaussian learning.
    pub sigma2: Option<T>,
    /// `(t, belief)` along the accumulation path, when available.
    pub belief_path: Option<Vec<(T, T)>>,
    pub notes: Vec<String>,
}

impl<T: Real> StrategyOutcome<T> {
    /// `V* E[rho(T)]`.
    pub fn value(&self, rho: &DiscountFunction<T>) -> Result<T> {
        Ok(self.vstar * expected_discount(rho, &self.time_dist)?)
    }
}

pub fn evaluate<T: Real>(spec: &StrategySpec<T>) -> Result<StrategyOutcome<T>> {
    match spec.kind {
        StrategyKind::PureAccumulation => pure_accumulation(spec),
        StrategyKind::Gaussian => gaussian(spec),
        StrategyKind::Poisson => poisson(spec),
    }
}

/// Bank information until the target is reached at `t = I_bar / c`.
///
/// The belief path is produced for the binary, quadratic-`H`, full-revelation
/// case at prior 1/2 only, where the belief drifts as
/// `d mu / dt = c / (4 (2 mu - 1))`.
pub fn pure_accumulation<T: Real>(spec: &StrategySpec<T>) -> Result<StrategyOutcome<T>> {
    let mean = spec.mean_time();
    let time_dist = DecisionTimeDistribution::deterministic(mean)?;
    let mut notes = Vec::new();
    let belief_path = match accumulation_path(spec, lit(PATH_START_OFFSET), 1001) {
        Ok(path) => Some(path),
        Err(e) => {
            notes.push(format!("no belief path: {e}"));
            None
        }
    };
    Ok(StrategyOutcome {
        kind: StrategyKind::PureAccumulation,
        time_dist,
        info_total: spec.info_total(),
        vstar: spec.vstar(),
        mean_time: mean,
        sigma2: None,
        belief_path,
        notes,
    })
}

/// Upper branch of the accumulation path on `points` times in
/// `[0, I_bar / c]`, integrating `dt / d mu = 4 (2 mu - 1) / c` from
/// `mu = 1/2 + offset` and inverting.
pub fn accumulation_path<T: Real>(
    spec: &StrategySpec<T>,
    offset: T,
    points: usize,
) -> Result<Vec<(T, T)>> {
    let half = lit::<T>(0.5);
    let symmetric_full = spec.measure == UncertaintyMeasure::Quadratic
        && spec.target.prior().scalar() == Some(half)
        && spec.target.support_size() == 2
        && spec.target.atoms().iter().all(|a| {
            a.posterior
                .scalar()
                .is_some_and(|p| p == T::zero() || p == T::one())
        });
    if !symmetric_full {
        return Err(Error::Unsupported(
            "belief path is available only for full revelation at prior 1/2 under quadratic H"
                .into(),
        ));
    }
    let c = spec.c;
    // time to reach belief m; the integrand is linear so the trapezoid rule is exact
    let steps = 20_000usize;
    let start = half + offset;
    let beliefs = linspace(start, T::one(), steps + 1);
    let mut times = vec![T::zero(); steps + 1];
    for i in 1..=steps {
        let f = |m: T| lit::<T>(4.0) * (lit::<T>(2.0) * m - T::one()) / c;
        times[i] = times[i - 1]
            + (beliefs[i] - beliefs[i - 1]) * (f(beliefs[i]) + f(beliefs[i - 1])) / lit(2.0);
    }
    let end = spec.mean_time();
    let out = linspace(T::zero(), end, points)
        .into_iter()
        .map(|t| {
            let idx = times.partition_point(|x| *x <= t).clamp(1, steps);
            let (t0, t1) = (times[idx - 1], times[idx]);
            let w = ((t - t0) / (t1 - t0)).max(T::zero()).min(T::one());
            (t, beliefs[idx - 1] + w * (beliefs[idx] - beliefs[idx - 1]))
        })
        .collect();
    Ok(out)
}

/// Receive the whole target signal at rate `c / I_bar`.
pub fn poisson<T: Real>(spec: &StrategySpec<T>) -> Result<StrategyOutcome<T>> {
    let rate = spec.poisson_rate();
    let time_dist = DecisionTimeDistribution::exponential(rate)?.with_grid(spec.grid());
    Ok(StrategyOutcome {
        kind: StrategyKind::Poisson,
        time_dist,
        info_total: spec.info_total(),
        vstar: spec.vstar(),
        mean_time: T::one() / rate,
        sigma2: None,
        belief_path: None,
        notes: Vec::new(),
    })
}

/// Driftless diffusion of the belief, absorbed at the target posteriors.
pub fn gaussian<T: Real>(spec: &StrategySpec<T>) -> Result<StrategyOutcome<T>> {
    let problem = spec.diffusion()?;
    let time_dist = fpt_series(&problem);
    let notes = time_dist.warnings().to_vec();
    Ok(StrategyOutcome {
        kind: StrategyKind::Gaussian,
        mean_time: time_dist.mean()?,
        time_dist,
        info_total: spec.info_total(),
        vstar: spec.vstar(),
        sigma2: Some(problem.sigma2),
        belief_path: None,
        notes,
    })
}

/// Closed-form value of Gaussian learning at `c = 1`, exponential discount
/// rate 1, quadratic `H` and `F = max(mu, 1 - mu)`:
/// `V(mu) = (e^{2 sqrt 2} + e^{4 sqrt 2 mu}) / (1 + e^{2 sqrt 2}) e^{-2 sqrt 2 mu}`.
pub fn gaussian_value_analytic<T: Real>(mu: T) -> Result<T> {
    if !(mu >= T::zero() && mu <= T::one()) {
        return Err(Error::InvalidBelief(format!("belief {mu} outside [0, 1]")));
    }
    let k = lit::<T>(2.0) * T::SQRT_2();
    let e = (k).exp();
    Ok((e + (lit::<T>(2.0) * k * mu).exp()) / (T::one() + e) * (-k * mu).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Belief;
    use proptest::prelude::*;

    type StrategySpec = super::StrategySpec<f64>;
    type DiscountFunction = crate::discount::DiscountFunction<f64>;

    fn paper(kind: StrategyKind) -> StrategySpec {
        StrategySpec::paper(kind, 1.0).unwrap()
    }

    #[test]
    fn pure_accumulation_examples() {
        let out = pure_accumulation(&paper(StrategyKind::PureAccumulation)).unwrap();
        assert_eq!(out.mean_time, 1.0);
        let path = out.belief_path.clone().unwrap();
        let (t, mu) = path[250];
        assert_eq!(t, 0.25);
        assert!((mu - 0.75).abs() < 1e-6, "{mu}");
        for (t, mu) in &path {
            assert!((mu - (1.0 + t.sqrt()) / 2.0).abs() < 1e-4);
        }
        let rho = DiscountFunction::exponential(1.0).unwrap();
        assert!((out.value(&rho).unwrap() - (-1.0f64).exp()).abs() < 1e-15);

        let fast =
            pure_accumulation(&StrategySpec::paper(StrategyKind::PureAccumulation, 2.0).unwrap())
                .unwrap();
        assert_eq!(fast.mean_time, 0.5);
    }

    #[test]
    fn path_start_offset_is_immaterial() {
        let spec = paper(StrategyKind::PureAccumulation);
        let a = accumulation_path(&spec, 1e-9, 101).unwrap();
        let b = accumulation_path(&spec, 1e-7, 101).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn accumulation_time_holds_for_any_measure() {
        let target = PosteriorLottery::binary(0.5, &[(0.1, 0.5), (0.9, 0.5)]).unwrap();
        let spec = StrategySpec::new(
            StrategyKind::PureAccumulation,
            0.3,
            UncertaintyMeasure::Shannon,
            target,
            DecisionUtility::guess_state(2),
        )
        .unwrap();
        let out = pure_accumulation(&spec).unwrap();
        assert!(out.belief_path.is_none());
        assert!(!out.notes.is_empty());
        assert!((out.mean_time - spec.info_total() / 0.3).abs() < 1e-15);
    }

    #[test]
    fn poisson_examples() {
        let spec = paper(StrategyKind::Poisson);
        assert_eq!(spec.poisson_rate(), 1.0);
        let out = poisson(&spec).unwrap();
        let rho = DiscountFunction::exponential(1.0).unwrap();
        assert_eq!(out.value(&rho).unwrap(), 0.5);
        assert_eq!(out.value(&DiscountFunction::Constant).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_examples() {
        let out = gaussian(&paper(StrategyKind::Gaussian)).unwrap();
        assert_eq!(out.sigma2, Some(0.25));
        assert!((out.mean_time - 1.0).abs() < 1e-4);
        let rho = DiscountFunction::exponential(1.0).unwrap();
        let v = out.value(&rho).unwrap();
        assert!((v - 0.459).abs() < 1e-3, "{v}");
        assert!((v - gaussian_value_analytic(0.5).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn gaussian_rejects_unsupported_targets() {
        let skew = PosteriorLottery::binary(0.5, &[(0.2, 0.5), (0.8, 0.5)]).unwrap();
        let ok = StrategySpec::new(
            StrategyKind::Gaussian,
            1.0,
            UncertaintyMeasure::Quadratic,
            skew,
            DecisionUtility::guess_state(2),
        );
        assert!(gaussian(&ok.unwrap()).is_ok());
        let lopsided = PosteriorLottery::binary_split(0.5, 0.0, 0.8).unwrap();
        let spec = StrategySpec::new(
            StrategyKind::Gaussian,
            1.0,
            UncertaintyMeasure::Quadratic,
            lopsided,
            DecisionUtility::guess_state(2),
        )
        .unwrap();
        assert!(matches!(gaussian(&spec), Err(Error::Unsupported(_))));
        let shannon = StrategySpec::new(
            StrategyKind::Gaussian,
            1.0,
            UncertaintyMeasure::Shannon,
            PosteriorLottery::full_revelation(Belief::binary(0.5).unwrap()),
            DecisionUtility::guess_state(2),
        )
        .unwrap();
        assert!(matches!(gaussian(&shannon), Err(Error::Unsupported(_))));
    }

    #[test]
    fn analytic_value_examples() {
        assert!((gaussian_value_analytic(0.0f64).unwrap() - 1.0).abs() < 1e-15);
        assert!((gaussian_value_analytic(1.0f64).unwrap() - 1.0).abs() < 1e-12);
        let e = (2.0 * 2f64.sqrt()).exp();
        let direct = 2.0 * e / (1.0 + e) * (-(2f64.sqrt())).exp();
        assert!((gaussian_value_analytic(0.5).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.4590).abs() < 1e-4);
        assert!(gaussian_value_analytic(1.5).is_err());
    }

    #[test]
    fn analytic_value_solves_hjb() {
        let h = 1e-4;
        for mu in linspace(0.05, 0.95, 91) {
            let v = |x: f64| gaussian_value_analytic(x).unwrap();
            let second = (v(mu + h) - 2.0 * v(mu) + v(mu - h)) / (h * h);
            assert!((v(mu) - second / 8.0).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(StrategySpec::paper(StrategyKind::Poisson, 0.0).is_err());
        let none = PosteriorLottery::degenerate(Belief::binary(0.5).unwrap());
        assert!(StrategySpec::new(
            StrategyKind::Poisson,
            1.0,
            UncertaintyMeasure::Quadratic,
            none,
            DecisionUtility::guess_state(2)
        )
        .is_err());
    }

    #[test]
    fn ordering_and_affine_indifference() {
        let outs: Vec<_> = [
            StrategyKind::PureAccumulation,
            StrategyKind::Gaussian,
            StrategyKind::Poisson,
        ]
        .into_iter()
        .map(|k| evaluate(&paper(k)).unwrap())
        .collect();
        let rho = DiscountFunction::exponential(1.0).unwrap();
        let v: Vec<f64> = outs.iter().map(|o| o.value(&rho).unwrap()).collect();
        assert!(v[2] > v[1] && v[1] > v[0], "{v:?}");
        let affine = DiscountFunction::truncated_linear(1000.0).unwrap();
        let v: Vec<f64> = outs.iter().map(|o| o.value(&affine).unwrap()).collect();
        assert!(
            (v[0] - v[1]).abs() < 1e-6 && (v[1] - v[2]).abs() < 1e-6,
            "{v:?}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn convex_discounts_rank_strategies(family in 0usize..3, r in 0.1f64..3.0) {
            let rho = match family {
                0 => DiscountFunction::exponential(r).unwrap(),
                1 => DiscountFunction::hyperbolic(r).unwrap(),
                _ => DiscountFunction::truncated_linear(1.0 + r).unwrap(),
            };
            let v: Vec<f64> = [StrategyKind::PureAccumulation, StrategyKind::Gaussian, StrategyKind::Poisson]
                .into_iter()
                .map(|k| evaluate(&paper(k)).unwrap().value(&rho).unwrap())
                .collect();
            prop_assert!(v[2] >= v[1] - 1e-9 && v[1] >= v[0] - 1e-9, "{:?}", v);
        }
    }
}
