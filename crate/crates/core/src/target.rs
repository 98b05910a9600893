//! Choice of the target lottery itself.
//!
//! With stationary Poisson learning toward a lottery `pi`, the value at the
//! prior is `E_pi[F] E[rho(tau)]` with `tau ~ Exp(c / I(pi))`. An optimal
//! `pi` concavifies the gross value `F + lambda H` for a multiplier that
//! itself depends on `pi`; [`solve_target`] iterates on that multiplier.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::Serialize;

use crate::discount::{expected_discount, DiscountFunction};
use crate::error::{Error, Result};
use crate::measure::{
    full_info_value, info_cost, Atom, Belief, DecisionUtility, PosteriorLottery, UncertaintyMeasure,
};
use crate::scalar::{linspace, lit, simpson, Real};
use crate::timedist::DecisionTimeDistribution;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Largest state space handled by [`concavify`].
pub const MAX_STATES: usize = 4;
/// Tail and self-convergence target of the `g` quadrature.
const G_TAIL: f64 = 1e-12;
const G_REL_TOL: f64 = 1e-11;
const G_MIN_PANELS: usize = 4096;
const G_MAX_PANELS: usize = 1 << 22;
/// Weights below this are dropped from hull solutions.
const WEIGHT_FLOOR: f64 = 1e-12;
/// Binary grid points closer than this are merged.
const MERGE_TOL: f64 = 1e-12;

/// `V = c E[F] / (c + rate (H(prior) - E[H]))`, the value of Poisson
/// learning toward `lottery` under exponential discounting.
pub fn stationary_value<T: Real>(
    lottery: &PosteriorLottery<T>,
    utility: &DecisionUtility<T>,
    measure: &UncertaintyMeasure<T>,
    c: T,
    rate: T,
) -> Result<T> {
    if !(c > T::zero()) || rate < T::zero() {
        return Err(Error::InvalidParameter(
            "need c > 0 and a nonnegative discount rate".into(),
        ));
    }
    let info = info_cost(lottery, measure)?;
    let value = full_info_value(lottery, utility)?;
    Ok(c * value / (c + rate * info))
}

/// The multiplier function
/// `g(x) = int (-rho'(t)) e^{-a t} t / D dt / int rho(t) e^{-a t} dt`
/// with `D = h_prior - x` and `a = c / D`.
pub fn g_function<T: Real>(x: T, discount: &DiscountFunction<T>, c: T, h_prior: T) -> Result<T> {
    let setup = GIntegrand::new(x, discount, c, h_prior)?;
    let horizon = setup.horizon();
    let mut panels = G_MIN_PANELS;
    let mut prev = setup.integrate(horizon, panels);
    while panels < G_MAX_PANELS {
        panels *= 2;
        let next = setup.integrate(horizon, panels);
        let (dn, dd) = ((next.0 - prev.0).abs(), (next.1 - prev.1).abs());
        prev = next;
        if dn <= lit::<T>(G_REL_TOL) * next.0.abs().max(T::one())
            && dd <= lit::<T>(G_REL_TOL) * next.1.abs()
        {
            break;
        }
    }
    Ok(prev.0 / prev.1)
}

/// [`g_function`] with a fixed number of Simpson panels.
pub fn g_function_with_panels<T: Real>(
    x: T,
    discount: &DiscountFunction<T>,
    c: T,
    h_prior: T,
    panels: usize,
) -> Result<T> {
    let setup = GIntegrand::new(x, discount, c, h_prior)?;
    let (num, den) = setup.integrate(setup.horizon(), panels);
    Ok(num / den)
}

struct GIntegrand<'a, T> {
    discount: &'a DiscountFunction<T>,
    remaining: T,
    decay: T,
}

impl<'a, T: Real> GIntegrand<'a, T> {
    fn new(x: T, discount: &'a DiscountFunction<T>, c: T, h_prior: T) -> Result<Self> {
        let remaining = h_prior - x;
        if !(remaining > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "x = {x} leaves no information to acquire below H(prior) = {h_prior}"
            )));
        }
        if !(c > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "capacity {c} must be positive"
            )));
        }
        if !discount.is_differentiable() {
            return Err(Error::Unsupported(
                "g needs a differentiable discount function".into(),
            ));
        }
        Ok(Self {
            discount,
            remaining,
            decay: c / remaining,
        })
    }

    fn terms(&self, t: T) -> (T, T) {
        let w = (-self.decay * t).exp();
        let slope = self.discount.derivative(t).expect("checked differentiable");
        (-slope * w * t / self.remaining, self.discount.value(t) * w)
    }

    /// Truncation point beyond which both integrands carry less than the
    /// tail target (the weight decays at least as fast as `e^{-a t}`).
    fn horizon(&self) -> T {
        let mut t = lit::<T>(10.0) / self.decay;
        for _ in 0..64 {
            let (n, d) = self.terms(t);
            if (n.abs() + d) / self.decay < lit(G_TAIL) {
                break;
            }
            t = t * lit(2.0);
        }
        t
    }

    fn integrate(&self, horizon: T, panels: usize) -> (T, T) {
        let num = simpson(|t| self.terms(t).0, T::zero(), horizon, panels);
        let den = simpson(|t| self.terms(t).1, T::zero(), horizon, panels);
        (num, den)
    }
}

/// `F + lambda H`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrossValue<T> {
    pub utility: DecisionUtility<T>,
    pub measure: UncertaintyMeasure<T>,
    pub lambda: T,
}

impl<T: Real> GrossValue<T> {
    pub fn eval(&self, belief: &Belief<T>) -> T {
        self.utility.eval(belief) + self.lambda * self.measure.eval(belief)
    }
}

/// Simplex lattice with spacing `1 / resolution`, refined `refinements`
/// times around the atoms of the current hull solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimplexGrid {
    pub resolution: usize,
    pub refinements: usize,
}

impl SimplexGrid {
    pub fn for_states(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(Self {
                resolution: 1000,
                refinements: 3,
            }),
            3 => Ok(Self {
                resolution: 60,
                refinements: 2,
            }),
            4 => Ok(Self {
                resolution: 20,
                refinements: 2,
            }),
            _ => Err(unsupported_dim(dim)),
        }
    }
}

fn unsupported_dim(dim: usize) -> Error {
    Error::Unsupported(format!(
        "concavification supports 2 to {MAX_STATES} states, got {dim}"
    ))
}

/// Concave envelope at the prior and a lottery attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Concavification<T> {
    pub value: T,
    pub lottery: PosteriorLottery<T>,
}

/// Concave envelope of `gross` at `prior` over `grid`.
///
/// Binary problems use an upper monotone-chain hull and return at most two
/// posteriors bracketing the prior; larger state spaces solve the hull LP
/// and return a basic solution with at most `|X|` posteriors.
pub fn concavify<T: Real, G: Fn(&Belief<T>) -> T>(
    gross: G,
    prior: &Belief<T>,
    grid: &SimplexGrid,
) -> Result<Concavification<T>> {
    let dim = prior.dim();
    if !(2..=MAX_STATES).contains(&dim) {
        return Err(unsupported_dim(dim));
    }
    if grid.resolution < 1 {
        return Err(Error::InvalidParameter(
            "grid resolution must be positive".into(),
        ));
    }
    let mut points = lattice(dim, grid.resolution);
    points.push(prior.weights().to_vec());
    let mut spacing = T::one() / T::from_count(grid.resolution);
    let mut best = hull_at(&gross, prior, &points)?;
    for _ in 0..grid.refinements {
        let (local, next_spacing) = refine_around(&best.lottery, spacing);
        points.extend(local);
        spacing = next_spacing;
        best = hull_at(&gross, prior, &points)?;
    }
    Ok(best)
}

fn hull_at<T: Real, G: Fn(&Belief<T>) -> T>(
    gross: &G,
    prior: &Belief<T>,
    points: &[Vec<T>],
) -> Result<Concavification<T>> {
    let beliefs: Vec<Belief<T>> = points
        .iter()
        .map(|w| Belief::new(w.clone()))
        .collect::<Result<_>>()?;
    let values: Vec<T> = beliefs.iter().map(gross).collect();
    let weights = if prior.dim() == 2 {
        binary_hull(&beliefs, &values, prior)
    } else {
        lp_hull(&beliefs, &values, prior)?
    };
    let atoms: Vec<Atom<T>> = weights
        .iter()
        .map(|(i, w)| Atom {
            posterior: beliefs[*i].clone(),
            prob: *w,
        })
        .collect();
    let value = weights.iter().map(|(i, w)| *w * values[*i]).sum();
    Ok(Concavification {
        value,
        lottery: PosteriorLottery::new(prior.clone(), atoms)?,
    })
}

fn binary_hull<T: Real>(beliefs: &[Belief<T>], values: &[T], prior: &Belief<T>) -> Vec<(usize, T)> {
    let x = |i: usize| beliefs[i].scalar().expect("binary");
    let mut order: Vec<usize> = (0..beliefs.len()).collect();
    order.sort_by(|a, b| {
        x(*a)
            .partial_cmp(&x(*b))
            .expect("finite")
            .then(values[*b].partial_cmp(&values[*a]).expect("finite"))
    });
    // refined points can land a rounding error away from lattice points
    let merge = lit::<T>(MERGE_TOL);
    let mu = prior.scalar().expect("binary");
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        match kept.last_mut() {
            Some(last) if x(i) - x(*last) <= merge => {
                if x(*last) != mu && (x(i) == mu || values[i] > values[*last]) {
                    *last = i;
                }
            }
            _ => kept.push(i),
        }
    }
    let order = kept;
    let scale = values.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let slack = T::epsilon() * lit(16.0) * scale;
    let mut hull: Vec<usize> = Vec::new();
    for &i in &order {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop `a` when it lies strictly below the chord from `o` to `i`
            let lhs = (values[i] - values[o]) * (x(a) - x(o));
            let rhs = (values[a] - values[o]) * (x(i) - x(o));
            if lhs - rhs > slack * (x(i) - x(o)) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    if let Some(&i) = hull.iter().find(|&&i| x(i) == mu) {
        return vec![(i, T::one())];
    }
    let k = hull.partition_point(|&i| x(i) < mu);
    let (a, b) = (hull[k - 1], hull[k]);
    let wa = (x(b) - mu) / (x(b) - x(a));
    vec![(a, wa), (b, T::one() - wa)]
}

fn lp_hull<T: Real>(
    beliefs: &[Belief<T>],
    values: &[T],
    prior: &Belief<T>,
) -> Result<Vec<(usize, T)>> {
    let dim = prior.dim();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = values
        .iter()
        .map(|v| lp.add_var(v.to_f64_lossy(), (0.0, f64::INFINITY)))
        .collect();
    for s in 0..dim {
        let mut row = LinearExpr::empty();
        for (v, b) in vars.iter().zip(beliefs) {
            let coef = b.weights()[s].to_f64_lossy();
            if coef != 0.0 {
                row.add(*v, coef);
            }
        }
        lp.add_constraint(row, ComparisonOp::Eq, prior.weights()[s].to_f64_lossy());
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::InvalidParameter(format!("hull program failed: {e}")))?;
    let support: Vec<usize> = vars
        .iter()
        .enumerate()
        .filter(|(_, v)| solution[**v] > WEIGHT_FLOOR)
        .map(|(i, _)| i)
        .collect();
    let weights = polish_weights(beliefs, &support, prior)
        .unwrap_or_else(|| support.iter().map(|i| lit(solution[vars[*i]])).collect());
    Ok(support.into_iter().zip(weights).collect())
}

/// Re-solves `sum_i w_i nu_i = prior` on a fixed support in least squares so
/// that the lottery is plausible to working precision.
fn polish_weights<T: Real>(
    beliefs: &[Belief<T>],
    support: &[usize],
    prior: &Belief<T>,
) -> Option<Vec<T>> {
    let k = support.len();
    let dim = prior.dim();
    let mut a = vec![vec![T::zero(); k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = (0..dim)
                .map(|s| beliefs[support[r]].weights()[s] * beliefs[support[c]].weights()[s])
                .sum();
        }
        a[r][k] = (0..dim)
            .map(|s| beliefs[support[r]].weights()[s] * prior.weights()[s])
            .sum();
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|i, j| {
            a[*i][col]
                .abs()
                .partial_cmp(&a[*j][col].abs())
                .expect("finite")
        })?;
        if a[pivot][col].abs() < lit(1e-14) {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] = a[r][c] - f * a[col][c];
                }
            }
        }
    }
    let w: Vec<T> = (0..k).map(|r| a[r][k] / a[r][r]).collect();
    w.iter().all(|x| *x >= T::zero()).then_some(w)
}

/// All points of the simplex whose coordinates are multiples of `1 / resolution`.
fn lattice<T: Real>(dim: usize, resolution: usize) -> Vec<Vec<T>> {
    if dim == 2 {
        return linspace(T::zero(), T::one(), resolution + 1)
            .into_iter()
            .map(|p| vec![T::one() - p, p])
            .collect();
    }
    let mut out = Vec::new();
    let mut counts = vec![0usize; dim];
    compositions(resolution, 0, &mut counts, &mut |c| {
        out.push(
            c.iter()
                .map(|k| T::from_count(*k) / T::from_count(resolution))
                .collect(),
        );
    });
    out
}

fn compositions(left: usize, slot: usize, counts: &mut [usize], emit: &mut dyn FnMut(&[usize])) {
    if slot == counts.len() - 1 {
        counts[slot] = left;
        emit(counts);
        return;
    }
    for k in 0..=left {
        counts[slot] = k;
        compositions(left - k, slot + 1, counts, emit);
    }
}

/// Local lattice of half-width `2 spacing` around each atom.
fn refine_around<T: Real>(lottery: &PosteriorLottery<T>, spacing: T) -> (Vec<Vec<T>>, T) {
    let dim = lottery.dim();
    let steps: usize = match dim {
        2 => 100,
        3 => 10,
        _ => 4,
    };
    let fine = lit::<T>(2.0) * spacing / T::from_count(steps);
    let span = 2 * steps as i64;
    let mut out = Vec::new();
    for atom in lottery.atoms() {
        let centre = atom.posterior.weights();
        let mut offsets = vec![0i64; dim - 1];
        loop {
            let mut w: Vec<T> = Vec::with_capacity(dim);
            let mut shift = 0i64;
            for (s, o) in offsets.iter().enumerate() {
                let d = *o - span / 2;
                shift += d;
                w.push(centre[s] + fine * lit::<T>(d as f64));
            }
            w.push(centre[dim - 1] - fine * lit::<T>(shift as f64));
            if w.iter().all(|x| *x >= T::zero() && *x <= T::one()) {
                // snap the last coordinate so the point sums to one exactly
                let head: T = w[..dim - 1].iter().copied().sum();
                w[dim - 1] = (T::one() - head).max(T::zero());
                out.push(w);
            }
            let mut s = 0;
            while s < dim - 1 {
                offsets[s] += 1;
                if offsets[s] <= span {
                    break;
                }
                offsets[s] = 0;
                s += 1;
            }
            if s == dim - 1 {
                break;
            }
        }
    }
    (out, fine)
}

/// Inputs of the target-choice problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetProblem<T> {
    pub utility: DecisionUtility<T>,
    pub measure: UncertaintyMeasure<T>,
    pub prior: Belief<T>,
    pub c: T,
    pub discount: DiscountFunction<T>,
}

impl<T: Real> TargetProblem<T> {
    pub fn new(
        utility: DecisionUtility<T>,
        measure: UncertaintyMeasure<T>,
        prior: Belief<T>,
        c: T,
        discount: DiscountFunction<T>,
    ) -> Result<Self> {
        if !(c > T::zero() && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "capacity {c} must be positive"
            )));
        }
        if utility.dim() != prior.dim() || !measure.supports_dim(prior.dim()) {
            return Err(Error::InvalidParameter(
                "utility, measure and prior disagree on the state space".into(),
            ));
        }
        if !(2..=MAX_STATES).contains(&prior.dim()) {
            return Err(unsupported_dim(prior.dim()));
        }
        if !discount.is_differentiable() {
            return Err(Error::Unsupported(
                "target choice needs a differentiable discount function".into(),
            ));
        }
        Ok(Self {
            utility,
            measure,
            prior,
            c,
            discount,
        })
    }

    /// Guess-the-state utility, quadratic `H`, exponential discounting.
    pub fn guess_binary(prior: T, c: T, rate: T) -> Result<Self> {
        Self::new(
            DecisionUtility::guess_state(2),
            UncertaintyMeasure::Quadratic,
            Belief::binary(prior)?,
            c,
            DiscountFunction::exponential(rate)?,
        )
    }

    /// Value of Poisson learning toward `lottery`.
    pub fn value(&self, lottery: &PosteriorLottery<T>) -> Result<T> {
        let info = info_cost(lottery, &self.measure)?;
        let payoff = full_info_value(lottery, &self.utility)?;
        if info <= T::zero() {
            return Ok(payoff);
        }
        if let DiscountFunction::Exponential { rate } = self.discount {
            return stationary_value(lottery, &self.utility, &self.measure, self.c, rate);
        }
        let wait = DecisionTimeDistribution::exponential(self.c / info)?;
        Ok(payoff * expected_discount(&self.discount, &wait)?)
    }

    /// Multiplier `lambda = g(E[H]) E[F]` on `H` in the gross value.
    pub fn multiplier(&self, lottery: &PosteriorLottery<T>) -> Result<T> {
        let payoff = full_info_value(lottery, &self.utility)?;
        if let DiscountFunction::Exponential { rate } = self.discount {
            return Ok(rate * self.value(lottery)? / self.c);
        }
        let h_prior = self.measure.eval(&self.prior);
        let residual = lottery.expect(|nu| self.measure.eval(nu));
        if h_prior - residual <= T::zero() {
            // limit of g as the remaining information vanishes
            let slope = self
                .discount
                .derivative(T::zero())
                .expect("checked differentiable");
            return Ok(-slope * payoff / self.c);
        }
        Ok(g_function(residual, &self.discount, self.c, h_prior)? * payoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions<T> {
    pub max_iter: usize,
    /// Stop once the value changes by less than this between iterates.
    pub tol: T,
    pub grid: Option<SimplexGrid>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: lit(DEFAULT_TOL),
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSolution<T> {
    pub lottery: PosteriorLottery<T>,
    pub lambda: T,
    pub value: T,
    /// Value change over the last iteration.
    pub residual: T,
    pub iterations: usize,
    pub info_cost: T,
    /// Mean wait `I / c` of the Poisson implementation.
    pub mean_time: T,
    /// Value after each iteration.
    pub trace: Vec<T>,
    pub damped: bool,
}

/// Fixed-point iteration on the multiplier: concavify `F + lambda_k H`,
/// recompute `lambda` from the resulting lottery, and halve the step once
/// successive value changes alternate in sign.
pub fn solve_target<T: Real>(
    problem: &TargetProblem<T>,
    options: &SolverOptions<T>,
) -> Result<TargetSolution<T>> {
    let grid = match options.grid {
        Some(g) => g,
        None => SimplexGrid::for_states(problem.prior.dim())?,
    };
    let mut lottery = PosteriorLottery::full_revelation(problem.prior.clone());
    let mut value = problem.value(&lottery)?;
    let mut lambda = problem.multiplier(&lottery)?;
    let mut trace = vec![value];
    let mut damped = false;
    let mut last_step = T::zero();
    for iteration in 1..=options.max_iter {
        let gross = GrossValue {
            utility: problem.utility.clone(),
            measure: problem.measure.clone(),
            lambda,
        };
        let next = concavify(|b| gross.eval(b), &problem.prior, &grid)?.lottery;
        let next_value = problem.value(&next)?;
        let step = next_value - value;
        trace.push(next_value);
        let used = lambda;
        lottery = next;
        value = next_value;
        if step.abs() < options.tol {
            return Ok(TargetSolution {
                info_cost: info_cost(&lottery, &problem.measure)?,
                mean_time: info_cost(&lottery, &problem.measure)? / problem.c,
                lottery,
                lambda: used,
                value,
                residual: step.abs(),
                iterations: iteration,
                trace,
                damped,
            });
        }
        let target = problem.multiplier(&lottery)?;
        if step * last_step < T::zero() {
            damped = true;
        }
        lambda = if damped {
            (lambda + target) / lit(2.0)
        } else {
            target
        };
        last_step = step;
    }
    Err(Error::NonConvergence {
        iterations: options.max_iter,
        last_change: last_step.abs().to_f64_lossy(),
        trace: trace.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type DiscountFunction = crate::discount::DiscountFunction<f64>;
    type PosteriorLottery = crate::measure::PosteriorLottery<f64>;

    fn guess() -> DecisionUtility<f64> {
        DecisionUtility::guess_state(2)
    }

    /// Best symmetric split `nu / (1 + 4 (nu - 1/2)^2)` by brute force.
    fn symmetric_oracle() -> (f64, f64) {
        (0..=500_000)
            .map(|i| 0.5 + 0.5 * i as f64 / 500_000.0)
            .map(|nu| (nu, nu / (1.0 + 4.0 * (nu - 0.5) * (nu - 0.5))))
            .fold(
                (0.5, 0.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
    }

    #[test]
    fn stationary_value_examples() {
        let q = UncertaintyMeasure::Quadratic;
        let full = PosteriorLottery::binary(0.5, &[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(
            stationary_value(&full, &guess(), &q, 1.0, 1.0).unwrap(),
            0.5
        );
        let none = PosteriorLottery::degenerate(Belief::binary(0.3).unwrap());
        assert!((stationary_value(&none, &guess(), &q, 1.0, 1.0).unwrap() - 0.7).abs() < 1e-15);
        let nu = 2f64.sqrt() / 2.0;
        let split = PosteriorLottery::binary_split(0.5, 1.0 - nu, nu).unwrap();
        let v = stationary_value(&split, &guess(), &q, 1.0, 1.0).unwrap();
        assert!((v - nu / (1.0 + 4.0 * (nu - 0.5) * (nu - 0.5))).abs() < 1e-15);
        assert!((v - 0.6036).abs() < 1e-4);
    }

    #[test]
    fn g_matches_exponential_closed_form_on_lattice() {
        for rate in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let rho = DiscountFunction::exponential(rate).unwrap();
            for c in [0.25, 0.5, 1.0, 2.0, 4.0] {
                for x in [-1.0, 0.0, 0.25, 0.5, 0.9] {
                    let g = g_function(x, &rho, c, 1.0).unwrap();
                    let exact = rate / (c + rate * (1.0 - x));
                    assert!(
                        (g - exact).abs() < 1e-6,
                        "rate {rate} c {c} x {x}: {g} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn g_special_cases() {
        assert_eq!(
            g_function(0.0, &DiscountFunction::Constant, 1.0, 1.0).unwrap(),
            0.0
        );
        let hyper = DiscountFunction::hyperbolic(1.0).unwrap();
        let coarse = g_function_with_panels(0.0, &hyper, 1.0, 1.0, 20_000).unwrap();
        let fine = g_function_with_panels(0.0, &hyper, 1.0, 1.0, 40_000).unwrap();
        assert!((coarse - fine).abs() < 1e-6);
        assert!((g_function(0.0, &hyper, 1.0, 1.0).unwrap() - fine).abs() < 1e-6);
        assert!(g_function(1.0, &hyper, 1.0, 1.0).is_err());
        let tl = DiscountFunction::truncated_linear(3.0).unwrap();
        assert!(matches!(
            g_function(0.0, &tl, 1.0, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn concave_gross_value_is_its_own_envelope() {
        let q = UncertaintyMeasure::Quadratic;
        let prior = Belief::binary(0.37f64).unwrap();
        let grid = SimplexGrid::for_states(2).unwrap();
        let out = concavify(|b| q.eval(b), &prior, &grid).unwrap();
        assert_eq!(out.lottery.support_size(), 1);
        assert!((out.value - q.eval(&prior)).abs() < 1e-15);
    }

    #[test]
    fn convex_gross_value_splits_to_vertices() {
        let prior = Belief::binary(0.3).unwrap();
        let grid = SimplexGrid::for_states(2).unwrap();
        let out = concavify(|b| -UncertaintyMeasure::Quadratic.eval(b), &prior, &grid).unwrap();
        let posts: Vec<f64> = out
            .lottery
            .atoms()
            .iter()
            .map(|a| a.posterior.scalar().unwrap())
            .collect();
        assert_eq!(posts, vec![0.0, 1.0]);
        assert!(out.value.abs() < 1e-15);
        assert!(out.lottery.is_bayes_plausible());
    }

    #[test]
    fn envelope_at_the_fixed_point_lands_on_the_optimal_split() {
        let (_, v) = symmetric_oracle();
        let gross = GrossValue {
            utility: guess(),
            measure: UncertaintyMeasure::Quadratic,
            lambda: v,
        };
        let out = concavify(
            |b| gross.eval(b),
            &Belief::binary(0.5).unwrap(),
            &SimplexGrid::for_states(2).unwrap(),
        )
        .unwrap();
        let d = (2f64.sqrt() - 1.0) / 2.0;
        let posts: Vec<f64> = out
            .lottery
            .atoms()
            .iter()
            .map(|a| a.posterior.scalar().unwrap())
            .collect();
        assert!((posts[0] - (0.5 - d)).abs() < 1e-5, "{posts:?}");
        assert!((posts[1] - (0.5 + d)).abs() < 1e-5, "{posts:?}");
    }

    #[test]
    fn worked_instance_matches_oracle() {
        let problem = TargetProblem::guess_binary(0.5, 1.0, 1.0).unwrap();
        let sol = solve_target(&problem, &SolverOptions::default()).unwrap();
        let (nu_oracle, v_oracle) = symmetric_oracle();
        let hi = sol
            .lottery
            .atoms()
            .iter()
            .map(|a| a.posterior.scalar().unwrap())
            .fold(0.0, f64::max);
        assert!((hi - 2f64.sqrt() / 2.0).abs() < 1e-4, "{hi}");
        assert!((hi - nu_oracle).abs() < 1e-4);
        assert!((sol.value - v_oracle).abs() < 1e-4);
        assert!((sol.value - 0.6036).abs() < 1e-4);
        assert!(sol.residual < 1e-8);
        assert!(sol.lottery.support_size() <= 4);
        assert!((sol.lambda - sol.value).abs() < 1e-6);
    }

    #[test]
    fn patience_limit_reveals_fully() {
        let problem = TargetProblem::guess_binary(0.5, 1.0, 1e-9).unwrap();
        let sol = solve_target(&problem, &SolverOptions::default()).unwrap();
        let posts: Vec<f64> = sol
            .lottery
            .atoms()
            .iter()
            .map(|a| a.posterior.scalar().unwrap())
            .collect();
        assert_eq!(posts, vec![0.0, 1.0]);
        assert!((sol.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn off_centre_prior_beats_two_atom_grid_search() {
        let problem = TargetProblem::guess_binary(0.7, 1.0, 1.0).unwrap();
        let sol = solve_target(&problem, &SolverOptions::default()).unwrap();
        assert!(sol.lottery.support_size() <= 4);
        let mut oracle: f64 = problem
            .value(&PosteriorLottery::degenerate(Belief::binary(0.7).unwrap()))
            .unwrap();
        for i in 0..=350 {
            for j in 0..=150 {
                let (lo, hi) = (0.7 * i as f64 / 350.0, 0.7 + 0.3 * j as f64 / 150.0);
                if lo < 0.7 && hi > 0.7 {
                    let l = PosteriorLottery::binary_split(0.7, lo, hi).unwrap();
                    oracle = oracle.max(problem.value(&l).unwrap());
                }
            }
        }
        assert!(sol.value >= oracle - 1e-9, "{} < {oracle}", sol.value);
        // re-centring the prior-1/2 solution on 0.7 is feasible, so it cannot win
        let centred = solve_target(
            &TargetProblem::guess_binary(0.5, 1.0, 1.0).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let d = centred.lottery.atoms()[1].posterior.scalar().unwrap() - 0.5;
        if 0.7 + d <= 1.0 {
            let shifted = PosteriorLottery::binary_split(0.7, 0.7 - d, 0.7 + d).unwrap();
            assert!(sol.value >= problem.value(&shifted).unwrap() - 1e-12);
        }
    }

    #[test]
    fn solution_beats_random_plausible_lotteries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for prior in [0.5, 0.62, 0.8] {
            let problem = TargetProblem::guess_binary(prior, 1.0, 1.0).unwrap();
            let sol = solve_target(&problem, &SolverOptions::default()).unwrap();
            for _ in 0..200 {
                let lo = rng.random::<f64>() * prior;
                let hi = prior + rng.random::<f64>() * (1.0 - prior);
                let l = PosteriorLottery::binary_split(prior, lo, hi).unwrap();
                assert!(problem.value(&l).unwrap() <= sol.value + 1e-8);
            }
        }
    }

    #[test]
    fn more_valuable_priors_use_less_information() {
        let mut rows: Vec<(f64, f64, f64)> = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9]
            .iter()
            .map(|&p| {
                let sol = solve_target(
                    &TargetProblem::guess_binary(p, 1.0, 1.0).unwrap(),
                    &SolverOptions::default(),
                )
                .unwrap();
                (sol.value, sol.info_cost, sol.mean_time)
            })
            .collect();
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in rows.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9, "{rows:?}");
            assert!(w[1].2 <= w[0].2 + 1e-9);
        }
    }

    #[test]
    fn general_discount_uses_the_g_multiplier() {
        let exp = TargetProblem::guess_binary(0.5, 1.0, 1.0).unwrap();
        let split = PosteriorLottery::binary_split(0.5, 0.3, 0.7).unwrap();
        let via_g = g_function(
            split.expect(|nu| UncertaintyMeasure::Quadratic.eval(nu)),
            &exp.discount,
            1.0,
            1.0,
        )
        .unwrap()
            * full_info_value(&split, &guess()).unwrap();
        assert!((exp.multiplier(&split).unwrap() - via_g).abs() < 1e-6);

        let hyper = TargetProblem::new(
            guess(),
            UncertaintyMeasure::Quadratic,
            Belief::binary(0.5).unwrap(),
            1.0,
            DiscountFunction::hyperbolic(1.0).unwrap(),
        )
        .unwrap();
        let sol = solve_target(&hyper, &SolverOptions::default()).unwrap();
        assert!(sol.lottery.is_bayes_plausible());
        assert!(sol.residual < 1e-8);
    }

    #[test]
    fn three_state_hull_is_plausible_and_small() {
        let prior = Belief::new(vec![0.2, 0.3, 0.5]).unwrap();
        let problem = TargetProblem::new(
            DecisionUtility::guess_state(3),
            UncertaintyMeasure::Quadratic,
            prior,
            1.0,
            DiscountFunction::exponential(1.0).unwrap(),
        )
        .unwrap();
        let sol = solve_target(&problem, &SolverOptions::default()).unwrap();
        assert!(sol.lottery.is_bayes_plausible());
        assert!(sol.lottery.support_size() <= 6);
        let full = PosteriorLottery::full_revelation(problem.prior.clone());
        assert!(sol.value >= problem.value(&full).unwrap() - 1e-9);
    }

    #[test]
    fn unsupported_inputs() {
        let five = Belief::uniform(5);
        assert!(concavify(
            |_| 0.0,
            &five,
            &SimplexGrid {
                resolution: 4,
                refinements: 0
            }
        )
        .is_err());
        assert!(TargetProblem::guess_binary(0.5, 0.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn binary_solutions_respect_support_bound(prior in 0.05f64..0.95, c in 0.2f64..3.0, rate in 0.1f64..3.0) {
            let problem = TargetProblem::guess_binary(prior, c, rate).unwrap();
            let sol = solve_target(&problem, &SolverOptions::default()).unwrap();
            prop_assert!(sol.lottery.support_size() <= 4);
            prop_assert!(sol.lottery.is_bayes_plausible());
            prop_assert!(sol.residual < 1e-8);
        }
    }
}
