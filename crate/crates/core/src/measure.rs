//! Beliefs, posterior lotteries and posterior-separable information costs.
//!
//! A belief is a point of the probability simplex over a finite state space.
//! Binary state spaces get a scalar shortcut: the scalar is the probability
//! of the second state, so `Belief::binary(0.7)` has weights `[0.3, 0.7]`.
//!
//! Information is measured in dimensionless units of the uncertainty measure
//! `H`; a capacity `c` is then "units of `H` per period".

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{linspace, lit, Real};

/// Probability-sum and simplex-membership slack.
const SIMPLEX_TOL: f64 = 1e-12;
/// Barycenter slack for Bayes plausibility.
pub const PLAUSIBILITY_TOL: f64 = 1e-10;
/// Concavity slack used when validating tabulated measures.
const CONCAVITY_TOL: f64 = 1e-9;
/// Grid used to validate user-supplied measures.
const CONCAVITY_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Belief<T> {
    weights: Vec<T>,
}

impl<T: Real> Belief<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidBelief(format!(
                "need at least two states, got {}",
                weights.len()
            )));
        }
        let tol = T::tolerance(SIMPLEX_TOL);
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < -tol || w > T::one() + tol {
                return Err(Error::InvalidBelief(format!(
                    "weight {i} = {w} outside [0,1]"
                )));
            }
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidBelief(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Binary belief putting probability `p` on the second state.
    pub fn binary(p: T) -> Result<Self> {
        if !(T::zero()..=T::one()).contains(&p) {
            return Err(Error::InvalidBelief(format!(
                "binary belief {p} outside [0,1]"
            )));
        }
        Ok(Self {
            weights: vec![T::one() - p, p],
        })
    }

    /// Degenerate belief on state `state`.
    pub fn vertex(dim: usize, state: usize) -> Self {
        let mut weights = vec![T::zero(); dim];
        weights[state] = T::one();
        Self { weights }
    }

    /// Uniform belief.
    pub fn uniform(dim: usize) -> Self {
        Self {
            weights: vec![T::one() / T::from_count(dim); dim],
        }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Probability of the second state, for binary beliefs only.
    pub fn scalar(&self) -> Option<T> {
        (self.dim() == 2).then(|| self.weights[1])
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &Self) -> T {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: T) -> Self {
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| lambda * *a + (T::one() - lambda) * *b)
            .collect();
        Self { weights }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom<T> {
    pub posterior: Belief<T>,
    pub prob: T,
}

/// Finite-support distribution over posterior beliefs together with the
/// prior it is meant to split.
///
/// Construction checks that probabilities form a distribution and that all
/// beliefs live on the same state space. Bayes plausibility is a separate
/// predicate so that implausible candidates can still be represented and
/// rejected by the operations that need it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorLottery<T> {
    prior: Belief<T>,
    atoms: Vec<Atom<T>>,
}

impl<T: Real> PosteriorLottery<T> {
    pub fn new(prior: Belief<T>, atoms: Vec<Atom<T>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidLottery("no atoms".into()));
        }
        let tol = T::tolerance(SIMPLEX_TOL);
        for (i, atom) in atoms.iter().enumerate() {
            if atom.posterior.dim() != prior.dim() {
                return Err(Error::InvalidLottery(format!(
                    "atom {i} has {} states, prior has {}",
                    atom.posterior.dim(),
                    prior.dim()
                )));
            }
            if !atom.prob.is_finite() || atom.prob < -tol || atom.prob > T::one() + tol {
                return Err(Error::InvalidLottery(format!(
                    "atom {i} probability {} outside [0,1]",
                    atom.prob
                )));
            }
        }
        let total: T = atoms.iter().map(|a| a.prob).sum();
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidLottery(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { prior, atoms })
    }

    /// Binary lottery from `(posterior scalar, probability)` pairs.
    pub fn binary(prior: T, atoms: &[(T, T)]) -> Result<Self> {
        let atoms = atoms
            .iter()
            .map(|&(nu, prob)| {
                Ok(Atom {
                    posterior: Belief::binary(nu)?,
                    prob,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(Belief::binary(prior)?, atoms)
    }

    /// No information: a single atom at the prior.
    pub fn degenerate(prior: Belief<T>) -> Self {
        Self {
            atoms: vec![Atom {
                posterior: prior.clone(),
                prob: T::one(),
            }],
            prior,
        }
    }

    /// Full revelation of the state.
    pub fn full_revelation(prior: Belief<T>) -> Self {
        let dim = prior.dim();
        let atoms = prior
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, w)| Atom {
                posterior: Belief::vertex(dim, i),
                prob: *w,
            })
            .collect();
        Self { prior, atoms }
    }

    /// Two-atom binary lottery with the given posteriors, probabilities set
    /// by Bayes plausibility. Requires `lo <= prior <= hi`, `lo < hi`.
    pub fn binary_split(prior: T, lo: T, hi: T) -> Result<Self> {
        if !(lo <= prior && prior <= hi && lo < hi) {
            return Err(Error::InvalidLottery(format!(
                "posteriors {lo}, {hi} do not bracket prior {prior}"
            )));
        }
        let q_hi = (prior - lo) / (hi - lo);
        Self::binary(prior, &[(lo, T::one() - q_hi), (hi, q_hi)])
    }

    pub fn prior(&self) -> &Belief<T> {
        &self.prior
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn barycenter(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for atom in &self.atoms {
            for (o, w) in out.iter_mut().zip(atom.posterior.weights()) {
                *o = *o + atom.prob * *w;
            }
        }
        out
    }

    /// Sup-norm gap between barycenter and prior.
    pub fn plausibility_gap(&self) -> T {
        self.barycenter()
            .iter()
            .zip(self.prior.weights())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_bayes_plausible(&self) -> bool {
        self.plausibility_gap() <= T::tolerance(PLAUSIBILITY_TOL)
    }

    pub(crate) fn require_plausible(&self) -> Result<()> {
        let gap = self.plausibility_gap();
        if gap <= T::tolerance(PLAUSIBILITY_TOL) {
            Ok(())
        } else {
            Err(Error::NotBayesPlausible {
                gap: gap.to_f64_lossy(),
            })
        }
    }

    /// `E_pi[f(nu)]`.
    pub fn expect<F: Fn(&Belief<T>) -> T>(&self, f: F) -> T {
        self.atoms.iter().map(|a| a.prob * f(&a.posterior)).sum()
    }

    /// Number of distinct posteriors carrying positive probability.
    pub fn support_size(&self) -> usize {
        let tol = T::tolerance(SIMPLEX_TOL);
        let mut seen: Vec<&Belief<T>> = Vec::new();
        for atom in self.atoms.iter().filter(|a| a.prob > tol) {
            if !seen.iter().any(|b| b.distance(&atom.posterior) <= tol) {
                seen.push(&atom.posterior);
            }
        }
        seen.len()
    }

    /// Probability mixture `lambda * self + (1 - lambda) * other` of two
    /// lotteries sharing a prior.
    pub fn mixture(&self, other: &Self, lambda: T) -> Result<Self> {
        if self.prior.distance(&other.prior) > T::tolerance(SIMPLEX_TOL) {
            return Err(Error::InvalidLottery(
                "mixture of lotteries with different priors".into(),
            ));
        }
        let scale = |atoms: &[Atom<T>], w: T| {
            atoms
                .iter()
                .map(|a| Atom {
                    posterior: a.posterior.clone(),
                    prob: a.prob * w,
                })
                .collect::<Vec<_>>()
        };
        let mut atoms = scale(&self.atoms, lambda);
        atoms.extend(scale(&other.atoms, T::one() - lambda));
        atoms.retain(|a| a.prob > T::zero());
        Self::new(self.prior.clone(), atoms)
    }
}

/// Concave uncertainty index `H` inducing a posterior-separable cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintyMeasure<T> {
    /// `2 (1 - sum w_i^2)`; on binary states this is `1 - 4 (p - 1/2)^2`.
    Quadratic,
    /// Shannon entropy in nats.
    Shannon,
    /// Piecewise-linear interpolation of a table on binary beliefs.
    Tabulated(TabulatedMeasure<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedMeasure<T> {
    grid: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> TabulatedMeasure<T> {
    /// `grid` must increase from 0 to 1. Concavity is checked both on the
    /// table's own slopes and on a 1001-point evaluation grid.
    pub fn new(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter(
                "tabulated measure needs matching grid and values with at least two points".into(),
            ));
        }
        let tol = T::tolerance(SIMPLEX_TOL);
        if grid[0].abs() > tol || (grid[grid.len() - 1] - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(
                "tabulated grid must span [0, 1]".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated values must be finite".into(),
            ));
        }
        let slack = T::tolerance(CONCAVITY_TOL);
        for i in 1..grid.len() - 1 {
            let left = (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]);
            let right = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
            if right > left + slack {
                return Err(Error::NotConcave {
                    at: grid[i].to_f64_lossy(),
                    violation: (right - left).to_f64_lossy(),
                });
            }
        }
        let table = Self { grid, values };
        UncertaintyMeasure::Tabulated(table.clone()).check_concavity(CONCAVITY_GRID)?;
        Ok(table)
    }

    fn interpolate(&self, p: T) -> T {
        let p = p.max(T::zero()).min(T::one());
        let idx = self.grid.partition_point(|g| *g <= p);
        if idx == 0 {
            return self.values[0];
        }
        if idx >= self.grid.len() {
            return self.values[self.values.len() - 1];
        }
        let (x0, x1) = (self.grid[idx - 1], self.grid[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        y0 + (y1 - y0) * (p - x0) / (x1 - x0)
    }

    fn slope(&self, p: T) -> T {
        let idx = self
            .grid
            .partition_point(|g| *g <= p)
            .clamp(1, self.grid.len() - 1);
        (self.values[idx] - self.values[idx - 1]) / (self.grid[idx] - self.grid[idx - 1])
    }
}

/// Step for the numerical second derivative of tabulated measures.
const TABULATED_CURVATURE_STEP: f64 = 1e-3;

impl<T: Real> UncertaintyMeasure<T> {
    pub fn supports_dim(&self, dim: usize) -> bool {
        match self {
            Self::Quadratic | Self::Shannon => dim >= 2,
            Self::Tabulated(_) => dim == 2,
        }
    }

    /// `H(belief)`. Tabulated measures return NaN off the binary simplex;
    /// use [`Self::supports_dim`] to guard.
    pub fn eval(&self, belief: &Belief<T>) -> T {
        match self {
            Self::Quadratic => {
                let sq: T = belief.weights().iter().map(|w| *w * *w).sum();
                lit::<T>(2.0) * (T::one() - sq)
            }
            Self::Shannon => belief
                .weights()
                .iter()
                .filter(|w| **w > T::zero())
                .map(|w| -*w * w.ln())
                .sum(),
            Self::Tabulated(table) => match belief.scalar() {
                Some(p) => table.interpolate(p),
                None => T::nan(),
            },
        }
    }

    /// `H` on the binary scalar representation.
    pub fn eval_scalar(&self, p: T) -> T {
        match self {
            Self::Quadratic => {
                let d = p - lit(0.5);
                T::one() - lit::<T>(4.0) * d * d
            }
            Self::Shannon => {
                let term = |x: T| {
                    if x > T::zero() {
                        -x * x.ln()
                    } else {
                        T::zero()
                    }
                };
                term(p) + term(T::one() - p)
            }
            Self::Tabulated(table) => table.interpolate(p),
        }
    }

    /// `H'(p)` on the binary scalar representation.
    pub fn derivative(&self, p: T) -> T {
        match self {
            Self::Quadratic => lit::<T>(-8.0) * (p - lit(0.5)),
            Self::Shannon => ((T::one() - p) / p).ln(),
            Self::Tabulated(table) => table.slope(p),
        }
    }

    /// `H''(p)` on the binary scalar representation. Tabulated measures use a
    /// central difference with step `1e-3`.
    pub fn second_derivative(&self, p: T) -> T {
        match self {
            Self::Quadratic => lit(-8.0),
            Self::Shannon => -T::one() / (p * (T::one() - p)),
            Self::Tabulated(table) => {
                let h = lit::<T>(TABULATED_CURVATURE_STEP);
                let lo = (p - h).max(T::zero());
                let hi = (p + h).min(T::one());
                let mid = (lo + hi) / lit(2.0);
                let half = (hi - lo) / lit(2.0);
                (table.interpolate(hi) - lit::<T>(2.0) * table.interpolate(mid)
                    + table.interpolate(lo))
                    / (half * half)
            }
        }
    }

    /// Discrete concavity test on an `n_points` uniform binary grid.
    pub fn check_concavity(&self, n_points: usize) -> Result<()> {
        let grid = linspace(T::zero(), T::one(), n_points);
        let vals: Vec<T> = grid.iter().map(|p| self.eval_scalar(*p)).collect();
        let slack = T::tolerance(CONCAVITY_TOL);
        for i in 1..grid.len().saturating_sub(1) {
            // midpoint form of H(la + (1-l)b) >= l H(a) + (1-l) H(b)
            let chord = (vals[i - 1] + vals[i + 1]) / lit(2.0);
            if vals[i] < chord - slack {
                return Err(Error::NotConcave {
                    at: grid[i].to_f64_lossy(),
                    violation: (chord - vals[i]).to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// `F(mu) = max_a E_mu[u(a, x)]` for a finite payoff table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionUtility<T> {
    /// `payoffs[a][x]`.
    payoffs: Vec<Vec<T>>,
}

impl<T: Real> DecisionUtility<T> {
    pub fn new(payoffs: Vec<Vec<T>>) -> Result<Self> {
        let dim = payoffs.first().map(Vec::len).unwrap_or(0);
        if payoffs.is_empty() || dim < 2 {
            return Err(Error::InvalidParameter(
                "payoff table needs actions over at least two states".into(),
            ));
        }
        if payoffs
            .iter()
            .any(|row| row.len() != dim || row.iter().any(|u| !u.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "payoff rows must be finite and equally long".into(),
            ));
        }
        Ok(Self { payoffs })
    }

    /// Guess-the-state utility: one action per state paying 1 when right.
    /// On binary states `F(p) = max(p, 1 - p)`.
    pub fn guess_state(dim: usize) -> Self {
        let payoffs = (0..dim)
            .map(|a| {
                (0..dim)
                    .map(|x| if a == x { T::one() } else { T::zero() })
                    .collect()
            })
            .collect();
        Self { payoffs }
    }

    pub fn dim(&self) -> usize {
        self.payoffs[0].len()
    }

    pub fn payoffs(&self) -> &[Vec<T>] {
        &self.payoffs
    }

    pub fn eval(&self, belief: &Belief<T>) -> T {
        self.payoffs
            .iter()
            .map(|row| {
                row.iter()
                    .zip(belief.weights())
                    .map(|(u, w)| *u * *w)
                    .sum::<T>()
            })
            .fold(T::neg_infinity(), T::max)
    }

    pub fn eval_scalar(&self, p: T) -> T {
        self.payoffs
            .iter()
            .map(|row| row[0] * (T::one() - p) + row[1] * p)
            .fold(T::neg_infinity(), T::max)
    }
}

/// Posterior-separable cost `sum_i p_i (H(prior) - H(nu_i))`.
pub fn info_cost<T: Real>(
    lottery: &PosteriorLottery<T>,
    measure: &UncertaintyMeasure<T>,
) -> Result<T> {
    lottery.require_plausible()?;
    if !measure.supports_dim(lottery.dim()) {
        return Err(Error::Unsupported(format!(
            "uncertainty measure does not support {} states",
            lottery.dim()
        )));
    }
    let h_prior = measure.eval(lottery.prior());
    let cost = lottery.expect(|nu| h_prior - measure.eval(nu));
    Ok(cost.max(T::zero()))
}

/// `E_pi[F(nu)]`, the value of acting on the target's posteriors.
pub fn full_info_value<T: Real>(
    lottery: &PosteriorLottery<T>,
    utility: &DecisionUtility<T>,
) -> Result<T> {
    lottery.require_plausible()?;
    if utility.dim() != lottery.dim() {
        return Err(Error::InvalidParameter(format!(
            "payoff table has {} states, lottery has {}",
            utility.dim(),
            lottery.dim()
        )));
    }
    Ok(lottery.expect(|nu| utility.eval(nu)))
}

pub fn bayes_plausible<T: Real>(lottery: &PosteriorLottery<T>) -> bool {
    lottery.is_bayes_plausible()
}
