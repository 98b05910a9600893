//! The relaxed stopping problem: closed-form value, backward induction,
//! an exhaustive policy oracle, and the continuous-to-discrete certificate.
//!
//! Periods are numbered from 1. A policy stops in period `t` with
//! conditional probability `p_t` and carries accumulated information `I_t`
//! into it, subject to `(I_bar - I_t) p_t + (I_{t+1} - I_t)(1 - p_t) <= c`.

use rayon::prelude::*;
use serde::Serialize;

use crate::discount::{
    decompose_truncated_linear, DiscountFunction, DiscountSequence, LinearPiece,
};
use crate::error::{Error, Result};
use crate::scalar::{linspace, lit, Real};
use crate::timedist::DecisionTimeDistribution;

/// Constraint slack for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Default size of the information grid.
pub const DEFAULT_INFO_POINTS: usize = 101;
/// Default size of the stop-probability grid (before `c / I_bar` is added).
pub const DEFAULT_STOP_POINTS: usize = 51;
/// Default enumeration budget of the oracle.
pub const DEFAULT_ORACLE_BUDGET: u64 = 10_000_000;
/// Relative slack below which two candidate values tie.
const TIE_TOL: f64 = 1e-12;

fn check_capacity<T: Real>(c: T, info_total: T) -> Result<()> {
    if !(c > T::zero() && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "capacity c = {c} must be positive"
        )));
    }
    if !(info_total > T::zero() && info_total.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "total information {info_total} must be positive"
        )));
    }
    Ok(())
}

/// Per-period stop probability of the stationary policy, `min(c / I_bar, 1)`.
pub fn stationary_stop_prob<T: Real>(c: T, info_total: T) -> T {
    (c / info_total).min(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormValue<T> {
    pub value: T,
    /// Upper bound on the discarded terms beyond `horizon`.
    pub truncation_bound: T,
    pub horizon: usize,
}

/// `sum_{t=1}^{horizon} rho_t (1 - q)^(t-1) q V*` with `q = c / I_bar`, or
/// `rho_1 V*` when `c >= I_bar`.
pub fn closed_form_value<T: Real, D: DiscountSequence<T> + ?Sized>(
    c: T,
    info_total: T,
    vstar: T,
    rho: &D,
    horizon: usize,
) -> Result<ClosedFormValue<T>> {
    check_capacity(c, info_total)?;
    if vstar < T::zero() {
        return Err(Error::InvalidParameter(format!(
            "full-information value {vstar} must be >= 0"
        )));
    }
    if c >= info_total {
        return Ok(ClosedFormValue {
            value: rho.at_period(1) * vstar,
            truncation_bound: T::zero(),
            horizon,
        });
    }
    let q = c / info_total;
    let mut weight = q * vstar;
    let mut value = T::zero();
    for t in 1..=horizon {
        value = value + rho.at_period(t) * weight;
        weight = weight * (T::one() - q);
    }
    // rho is decreasing, so the tail is at most rho_{h+1} (1-q)^h V*
    let truncation_bound = rho.at_period(horizon + 1) * weight / q;
    Ok(ClosedFormValue {
        value,
        truncation_bound,
        horizon,
    })
}

/// Smallest horizon whose discarded tail is below `tol` (capped at 10^7).
pub fn closed_form_horizon<T: Real, D: DiscountSequence<T> + ?Sized>(
    c: T,
    info_total: T,
    vstar: T,
    rho: &D,
    tol: T,
) -> usize {
    if c >= info_total {
        return 1;
    }
    let q = c / info_total;
    let mut survive = T::one();
    let mut h = 0usize;
    while h < 10_000_000 {
        if rho.at_period(h + 1) * survive * vstar <= tol {
            return h.max(1);
        }
        survive = survive * (T::one() - q);
        h += 1;
    }
    h
}

/// Expected time of the stationary policy; no exhaustive strategy decides
/// earlier on average.
pub fn expected_time_lower_bound<T: Real>(c: T, info_total: T) -> Result<T> {
    check_capacity(c, info_total)?;
    Ok(info_total / c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Periods `1, 2, ...`.
    Discrete,
    /// Continuous time from 0.
    Continuous,
}

/// Decision-time law of the stationary policy: geometric in discrete mode,
/// exponential with rate `c / I_bar` in continuous mode.
pub fn stationary_policy_distribution<T: Real>(
    c: T,
    info_total: T,
    mode: TimeMode,
) -> Result<DecisionTimeDistribution<T>> {
    check_capacity(c, info_total)?;
    match mode {
        TimeMode::Discrete => {
            DecisionTimeDistribution::geometric(stationary_stop_prob(c, info_total))
        }
        TimeMode::Continuous => DecisionTimeDistribution::exponential(c / info_total),
    }
}

/// A policy of the relaxed problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxedPolicy<T> {
    /// `p_1, ..., p_n`.
    pub stop_prob: Vec<T>,
    /// `I_1, ..., I_{n+1}` with `I_1 = 0`.
    pub info: Vec<T>,
}

impl<T: Real> RelaxedPolicy<T> {
    pub fn new(stop_prob: Vec<T>, info: Vec<T>) -> Result<Self> {
        if info.len() != stop_prob.len() + 1 {
            return Err(Error::InvalidParameter(
                "policy needs one more info level than stop probabilities".into(),
            ));
        }
        if info[0] != T::zero() {
            return Err(Error::InvalidParameter(
                "policy must start with no accumulated information".into(),
            ));
        }
        if stop_prob
            .iter()
            .any(|p| !(*p >= T::zero() && *p <= T::one()))
        {
            return Err(Error::InvalidParameter(
                "stop probabilities must lie in [0, 1]".into(),
            ));
        }
        if info.iter().any(|i| !(*i >= T::zero() && i.is_finite())) {
            return Err(Error::InvalidParameter(
                "accumulated information must be >= 0".into(),
            ));
        }
        Ok(Self { stop_prob, info })
    }

    /// The stationary policy `p_t = c / I_bar`, `I_t = 0` over `periods`.
    pub fn stationary(c: T, info_total: T, periods: usize) -> Result<Self> {
        check_capacity(c, info_total)?;
        Self::new(
            vec![stationary_stop_prob(c, info_total); periods],
            vec![T::zero(); periods + 1],
        )
    }

    pub fn horizon(&self) -> usize {
        self.stop_prob.len()
    }

    /// `P_t = P(decide by t)` for `t = 0..=n`.
    pub fn decided_by(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.stop_prob.len() + 1);
        let mut p_cum = T::zero();
        out.push(p_cum);
        for p in &self.stop_prob {
            p_cum = p_cum + (T::one() - p_cum) * *p;
            out.push(p_cum);
        }
        out
    }

    /// `sum_t rho_t (1 - P_{t-1}) p_t V*`.
    pub fn objective<D: DiscountSequence<T> + ?Sized>(&self, rho: &D, vstar: T) -> T {
        let mut survive = T::one();
        let mut acc = T::zero();
        for (k, p) in self.stop_prob.iter().enumerate() {
            acc = acc + rho.at_period(k + 1) * survive * *p * vstar;
            survive = survive * (T::one() - *p);
        }
        acc
    }

    /// Largest constraint excess `max_t (LHS_t - c)`; nonpositive when feasible.
    pub fn max_violation(&self, c: T, info_total: T) -> T {
        (0..self.stop_prob.len())
            .map(|k| {
                constraint_lhs(
                    info_total,
                    self.info[k],
                    self.info[k + 1],
                    self.stop_prob[k],
                ) - c
            })
            .fold(T::neg_infinity(), T::max)
    }

    pub fn is_feasible(&self, c: T, info_total: T) -> bool {
        self.max_violation(c, info_total) <= T::tolerance(FEASIBILITY_TOL)
    }
}

#[inline]
fn constraint_lhs<T: Real>(info_total: T, info: T, next: T, p: T) -> T {
    (info_total - info) * p + (next - info) * (T::one() - p)
}

/// Largest feasible stop probability from `info` to `next`, if any.
#[inline]
fn max_stop_prob<T: Real>(c: T, info_total: T, info: T, next: T) -> Option<T> {
    let slack = c + info - next;
    if slack < -T::tolerance(FEASIBILITY_TOL) {
        return None;
    }
    let room = info_total - next;
    if room <= T::zero() {
        return Some(T::one());
    }
    Some((slack.max(T::zero()) / room).min(T::one()))
}

/// `V_t(I)` on a grid of accumulated information, for `t = 1..=periods`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTable<T> {
    pub periods: usize,
    pub info_grid: Vec<T>,
    /// `values[t - 1][i] = V_t(info_grid[i])`.
    pub values: Vec<Vec<T>>,
    /// Optimal next information level per cell, when produced by induction.
    pub next_info: Option<Vec<Vec<T>>>,
    /// Optimal stop probability per cell, when produced by induction.
    pub stop_prob: Option<Vec<Vec<T>>>,
}

impl<T: Real> ValueTable<T> {
    pub fn value(&self, period: usize, index: usize) -> T {
        self.values[period - 1][index]
    }

    /// `max |self - other|` over all cells; tables must share their shape.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.periods != other.periods || self.info_grid != other.info_grid {
            return Err(Error::InvalidParameter(
                "value tables have different shapes".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max))
    }

    /// Largest decrease of `V_t` along the information grid.
    pub fn monotonicity_defect(&self) -> T {
        self.values
            .iter()
            .flat_map(|row| row.windows(2).map(|w| w[0] - w[1]))
            .fold(T::zero(), T::max)
    }
}

fn check_info_grid<T: Real>(grid: &[T], info_total: T) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("information grid is empty".into()));
    }
    if grid[0] != T::zero() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "information grid must start at 0 and increase".into(),
        ));
    }
    if *grid.last().expect("nonempty") > info_total * (T::one() + T::tolerance(FEASIBILITY_TOL)) {
        return Err(Error::InvalidParameter(
            "information grid exceeds the total information".into(),
        ));
    }
    Ok(())
}

/// Default information grid: 101 points on `[0, I_bar]`.
pub fn default_info_grid<T: Real>(info_total: T) -> Vec<T> {
    linspace(T::zero(), info_total, DEFAULT_INFO_POINTS)
}

/// Backward induction for `rho = truncated_linear(periods)`.
pub fn backward_induction<T: Real>(
    c: T,
    info_total: T,
    vstar: T,
    periods: usize,
    info_grid: &[T],
) -> Result<ValueTable<T>> {
    let rho = DiscountFunction::truncated_linear(T::from_count(periods))?;
    backward_induction_with(c, info_total, vstar, &rho, periods, info_grid)
}

/// Backward induction of
/// `V_t(I) = max_{p, I'} rho_t p V* + (1 - p) V_{t+1}(I')` with
/// `V_{periods + 1} = 0` and `I'` searched over `info_grid`.
///
/// For each `I'` the objective is linear in `p`, so the optimal `p` is the
/// largest feasible one when stopping beats continuing and zero otherwise.
/// Ties go to the lowest `I'`, then the lowest `p`.
pub fn backward_induction_with<T: Real, D: DiscountSequence<T> + Sync + ?Sized>(
    c: T,
    info_total: T,
    vstar: T,
    rho: &D,
    periods: usize,
    info_grid: &[T],
) -> Result<ValueTable<T>> {
    check_capacity(c, info_total)?;
    check_info_grid(info_grid, info_total)?;
    if periods == 0 {
        return Err(Error::InvalidParameter("need at least one period".into()));
    }
    let n = info_grid.len();
    let mut values = vec![vec![T::zero(); n]; periods];
    let mut next_info = vec![vec![T::zero(); n]; periods];
    let mut stop_prob = vec![vec![T::zero(); n]; periods];
    let mut continuation = vec![T::zero(); n];
    let tie = T::tolerance(TIE_TOL) * vstar.abs().max(T::one());
    for t in (1..=periods).rev() {
        let stop_value = rho.at_period(t) * vstar;
        let cells: Vec<(T, T, T)> = info_grid
            .par_iter()
            .map(|&info| {
                let mut best: Option<(T, T, T)> = None;
                for (j, &next) in info_grid.iter().enumerate() {
                    let Some(p_max) = max_stop_prob(c, info_total, info, next) else {
                        continue;
                    };
                    let cont = continuation[j];
                    let p = if stop_value > cont { p_max } else { T::zero() };
                    let v = p * stop_value + (T::one() - p) * cont;
                    if best.is_none_or(|(bv, _, _)| v > bv + tie) {
                        best = Some((v, next, p));
                    }
                }
                best.expect("staying put is always feasible")
            })
            .collect();
        let row = t - 1;
        for (i, (v, next, p)) in cells.into_iter().enumerate() {
            values[row][i] = v;
            next_info[row][i] = next;
            stop_prob[row][i] = p;
        }
        continuation = values[row].clone();
    }
    Ok(ValueTable {
        periods,
        info_grid: info_grid.to_vec(),
        values,
        next_info: Some(next_info),
        stop_prob: Some(stop_prob),
    })
}

/// Direct evaluation of the conjectured value function for
/// `rho = truncated_linear(periods)`:
/// `V_t(I) = rho_t x V* + (1 - x) sum_{s > t} rho_s q (1 - q)^(s - t - 1) V*`
/// with `x = (c + I) / I_bar`, and `rho_t V*` once `x >= 1`.
pub fn closed_form_table<T: Real>(
    c: T,
    info_total: T,
    vstar: T,
    periods: usize,
    info_grid: &[T],
) -> Result<ValueTable<T>> {
    check_capacity(c, info_total)?;
    check_info_grid(info_grid, info_total)?;
    let horizon = T::from_count(periods);
    let rho = |t: usize| (horizon - T::from_count(t)) / horizon;
    let q = c / info_total;
    let values = (1..=periods)
        .map(|t| {
            let mut stationary = T::zero();
            if q < T::one() {
                let mut w = q;
                for s in (t + 1)..=periods {
                    stationary = stationary + rho(s) * vstar * w;
                    w = w * (T::one() - q);
                }
            }
            info_grid
                .iter()
                .map(|&info| {
                    let x = (c + info) / info_total;
                    if x < T::one() {
                        rho(t) * x * vstar + (T::one() - x) * stationary
                    } else {
                        rho(t) * vstar
                    }
                })
                .collect()
        })
        .collect();
    Ok(ValueTable {
        periods,
        info_grid: info_grid.to_vec(),
        values,
        next_info: None,
        stop_prob: None,
    })
}

/// Outcome of [`brute_force_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult<T> {
    pub policy: RelaxedPolicy<T>,
    pub value: T,
    /// Value of the stationary policy over the same periods.
    pub stationary_value: T,
    pub evaluations: u64,
    /// The maximizer never banks and stops at rate `c / I_bar`.
    pub certified: bool,
    /// First departure from the stationary policy, when not certified.
    pub witness: Option<String>,
}

/// Exhaustive search over grid policies `(p_t, I_{t+1})`, `t = 1..=periods`.
///
/// `c / I_bar` is added to `stop_grid` and `0` to `info_grid`. Periods after
/// the last one with positive discount are dropped, and once a policy has
/// stopped for sure its remaining choices are fixed to `(0, I_t)`. Feasible
/// sequences are counted before enumeration; more than `budget` of them is
/// an error. Ties go to the first policy in the order (lowest `I'`, then
/// lowest `p`) period by period.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_oracle<T: Real, D: DiscountSequence<T> + Sync + ?Sized>(
    c: T,
    info_total: T,
    vstar: T,
    rho: &D,
    periods: usize,
    stop_grid: &[T],
    info_grid: &[T],
    budget: u64,
) -> Result<OracleResult<T>> {
    check_capacity(c, info_total)?;
    if stop_grid.is_empty() || info_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "oracle grids must be nonempty".into(),
        ));
    }
    let q = stationary_stop_prob(c, info_total);
    let snap = T::tolerance(FEASIBILITY_TOL);
    let p_grid = sorted_with(stop_grid, q, snap);
    let i_grid = sorted_with(info_grid, T::zero(), snap);
    if p_grid.iter().any(|p| !(*p >= T::zero() && *p <= T::one())) || i_grid[0] < T::zero() {
        return Err(Error::InvalidParameter("oracle grids out of range".into()));
    }
    let active = (1..=periods)
        .rev()
        .find(|t| rho.at_period(*t) > T::zero())
        .unwrap_or(0);
    let search = Search {
        c,
        info_total,
        vstar,
        tie: T::tolerance(TIE_TOL) * vstar.abs().max(T::one()),
        stop_grid: &p_grid,
        info_grid: &i_grid,
        weights: (1..=active).map(|t| rho.at_period(t)).collect(),
    };
    let zero_idx = i_grid
        .iter()
        .position(|x| *x == T::zero())
        .expect("zero injected");
    let needed = search.count_leaves(zero_idx);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }

    let (value, stop_idx, info_idx, evaluations) = if active == 0 {
        (T::zero(), Vec::new(), vec![zero_idx], 1)
    } else {
        let first = search.choices(zero_idx);
        let branches: Vec<Best<T>> = first
            .par_iter()
            .map(|&(pi, ni)| {
                let mut best = Best::empty(active);
                let mut path_p = vec![0usize; active];
                let mut path_i = vec![zero_idx; active + 1];
                path_p[0] = pi;
                path_i[1] = ni;
                let p = p_grid[pi];
                let gain = search.weights[0] * p * vstar;
                search.descend(
                    1,
                    ni,
                    T::one() - p,
                    gain,
                    &mut path_p,
                    &mut path_i,
                    &mut best,
                );
                best
            })
            .collect();
        let mut best = Best::empty(active);
        for b in branches {
            best.evaluations += b.evaluations;
            if best.stop.is_empty() || b.value > best.value + search.tie {
                best.value = b.value;
                best.stop = b.stop;
                best.info = b.info;
            }
        }
        (best.value, best.stop, best.info, best.evaluations)
    };

    let policy = RelaxedPolicy {
        stop_prob: stop_idx.iter().map(|i| p_grid[*i]).collect(),
        info: info_idx.iter().map(|i| i_grid[*i]).collect(),
    };
    let stationary_value = RelaxedPolicy::stationary(c, info_total, active)?.objective(rho, vstar);
    let witness = stationary_departure(&policy, q, snap);
    Ok(OracleResult {
        policy,
        value,
        stationary_value,
        evaluations,
        certified: witness.is_none(),
        witness,
    })
}

fn sorted_with<T: Real>(grid: &[T], extra: T, snap: T) -> Vec<T> {
    let mut out: Vec<T> = grid.to_vec();
    if !out.iter().any(|x| (*x - extra).abs() <= snap) {
        out.push(extra);
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    out.dedup();
    out
}

/// Describes where `policy` leaves the stationary path, ignoring periods
/// reached with probability zero.
fn stationary_departure<T: Real>(policy: &RelaxedPolicy<T>, q: T, snap: T) -> Option<String> {
    let mut survive = T::one();
    let mut departure = None;
    for (k, p) in policy.stop_prob.iter().enumerate() {
        if survive <= T::zero() {
            break;
        }
        let t = k + 1;
        if policy.info[k] > snap {
            return Some(format!(
                "period {t} enters with banked information {}",
                policy.info[k]
            ));
        }
        if departure.is_none() && (*p - q).abs() > snap {
            departure = Some(format!(
                "period {t} stops with probability {p} instead of {q}"
            ));
        }
        survive = survive * (T::one() - *p);
    }
    departure
}

struct Best<T> {
    value: T,
    stop: Vec<usize>,
    info: Vec<usize>,
    evaluations: u64,
}

impl<T: Real> Best<T> {
    fn empty(active: usize) -> Self {
        Self {
            value: T::neg_infinity(),
            stop: Vec::with_capacity(active),
            info: Vec::with_capacity(active + 1),
            evaluations: 0,
        }
    }
}

struct Search<'a, T> {
    c: T,
    info_total: T,
    vstar: T,
    tie: T,
    stop_grid: &'a [T],
    info_grid: &'a [T],
    weights: Vec<T>,
}

impl<T: Real> Search<'_, T> {
    /// Feasible `(p index, next-info index)` pairs from `info_idx`, ordered
    /// by next info, then stop probability.
    fn choices(&self, info_idx: usize) -> Vec<(usize, usize)> {
        let info = self.info_grid[info_idx];
        let slack = T::tolerance(FEASIBILITY_TOL);
        let mut out = Vec::new();
        for (ni, &next) in self.info_grid.iter().enumerate() {
            for (pi, &p) in self.stop_grid.iter().enumerate() {
                if constraint_lhs(self.info_total, info, next, p) <= self.c + slack {
                    out.push((pi, ni));
                }
            }
        }
        out
    }

    fn count_leaves(&self, start: usize) -> u64 {
        let n = self.info_grid.len();
        let active = self.weights.len();
        let one_idx = self.stop_grid.iter().position(|p| *p >= T::one());
        // counts[i] = leaves below a node entering the next period at info i
        let mut counts = vec![1u64; n];
        for _ in 0..active {
            let next: Vec<u64> = (0..n)
                .map(|i| {
                    self.choices(i)
                        .into_iter()
                        .map(|(pi, ni)| if Some(pi) == one_idx { 1 } else { counts[ni] })
                        .fold(0u64, u64::saturating_add)
                })
                .collect();
            counts = next;
        }
        counts[start]
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        depth: usize,
        info_idx: usize,
        survive: T,
        gain: T,
        path_p: &mut Vec<usize>,
        path_i: &mut Vec<usize>,
        best: &mut Best<T>,
    ) {
        let active = self.weights.len();
        if depth == active || survive <= T::zero() {
            best.evaluations += 1;
            if best.stop.is_empty() || gain > best.value + self.tie {
                // stopped paths keep (p = 0, I' = I) for the remaining periods
                let zero_p = self.stop_grid.iter().position(|p| *p == T::zero());
                for k in depth..active {
                    path_p[k] = zero_p.unwrap_or(0);
                    path_i[k + 1] = path_i[k];
                }
                best.value = gain;
                best.stop = path_p.clone();
                best.info = path_i.clone();
            }
            return;
        }
        for (pi, ni) in self.choices(info_idx) {
            let p = self.stop_grid[pi];
            path_p[depth] = pi;
            path_i[depth + 1] = ni;
            let g = gain + self.weights[depth] * survive * p * self.vstar;
            self.descend(
                depth + 1,
                ni,
                survive * (T::one() - p),
                g,
                path_p,
                path_i,
                best,
            );
        }
    }
}

/// Decomposition-based check that a convex discount inherits the value of
/// its truncated-linear pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport<T> {
    pub horizon: usize,
    pub pieces: Vec<LinearPiece<T>>,
    /// Closed-form value under the discount itself.
    pub direct: T,
    /// Sum of closed-form values under each piece.
    pub piece_sum: T,
    /// Bound on the value carried by the discount beyond the pieces.
    pub tail_bound: T,
    pub gap: T,
    /// `max_k |V_1(0) - closed form|` for backward induction on each piece.
    pub piece_induction_gap: T,
    pub passed: bool,
}

/// Splits `rho` at the smallest even horizon whose value tail is below `eps`
/// and compares the direct closed-form value with the sum over pieces.
/// Passes when the two agree within `2 eps` and each piece's backward
/// induction reproduces its closed form.
pub fn convex_reduction_certificate<T: Real>(
    c: T,
    info_total: T,
    vstar: T,
    rho: &DiscountFunction<T>,
    eps: T,
) -> Result<ReductionReport<T>> {
    check_capacity(c, info_total)?;
    let q = stationary_stop_prob(c, info_total);
    // smallest even T with sum_{t >= T} rho_t q (1-q)^(t-1) V* < eps, and an
    // unweighted tail below eps for summable families
    let far = closed_form_horizon(c, info_total, vstar, rho, eps * lit(1e-6)) + 2;
    let mut weighted_tail = vec![T::zero(); far + 2];
    let mut w = q * (T::one() - q).powi(far as i32 - 1);
    for t in (1..=far).rev() {
        weighted_tail[t] = weighted_tail[t + 1] + rho.at_period(t) * w * vstar;
        w = w / (T::one() - q).max(T::min_positive_value());
    }
    let mut horizon = 2;
    loop {
        let value_ok = horizon >= far || weighted_tail[horizon] < eps;
        let mass_ok = rho.tail_sum(horizon).is_none_or(|m| m < eps);
        if value_ok && mass_ok {
            break;
        }
        horizon += 2;
        if horizon > 10_000_000 {
            return Err(Error::InvalidParameter(
                "no horizon brings the discount tail below eps".into(),
            ));
        }
    }
    let dec = decompose_truncated_linear(rho, horizon, eps)?;
    let long = closed_form_horizon(c, info_total, vstar, rho, eps * lit(1e-6)).max(horizon);
    let direct = closed_form_value(c, info_total, vstar, rho, long)?.value;
    let grid = [T::zero()];
    let mut piece_sum = T::zero();
    let mut piece_induction_gap = T::zero();
    for piece in &dec.pieces {
        let span = piece.last_positive_period().unwrap_or(0).min(long);
        let closed = closed_form_value(c, info_total, vstar, piece, span)?.value;
        piece_sum = piece_sum + closed;
        if span > 0 {
            let table = backward_induction_with(c, info_total, vstar, piece, span, &grid)?;
            piece_induction_gap = piece_induction_gap.max((table.value(1, 0) - closed).abs());
        }
    }
    let tail_bound = if horizon < weighted_tail.len() {
        weighted_tail[horizon]
    } else {
        T::zero()
    };
    let gap = (direct - piece_sum).abs();
    Ok(ReductionReport {
        horizon,
        pieces: dec.pieces,
        direct,
        piece_sum,
        tail_bound,
        gap,
        piece_induction_gap,
        passed: gap <= lit::<T>(2.0) * eps && piece_induction_gap <= T::tolerance(1e-10),
    })
}

/// Result of mapping a continuous stop-rate path to discrete periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationReport<T> {
    pub dt: T,
    pub periods: usize,
    /// `max_k (LHS_k - c dt)`, positive when a discrete constraint fails.
    pub max_violation: T,
    /// `max_k (c dt - LHS_k)`.
    pub max_slack: T,
    /// Deviation of the recursive decided-by sequence from its closed form.
    pub recursion_error: T,
    pub min_info: T,
    /// First grid time at which the accumulated information turns negative.
    pub infeasible_at: Option<T>,
    /// Discretized objective `sum_k rho(k dt) (1 - P_{k-1}) p_k V*`.
    pub objective: T,
    /// Closed-form value at capacity `c dt` over the same periods.
    pub bound: T,
    pub passed: bool,
}

/// Discrete image of a stop-rate path `p(t)` on `[0, horizon]`.
///
/// Accumulated information solves `I' = c - p (I_bar - I)` from `I(0) = 0`
/// (RK4, eight substeps per period). Period `k` covers
/// `[(k-1) dt, k dt]` with stop probability `1 - exp(-int p)` and entering
/// information `I((k-1) dt)`; its budget is `c dt`. The path is feasible
/// iff the information stays nonnegative, in which case every discrete
/// constraint holds with slack `c int (1 - e^{-int p})`.
#[allow(clippy::too_many_arguments)]
pub fn discretization_certificate<T: Real, P: Fn(T) -> T>(
    rate: P,
    c: T,
    info_total: T,
    vstar: T,
    rho: &DiscountFunction<T>,
    dt: T,
    horizon: T,
    tol: T,
) -> Result<DiscretizationReport<T>> {
    check_capacity(c, info_total)?;
    if !(dt > T::zero() && horizon > dt) {
        return Err(Error::InvalidParameter("need 0 < dt < horizon".into()));
    }
    let periods = (horizon / dt).round().to_usize().unwrap_or(0);
    const SUBSTEPS: usize = 8;
    let h = dt / T::from_count(SUBSTEPS);
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let field = |t: T, info: T| {
        let p = rate(t);
        (c - p * (info_total - info), p)
    };
    let budget = c * dt;
    let neg_tol = T::tolerance(FEASIBILITY_TOL);
    let mut info = T::zero();
    let mut decided = T::zero();
    let mut hazard_total = T::zero();
    let mut report = DiscretizationReport {
        dt,
        periods,
        max_violation: T::neg_infinity(),
        max_slack: T::neg_infinity(),
        recursion_error: T::zero(),
        min_info: T::zero(),
        infeasible_at: None,
        objective: T::zero(),
        bound: T::zero(),
        passed: false,
    };
    for k in 1..=periods {
        let t0 = dt * T::from_count(k - 1);
        let entering = info;
        let mut hazard = T::zero();
        for s in 0..SUBSTEPS {
            let t = t0 + h * T::from_count(s);
            let (k1, a1) = field(t, info);
            let (k2, a2) = field(t + h / two, info + h * k1 / two);
            let (k3, a3) = field(t + h / two, info + h * k2 / two);
            let (k4, a4) = field(t + h, info + h * k3);
            info = info + h * (k1 + two * k2 + two * k3 + k4) / six;
            hazard = hazard + h * (a1 + two * a2 + two * a3 + a4) / six;
        }
        let p_hat = -(-hazard).exp_m1();
        let lhs = constraint_lhs(info_total, entering, info, p_hat);
        report.max_violation = report.max_violation.max(lhs - budget);
        report.max_slack = report.max_slack.max(budget - lhs);
        report.min_info = report.min_info.min(info);
        if report.infeasible_at.is_none() && info < -neg_tol {
            report.infeasible_at = Some(t0 + dt);
        }
        report.objective =
            report.objective + rho.value(t0 + dt) * (T::one() - decided) * p_hat * vstar;
        decided = decided + (T::one() - decided) * p_hat;
        hazard_total = hazard_total + hazard;
        let direct = -(-hazard_total).exp_m1();
        report.recursion_error = report.recursion_error.max((decided - direct).abs());
    }
    // the bound runs past the path horizon: a longer horizon only adds value
    let sampled = Sampled(|t: usize| rho.value(dt * T::from_count(t)));
    let tail = T::tolerance(1e-12);
    let span = closed_form_horizon(budget, info_total, vstar, &sampled, tail).max(periods);
    report.bound = closed_form_value(budget, info_total, vstar, &sampled, span)?.value;
    report.passed = report.infeasible_at.is_none()
        && report.max_violation <= tol
        && report.recursion_error <= tol
        && report.objective <= report.bound + tol;
    Ok(report)
}

struct Sampled<F>(F);

impl<T: Real, F: Fn(usize) -> T> DiscountSequence<T> for Sampled<F> {
    fn at_period(&self, t: usize) -> T {
        if t == 0 {
            T::zero()
        } else {
            (self.0)(t)
        }
    }
}
