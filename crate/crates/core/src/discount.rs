//! Convex decreasing discount functions, their truncated-linear
//! decomposition, and expected discounting against a decision-time law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, simpson, Real};
use crate::timedist::{DecisionTimeDistribution, TimeLaw};

/// Finite-difference slack for convexity and monotonicity checks.
pub const SHAPE_TOL: f64 = 1e-9;
/// Default tail budget for the truncated-linear decomposition.
pub const DEFAULT_DECOMPOSITION_EPS: f64 = 1e-6;
/// Step of the central difference used for tabulated derivatives.
pub const TABULATED_DERIVATIVE_STEP: f64 = 1e-4;
/// Missing probability mass times discount that is still ignorable.
const NEGLIGIBLE_TAIL: f64 = 1e-6;

/// Discount function `rho_t`, evaluated at nonnegative times.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscountFunction<T> {
    /// `exp(-rate * t)`.
    Exponential { rate: T },
    /// `1 / (1 + k t)`.
    Hyperbolic { k: T },
    /// `max(1 - t / horizon, 0)`.
    TruncatedLinear { horizon: T },
    /// `rho = 1`; no impatience.
    Constant,
    /// Linear interpolation of `(times, values)`, held flat after the last
    /// knot. Shape is not enforced at construction.
    Tabulated(TabulatedDiscount<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedDiscount<T> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> TabulatedDiscount<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidDiscount(
                "tabulated discount needs matching times and values".into(),
            ));
        }
        if times[0] != T::zero() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDiscount(
                "tabulated times must start at 0 and increase".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidDiscount(
                "tabulated values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Values on integer periods `0, 1, ..., n-1`.
    pub fn from_periods(values: Vec<T>) -> Result<Self> {
        let times = (0..values.len()).map(T::from_count).collect();
        Self::new(times, values)
    }

    fn value(&self, t: T) -> T {
        let idx = self.times.partition_point(|x| *x <= t);
        if idx >= self.times.len() {
            return self.values[self.values.len() - 1];
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

impl<T: Real> DiscountFunction<T> {
    pub fn exponential(rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::InvalidDiscount(format!(
                "exponential rate {rate} must be positive"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn hyperbolic(k: T) -> Result<Self> {
        if !(k > T::zero() && k.is_finite()) {
            return Err(Error::InvalidDiscount(format!(
                "hyperbolic k {k} must be positive"
            )));
        }
        Ok(Self::Hyperbolic { k })
    }

    pub fn truncated_linear(horizon: T) -> Result<Self> {
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::InvalidDiscount(format!(
                "truncated-linear horizon {horizon} must be positive"
            )));
        }
        Ok(Self::TruncatedLinear { horizon })
    }

    /// Constant delay cost `max(1 - kappa t, 0)`.
    pub fn constant_delay(kappa: T) -> Result<Self> {
        if !(kappa > T::zero()) {
            return Err(Error::InvalidDiscount(format!(
                "delay cost {kappa} must be positive"
            )));
        }
        Self::truncated_linear(T::one() / kappa)
    }

    /// `rho_t`; rejects negative times.
    pub fn eval(&self, t: T) -> Result<T> {
        if t < T::zero() || t.is_nan() {
            return Err(Error::NegativeTime(t.to_f64_lossy()));
        }
        Ok(self.value(t))
    }

    /// `rho_t` for `t >= 0` (negative inputs are clamped to zero).
    pub fn value(&self, t: T) -> T {
        let t = t.max(T::zero());
        match self {
            Self::Exponential { rate } => (-*rate * t).exp(),
            Self::Hyperbolic { k } => T::one() / (T::one() + *k * t),
            Self::TruncatedLinear { horizon } => (T::one() - t / *horizon).max(T::zero()),
            Self::Constant => T::one(),
            Self::Tabulated(table) => table.value(t),
        }
    }

    /// `d rho / dt`. `None` where the family has no derivative (the kink of
    /// the truncated-linear family).
    pub fn derivative(&self, t: T) -> Option<T> {
        let t = t.max(T::zero());
        match self {
            Self::Exponential { rate } => Some(-*rate * (-*rate * t).exp()),
            Self::Hyperbolic { k } => {
                let d = T::one() + *k * t;
                Some(-*k / (d * d))
            }
            Self::TruncatedLinear { .. } => None,
            Self::Constant => Some(T::zero()),
            Self::Tabulated(table) => {
                let h = lit::<T>(TABULATED_DERIVATIVE_STEP);
                let lo = (t - h).max(T::zero());
                Some((table.value(t + h) - table.value(lo)) / (t + h - lo))
            }
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Self::TruncatedLinear { .. })
    }

    /// `sum_{t >= from} rho_t` over integer periods, when finite.
    pub fn tail_sum(&self, from: usize) -> Option<T> {
        match self {
            Self::Exponential { rate } => {
                let r = (-*rate).exp();
                Some(r.powi(from as i32) / (T::one() - r))
            }
            Self::TruncatedLinear { horizon } => {
                let last = horizon.ceil().to_usize().unwrap_or(0);
                Some((from..=last).map(|t| self.value(T::from_count(t))).sum())
            }
            Self::Tabulated(table) => {
                if *table.values.last().expect("nonempty table") > T::zero() {
                    return None;
                }
                let last = table
                    .times
                    .last()
                    .expect("nonempty table")
                    .ceil()
                    .to_usize()
                    .unwrap_or(0);
                Some((from..=last).map(|t| self.value(T::from_count(t))).sum())
            }
            Self::Hyperbolic { .. } | Self::Constant => None,
        }
    }

    /// Finite-difference test of monotonicity and convexity on integer
    /// periods `0..=periods`.
    pub fn check_convex_decreasing(&self, periods: usize) -> Result<()> {
        let vals: Vec<T> = (0..=periods)
            .map(|t| self.value(T::from_count(t)))
            .collect();
        let slack = T::tolerance(SHAPE_TOL);
        for t in 1..vals.len() {
            if vals[t] > vals[t - 1] + slack {
                return Err(Error::NotConvexDiscount {
                    period: t,
                    residual: (vals[t - 1] - vals[t]).to_f64_lossy(),
                });
            }
            if t + 1 < vals.len() {
                let second = vals[t + 1] - lit::<T>(2.0) * vals[t] + vals[t - 1];
                if second < -slack {
                    return Err(Error::NotConvexDiscount {
                        period: t,
                        residual: second.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A discount evaluated on integer periods `t = 1, 2, ...`.
pub trait DiscountSequence<T> {
    fn at_period(&self, t: usize) -> T;
}

impl<T: Real> DiscountSequence<T> for DiscountFunction<T> {
    fn at_period(&self, t: usize) -> T {
        self.value(T::from_count(t))
    }
}

impl<T: Real> DiscountSequence<T> for [T] {
    /// Index 0 is period 1; periods past the end discount to zero.
    fn at_period(&self, t: usize) -> T {
        t.checked_sub(1)
            .and_then(|i| self.get(i).copied())
            .unwrap_or(T::zero())
    }
}

impl<T: Real> DiscountSequence<T> for Vec<T> {
    fn at_period(&self, t: usize) -> T {
        self.as_slice().at_period(t)
    }
}

/// `tau -> max(level + (tau - anchor) * slope, 0)` on integer periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearPiece<T> {
    pub anchor: usize,
    pub level: T,
    pub slope: T,
}

impl<T: Real> LinearPiece<T> {
    pub fn eval(&self, tau: usize) -> T {
        let offset = T::from_count(tau) - T::from_count(self.anchor);
        (self.level + offset * self.slope).max(T::zero())
    }

    /// Last period with positive weight, if any.
    pub fn last_positive_period(&self) -> Option<usize> {
        if self.level <= T::zero() && self.slope >= T::zero() {
            return None;
        }
        if self.slope >= T::zero() {
            return Some(usize::MAX);
        }
        let zero_at = T::from_count(self.anchor) + self.level / -self.slope;
        let last = zero_at.ceil().to_usize().unwrap_or(0).saturating_sub(1);
        Some(last)
    }
}

impl<T: Real> DiscountSequence<T> for LinearPiece<T> {
    fn at_period(&self, t: usize) -> T {
        self.eval(t)
    }
}

/// Sum of pieces, as a discount sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieceSum<T>(pub Vec<LinearPiece<T>>);

impl<T: Real> DiscountSequence<T> for PieceSum<T> {
    fn at_period(&self, t: usize) -> T {
        self.0.iter().map(|p| p.eval(t)).sum()
    }
}

/// Output of [`decompose_truncated_linear`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition<T> {
    pub horizon: usize,
    pub pieces: Vec<LinearPiece<T>>,
    /// `sum_{t >= horizon} rho_t`; `None` for non-summable families.
    pub tail_mass: Option<T>,
    /// `max_{1 <= t < horizon} |rho_t - sum_k piece_k(t)|`.
    pub reconstruction_error: T,
}

impl<T: Real> Decomposition<T> {
    pub fn piece_sum(&self) -> PieceSum<T> {
        PieceSum(self.pieces.clone())
    }
}

/// Splits a convex decreasing discount into truncated-linear pieces
/// anchored at `horizon, horizon - 2, ..., 2`.
///
/// Each piece is the secant through the current residual at
/// `(anchor - 1, anchor)`, clipped at zero; subtracting it leaves a convex
/// residual that vanishes from `anchor - 1` on. The pieces therefore sum to
/// `rho` on `1..=horizon` and stay below it afterwards. A residual that goes
/// negative, or a secant with positive slope, means `rho` is not convex
/// decreasing.
///
/// For summable families the tail `sum_{t >= horizon} rho_t` must be below
/// `eps`. Hyperbolic and constant discounts have no finite tail; their tail
/// is reported as `None` and the bound has to be enforced against
/// decision-time weights by the caller.
pub fn decompose_truncated_linear<T: Real>(
    rho: &DiscountFunction<T>,
    horizon: usize,
    eps: T,
) -> Result<Decomposition<T>> {
    if horizon < 2 || horizon % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "decomposition horizon must be an even integer >= 2, got {horizon}"
        )));
    }
    let tail_mass = rho.tail_sum(horizon);
    if let Some(tail) = tail_mass {
        if tail >= eps {
            return Err(Error::InvalidParameter(format!(
                "discount tail beyond period {horizon} is {tail}, not below eps = {eps}"
            )));
        }
    }
    let original: Vec<T> = (0..=horizon).map(|t| rho.at_period(t)).collect();
    let scale = original
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b.abs()));
    let slack = T::tolerance(SHAPE_TOL) * scale.max(T::one());
    let mut residual = original.clone();
    let mut pieces = Vec::new();
    let mut anchor = horizon;
    while anchor >= 2 {
        let level = residual[anchor];
        let slope = residual[anchor] - residual[anchor - 1];
        if slope > slack {
            return Err(Error::NotConvexDiscount {
                period: anchor,
                residual: slope.to_f64_lossy(),
            });
        }
        let piece = LinearPiece {
            anchor,
            level,
            slope: slope.min(T::zero()),
        };
        for (tau, r) in residual.iter_mut().enumerate().skip(1) {
            *r = *r - piece.eval(tau);
            if *r < -slack {
                return Err(Error::NotConvexDiscount {
                    period: tau,
                    residual: r.to_f64_lossy(),
                });
            }
        }
        // the secant points are matched exactly; clear rounding residue
        residual[anchor] = T::zero();
        residual[anchor - 1] = T::zero();
        if level.abs() > slack || piece.slope.abs() > slack {
            pieces.push(piece);
        }
        anchor -= 2;
    }
    let reconstruction_error = (1..horizon)
        .map(|t| (original[t] - pieces.iter().map(|p| p.eval(t)).sum::<T>()).abs())
        .fold(T::zero(), T::max);
    Ok(Decomposition {
        horizon,
        pieces,
        tail_mass,
        reconstruction_error,
    })
}

/// `E[rho_T]` for a decision time `T ~ dist`.
///
/// Closed forms are used where the pairing has one; otherwise tabulated
/// and empirical laws use right-point Stieltjes sums on their grid, and
/// the exponential law uses Simpson quadrature of `rho(t) * rate * e^{-rate t}`.
pub fn expected_discount<T: Real>(
    rho: &DiscountFunction<T>,
    dist: &DecisionTimeDistribution<T>,
) -> Result<T> {
    match dist.law() {
        TimeLaw::Deterministic { at } => Ok(rho.value(*at)),
        TimeLaw::Exponential { rate } => Ok(exponential_expectation(rho, *rate)),
        TimeLaw::Geometric { stop_prob } => Ok(geometric_expectation(rho, *stop_prob)),
        TimeLaw::Empirical { times, total } => {
            let decided: T = times.iter().map(|t| rho.value(*t)).sum();
            let n = T::from_count(*total);
            let missing = T::one() - T::from_count(times.len()) / n;
            let last = times.last().copied().unwrap_or(T::zero());
            check_tail(missing, rho.value(last))?;
            Ok(decided / n)
        }
        TimeLaw::Numeric => {
            let (grid, cdf) = (dist.grid(), dist.cdf());
            let mut acc = T::zero();
            let mut prev = T::zero();
            for (t, f) in grid.iter().zip(cdf) {
                acc = acc + rho.value(*t) * (*f - prev);
                prev = *f;
            }
            let last = grid.last().copied().unwrap_or(T::zero());
            check_tail(T::one() - prev, rho.value(last))?;
            Ok(acc)
        }
    }
}

fn check_tail<T: Real>(missing: T, rho_last: T) -> Result<()> {
    if missing * rho_last > lit(NEGLIGIBLE_TAIL) {
        return Err(Error::DivergentTail {
            missing_mass: missing.to_f64_lossy(),
            discount_at_horizon: rho_last.to_f64_lossy(),
        });
    }
    Ok(())
}

fn exponential_expectation<T: Real>(rho: &DiscountFunction<T>, rate: T) -> T {
    match rho {
        DiscountFunction::Exponential { rate: r } => rate / (rate + *r),
        DiscountFunction::Constant => T::one(),
        DiscountFunction::TruncatedLinear { horizon } => {
            // E[max(1 - T/h, 0)] = 1 - (1 - e^{-rate h}) / (rate h)
            let x = rate * *horizon;
            T::one() - (T::one() - (-x).exp()) / x
        }
        _ => {
            let upper = lit::<T>(40.0) / rate;
            let integrand = |t: T| rho.value(t) * rate * (-rate * t).exp();
            let mut knots = vec![T::zero()];
            if let DiscountFunction::Tabulated(table) = rho {
                knots.extend(
                    table
                        .times
                        .iter()
                        .copied()
                        .filter(|t| *t > T::zero() && *t < upper),
                );
            }
            knots.push(upper);
            knots
                .windows(2)
                .map(|w| {
                    let share = ((w[1] - w[0]) / upper * lit(20000.0))
                        .ceil()
                        .to_usize()
                        .unwrap_or(2);
                    simpson(integrand, w[0], w[1], share.max(2))
                })
                .sum()
        }
    }
}

fn geometric_expectation<T: Real>(rho: &DiscountFunction<T>, q: T) -> T {
    if q >= T::one() {
        return rho.at_period(1);
    }
    let survive = T::one() - q;
    let mut acc = T::zero();
    let mut weight = q;
    let mut t = 1usize;
    while weight > T::epsilon() * lit(1e-3) && t < 10_000_000 {
        acc = acc + rho.at_period(t) * weight;
        weight = weight * survive;
        t += 1;
    }
    acc
}
