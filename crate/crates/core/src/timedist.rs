//! Decision-time laws: means, integrated CDFs and the mean-preserving-spread
//! comparison.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{linspace, lit, Real};

/// Terminal CDF deficit still treated as proper.
pub const PROPERNESS_TOL: f64 = 1e-6;
/// Default band for the sign classification in [`sosd_compare`].
pub const DEFAULT_SOSD_TOL: f64 = 1e-6;
/// Interior points inserted per union-grid interval in [`sosd_compare`].
const OVERSAMPLE: usize = 10;
/// Width of the statistical band, in standard errors.
const SE_BAND: f64 = 3.0;
/// Monotonicity slack for user-supplied CDF tables.
const MONOTONE_TOL: f64 = 1e-12;

/// The analytic family behind a distribution, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeLaw<T> {
    Deterministic {
        at: T,
    },
    Exponential {
        rate: T,
    },
    /// Support `{1, 2, ...}` with `P(T = t) = q (1 - q)^(t - 1)`.
    Geometric {
        stop_prob: T,
    },
    /// Decided times (sorted) out of `total` paths; the rest are censored.
    Empirical {
        times: Vec<T>,
        total: usize,
    },
    /// Piecewise-linear CDF given by the tabulation grid.
    Numeric,
}

/// CDF of a decision time, tabulated on a grid and tagged with its law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionTimeDistribution<T> {
    law: TimeLaw<T>,
    grid: Vec<T>,
    cdf: Vec<T>,
    warnings: Vec<String>,
}

impl<T: Real> DecisionTimeDistribution<T> {
    pub fn deterministic(at: T) -> Result<Self> {
        if !(at >= T::zero() && at.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "decision time {at} must be finite and >= 0"
            )));
        }
        let end = if at > T::zero() {
            at * lit(3.0)
        } else {
            T::one()
        };
        let mut grid = linspace(T::zero(), end, 3001);
        grid[1000] = at;
        Ok(Self::tabulate(TimeLaw::Deterministic { at }, grid))
    }

    /// Exponential law on a default grid of `[0, 25 / rate]` with 25001 points.
    pub fn exponential(rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate {rate} must be positive"
            )));
        }
        let grid = linspace(T::zero(), lit::<T>(25.0) / rate, 25001);
        Ok(Self::tabulate(TimeLaw::Exponential { rate }, grid))
    }

    /// Geometric law on integer periods, tabulated until the survival drops
    /// below `1e-13`.
    pub fn geometric(stop_prob: T) -> Result<Self> {
        if !(stop_prob > T::zero() && stop_prob <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "stop probability {stop_prob} must be in (0, 1]"
            )));
        }
        let survive = T::one() - stop_prob;
        let mut n = 1usize;
        let mut s = survive;
        while s > lit(1e-13) && n < 10_000_000 {
            s = s * survive;
            n += 1;
        }
        let grid = (0..=n).map(T::from_count).collect();
        Ok(Self::tabulate(TimeLaw::Geometric { stop_prob }, grid))
    }

    /// Empirical law from decided times plus a count of censored samples.
    pub fn empirical(mut decided: Vec<T>, censored: usize) -> Result<Self> {
        if decided.iter().any(|t| !(t.is_finite() && *t >= T::zero())) {
            return Err(Error::InvalidParameter(
                "empirical times must be finite and >= 0".into(),
            ));
        }
        let total = decided.len() + censored;
        if total == 0 {
            return Err(Error::InvalidParameter(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        decided.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        let last = decided.last().copied().unwrap_or(T::one());
        let grid = linspace(T::zero(), last.max(lit(1e-12)), 2001);
        let mut out = Self::tabulate(
            TimeLaw::Empirical {
                times: decided,
                total,
            },
            grid,
        );
        if censored > 0 {
            out.warnings.push(format!(
                "{censored} of {total} samples censored at the horizon"
            ));
        }
        Ok(out)
    }

    /// Piecewise-linear CDF through `(grid, cdf)`.
    pub fn numeric(grid: Vec<T>, mut cdf: Vec<T>) -> Result<Self> {
        if grid.is_empty() || grid.len() != cdf.len() {
            return Err(Error::InvalidParameter(
                "grid and cdf must be nonempty and of equal length".into(),
            ));
        }
        if grid[0] < T::zero() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "grid must be increasing and start at t >= 0".into(),
            ));
        }
        let slack = T::tolerance(MONOTONE_TOL);
        for i in 0..cdf.len() {
            let f = cdf[i];
            if !f.is_finite() || f < -slack || f > T::one() + slack {
                return Err(Error::InvalidParameter(format!(
                    "cdf value {f} outside [0, 1]"
                )));
            }
            if i > 0 && f < cdf[i - 1] - slack {
                return Err(Error::InvalidParameter(format!(
                    "cdf decreases at t = {}",
                    grid[i]
                )));
            }
            cdf[i] = f
                .max(if i > 0 { cdf[i - 1] } else { T::zero() })
                .min(T::one());
        }
        let mut out = Self {
            law: TimeLaw::Numeric,
            grid,
            cdf,
            warnings: Vec::new(),
        };
        let terminal = out.terminal_mass();
        if terminal < T::one() - lit(PROPERNESS_TOL) {
            out.warnings.push(format!(
                "terminal cdf {terminal} below 1 - {PROPERNESS_TOL:e}"
            ));
        }
        Ok(out)
    }

    /// Same law, re-tabulated on `grid`. Numeric laws keep their own grid.
    pub fn with_grid(self, grid: Vec<T>) -> Self {
        match self.law {
            TimeLaw::Numeric => self,
            law => {
                let warnings = self.warnings;
                let mut out = Self::tabulate(law, grid);
                out.warnings = warnings;
                out
            }
        }
    }

    fn tabulate(law: TimeLaw<T>, grid: Vec<T>) -> Self {
        let mut out = Self {
            law,
            grid,
            cdf: Vec::new(),
            warnings: Vec::new(),
        };
        out.cdf = out.grid.iter().map(|t| out.cdf_at(*t)).collect();
        out
    }

    pub(crate) fn push_warning(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn law(&self) -> &TimeLaw<T> {
        &self.law
    }

    pub fn kind(&self) -> &'static str {
        match self.law {
            TimeLaw::Deterministic { .. } => "deterministic",
            TimeLaw::Exponential { .. } => "exponential",
            TimeLaw::Geometric { .. } => "geometric",
            TimeLaw::Empirical { .. } => "empirical",
            TimeLaw::Numeric => "numeric",
        }
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn cdf(&self) -> &[T] {
        &self.cdf
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of samples behind an empirical law.
    pub fn sample_count(&self) -> Option<usize> {
        match &self.law {
            TimeLaw::Empirical { total, .. } => Some(*total),
            _ => None,
        }
    }

    /// `P(T <= t)`.
    pub fn cdf_at(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        match &self.law {
            TimeLaw::Deterministic { at } => {
                if t >= *at {
                    T::one()
                } else {
                    T::zero()
                }
            }
            TimeLaw::Exponential { rate } => T::one() - (-*rate * t).exp(),
            TimeLaw::Geometric { stop_prob } => T::one() - (T::one() - *stop_prob).powf(t.floor()),
            TimeLaw::Empirical { times, total } => {
                T::from_count(times.partition_point(|x| *x <= t)) / T::from_count(*total)
            }
            TimeLaw::Numeric => interpolate(&self.grid, &self.cdf, t),
        }
    }

    /// `P(T <= infinity)` as far as the law can tell.
    pub fn terminal_mass(&self) -> T {
        match &self.law {
            TimeLaw::Empirical { times, total } => {
                T::from_count(times.len()) / T::from_count(*total)
            }
            TimeLaw::Numeric => *self.cdf.last().expect("nonempty cdf"),
            _ => T::one(),
        }
    }

    pub fn is_proper(&self) -> bool {
        self.terminal_mass() >= T::one() - lit(PROPERNESS_TOL)
    }

    /// Censored fraction of an empirical law (zero otherwise).
    pub fn censored_mass(&self) -> T {
        match self.law {
            TimeLaw::Empirical { .. } => T::one() - self.terminal_mass(),
            _ => T::zero(),
        }
    }

    /// `E[T]`. Empirical laws average the decided samples only; tabulated
    /// laws must be proper.
    pub fn mean(&self) -> Result<T> {
        match &self.law {
            TimeLaw::Deterministic { at } => Ok(*at),
            TimeLaw::Exponential { rate } => Ok(T::one() / *rate),
            TimeLaw::Geometric { stop_prob } => Ok(T::one() / *stop_prob),
            TimeLaw::Empirical { times, .. } => {
                if times.is_empty() {
                    return Err(Error::ImproperDistribution { terminal_cdf: 0.0 });
                }
                Ok(times.iter().copied().sum::<T>() / T::from_count(times.len()))
            }
            TimeLaw::Numeric => {
                self.require_proper()?;
                // survival is 1 before the first knot, then trapezoid
                let mut acc = self.grid[0];
                for i in 1..self.grid.len() {
                    let h = self.grid[i] - self.grid[i - 1];
                    acc = acc + h * (lit::<T>(2.0) - self.cdf[i] - self.cdf[i - 1]) / lit(2.0);
                }
                Ok(acc)
            }
        }
    }

    /// Standard error of the mean for empirical laws.
    pub fn mean_standard_error(&self) -> Option<T> {
        match &self.law {
            TimeLaw::Empirical { times, .. } if times.len() > 1 => {
                let n = T::from_count(times.len());
                let m = times.iter().copied().sum::<T>() / n;
                let var = times.iter().map(|t| (*t - m) * (*t - m)).sum::<T>() / (n - T::one());
                Some((var / n).sqrt())
            }
            _ => None,
        }
    }

    fn require_proper(&self) -> Result<()> {
        if self.is_proper() {
            Ok(())
        } else {
            Err(Error::ImproperDistribution {
                terminal_cdf: self.terminal_mass().to_f64_lossy(),
            })
        }
    }

    /// `int_0^s F(t) dt`.
    pub fn integrated_cdf(&self, s: T) -> T {
        self.integrated_cdf_on(&[s])[0]
    }

    /// [`Self::integrated_cdf`] at each point of an increasing sequence.
    pub fn integrated_cdf_on(&self, points: &[T]) -> Vec<T> {
        match &self.law {
            TimeLaw::Deterministic { at } => {
                points.iter().map(|s| (*s - *at).max(T::zero())).collect()
            }
            TimeLaw::Exponential { rate } => points
                .iter()
                .map(|s| {
                    if *s <= T::zero() {
                        T::zero()
                    } else {
                        // s - (1 - e^{-rs}) / r, written to avoid cancellation
                        let x = *rate * *s;
                        let tail = if x < lit(1e-3) {
                            x * x / lit::<T>(2.0) - x * x * x / lit::<T>(6.0)
                                + x * x * x * x / lit::<T>(24.0)
                        } else {
                            x - (-(-x).exp_m1())
                        };
                        tail / *rate
                    }
                })
                .collect(),
            TimeLaw::Geometric { stop_prob } => {
                let r = T::one() - *stop_prob;
                points
                    .iter()
                    .map(|s| {
                        if *s <= T::zero() {
                            return T::zero();
                        }
                        let n = s.floor();
                        let whole = if *stop_prob >= T::one() {
                            (n - T::one()).max(T::zero())
                        } else {
                            n - (T::one() - r.powf(n)) / *stop_prob
                        };
                        whole + (*s - n) * (T::one() - r.powf(n))
                    })
                    .collect()
            }
            TimeLaw::Empirical { times, total } => {
                let n = T::from_count(*total);
                let mut out = Vec::with_capacity(points.len());
                let (mut idx, mut count, mut sum) = (0usize, T::zero(), T::zero());
                for s in points {
                    while idx < times.len() && times[idx] <= *s {
                        sum = sum + times[idx];
                        count = count + T::one();
                        idx += 1;
                    }
                    out.push((count * *s - sum) / n);
                }
                out
            }
            TimeLaw::Numeric => {
                let mut out = Vec::with_capacity(points.len());
                let (g, f) = (&self.grid, &self.cdf);
                // F is zero before g[0] (no mass before the first knot)
                let mut acc = T::zero();
                let mut seg = 0usize;
                for s in points {
                    if *s <= g[0] {
                        out.push(T::zero());
                        continue;
                    }
                    while seg + 1 < g.len() && g[seg + 1] <= *s {
                        acc = acc + (g[seg + 1] - g[seg]) * (f[seg] + f[seg + 1]) / lit(2.0);
                        seg += 1;
                    }
                    let partial = if seg + 1 < g.len() {
                        let fs = interpolate(g, f, *s);
                        (*s - g[seg]) * (f[seg] + fs) / lit(2.0)
                    } else {
                        (*s - g[seg]) * f[seg]
                    };
                    out.push(acc + partial);
                }
                out
            }
        }
    }

    /// Pointwise standard error of the integrated CDF for empirical laws:
    /// `sd((s - T)^+) / sqrt(n)` at each point of an increasing sequence.
    pub fn integrated_cdf_se_on(&self, points: &[T]) -> Option<Vec<T>> {
        let TimeLaw::Empirical { times, total } = &self.law else {
            return None;
        };
        let n = T::from_count(*total);
        let (mut idx, mut count, mut sum, mut sum_sq) = (0usize, T::zero(), T::zero(), T::zero());
        let mut out = Vec::with_capacity(points.len());
        for s in points {
            while idx < times.len() && times[idx] <= *s {
                sum = sum + times[idx];
                sum_sq = sum_sq + times[idx] * times[idx];
                count = count + T::one();
                idx += 1;
            }
            let first = (count * *s - sum) / n;
            let second = (count * *s * *s - lit::<T>(2.0) * *s * sum + sum_sq) / n;
            let var = (second - first * first).max(T::zero());
            out.push((var / n).sqrt());
        }
        Some(out)
    }

    /// Density on the tabulation grid: analytic for exponential laws, central
    /// differences of the CDF otherwise.
    pub fn pdf_table(&self) -> Vec<(T, T)> {
        let g = &self.grid;
        match &self.law {
            TimeLaw::Exponential { rate } => g
                .iter()
                .map(|t| (*t, *rate * (-*rate * *t).exp()))
                .collect(),
            _ => (0..g.len())
                .map(|i| {
                    let lo = i.saturating_sub(1);
                    let hi = (i + 1).min(g.len() - 1);
                    let d = if hi > lo {
                        (self.cdf[hi] - self.cdf[lo]) / (g[hi] - g[lo])
                    } else {
                        T::zero()
                    };
                    (g[i], d)
                })
                .collect(),
        }
    }

    /// Writes `t,cdf` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "cdf"]).map_err(io_err)?;
        for (t, f) in self.grid.iter().zip(&self.cdf) {
            w.write_record([format_real(*t), format_real(*f)])
                .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Reads `t,cdf` rows into a numeric law.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut grid = Vec::new();
        let mut cdf = Vec::new();
        for row in r.records() {
            let row = row.map_err(io_err)?;
            let parse = |i: usize| -> Result<T> {
                row.get(i)
                    .and_then(|s| s.trim().parse::<T>().ok())
                    .ok_or_else(|| Error::Io(format!("malformed csv row {:?}", row)))
            };
            grid.push(parse(0)?);
            cdf.push(parse(1)?);
        }
        Self::numeric(grid, cdf)
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Shortest representation that parses back to the same value.
fn format_real<T: Real>(x: T) -> String {
    format!("{x:?}")
}

fn interpolate<T: Real>(grid: &[T], values: &[T], t: T) -> T {
    if t < grid[0] {
        return T::zero();
    }
    let idx = grid.partition_point(|x| *x <= t);
    if idx >= grid.len() {
        return values[values.len() - 1];
    }
    let (t0, t1) = (grid[idx - 1], grid[idx]);
    values[idx - 1] + (values[idx] - values[idx - 1]) * (t - t0) / (t1 - t0)
}

/// Mean-preserving-spread order between two decision-time laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SosdVerdict {
    /// The second law is riskier: its integrated CDF lies weakly above.
    SecondIsMpsOfFirst,
    FirstIsMpsOfSecond,
    Equal,
    Incomparable {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SosdReport<T> {
    pub verdict: SosdVerdict,
    /// `max_s |I_2(s) - I_1(s)|` on the comparison grid.
    pub max_gap: T,
    pub argmax_s: T,
    pub mean_gap: T,
}

/// Classifies `D(s) = int_0^s F_2 - int_0^s F_1` on the union of both grids
/// refined tenfold. Signs within `tol` of zero (or within three standard
/// errors for empirical laws) count as zero.
pub fn sosd_compare<T: Real>(
    d1: &DecisionTimeDistribution<T>,
    d2: &DecisionTimeDistribution<T>,
    tol: T,
) -> SosdReport<T> {
    let incomparable = |reason: String, mean_gap: T| SosdReport {
        verdict: SosdVerdict::Incomparable { reason },
        max_gap: T::nan(),
        argmax_s: T::nan(),
        mean_gap,
    };
    for (name, d) in [("first", d1), ("second", d2)] {
        if d.sample_count().is_none() && !d.is_proper() {
            return incomparable(format!("{name} distribution is improper"), T::nan());
        }
    }
    let (m1, m2) = match (d1.mean(), d2.mean()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return incomparable("mean undefined".into(), T::nan()),
    };
    let mean_gap = m2 - m1;
    let se = |d: &DecisionTimeDistribution<T>| d.mean_standard_error().unwrap_or(T::zero());
    let mean_band = tol.max(lit::<T>(SE_BAND) * (se(d1).powi(2) + se(d2).powi(2)).sqrt());
    if mean_gap.abs() > mean_band {
        return incomparable(format!("means differ: {m1} vs {m2}"), mean_gap);
    }

    let points = comparison_grid(d1.grid(), d2.grid());
    let i1 = d1.integrated_cdf_on(&points);
    let i2 = d2.integrated_cdf_on(&points);
    let se1 = d1.integrated_cdf_se_on(&points);
    let se2 = d2.integrated_cdf_se_on(&points);
    let (mut above, mut below) = (false, false);
    let (mut max_gap, mut argmax_s) = (T::zero(), T::zero());
    for k in 0..points.len() {
        let gap = i2[k] - i1[k];
        let stat_var = se1.as_ref().map_or(T::zero(), |v| v[k] * v[k])
            + se2.as_ref().map_or(T::zero(), |v| v[k] * v[k]);
        let band = tol.max(lit::<T>(SE_BAND) * stat_var.sqrt());
        above |= gap > band;
        below |= gap < -band;
        if gap.abs() > max_gap {
            max_gap = gap.abs();
            argmax_s = points[k];
        }
    }
    let verdict = match (above, below) {
        (false, false) => SosdVerdict::Equal,
        (true, false) => SosdVerdict::SecondIsMpsOfFirst,
        (false, true) => SosdVerdict::FirstIsMpsOfSecond,
        (true, true) => SosdVerdict::Incomparable {
            reason: "integrated CDFs cross".into(),
        },
    };
    SosdReport {
        verdict,
        max_gap,
        argmax_s,
        mean_gap,
    }
}

fn comparison_grid<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut knots: Vec<T> = a.iter().chain(b).copied().collect();
    knots.sort_by(|x, y| x.partial_cmp(y).expect("finite grid"));
    knots.dedup();
    let mut out = Vec::with_capacity(knots.len() * OVERSAMPLE);
    for w in knots.windows(2) {
        let step = (w[1] - w[0]) / T::from_count(OVERSAMPLE);
        for j in 0..OVERSAMPLE {
            out.push(w[0] + step * T::from_count(j));
        }
    }
    out.extend(knots.last().copied());
    out
}

/// `|E[T] - I_bar / c| <= tol`: the strategy wastes no capacity.
pub fn exhaustiveness_check<T: Real>(
    d: &DecisionTimeDistribution<T>,
    c: T,
    info_total: T,
    tol: T,
) -> Result<bool> {
    if !(c > T::zero() && info_total > T::zero()) {
        return Err(Error::InvalidParameter(
            "capacity and total information must be positive".into(),
        ));
    }
    Ok((d.mean()? - info_total / c).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type DecisionTimeDistribution = super::DecisionTimeDistribution<f64>;

    fn e() -> f64 {
        std::f64::consts::E
    }

    #[test]
    fn mean_examples() {
        assert_eq!(
            DecisionTimeDistribution::deterministic(1.0)
                .unwrap()
                .mean()
                .unwrap(),
            1.0
        );
        assert!(
            (DecisionTimeDistribution::exponential(1.0)
                .unwrap()
                .mean()
                .unwrap()
                - 1.0)
                .abs()
                < 1e-6
        );
        assert_eq!(
            DecisionTimeDistribution::geometric(0.5)
                .unwrap()
                .mean()
                .unwrap(),
            2.0
        );
    }

    #[test]
    fn numeric_mean_and_sum_of_survival_agree_with_geometric() {
        // the tabulated geometric CDF is a step function; a numeric table
        // with steps makes the trapezoid mean equal the survival sum
        let geo = DecisionTimeDistribution::geometric(0.5).unwrap();
        let mut grid = Vec::new();
        let mut cdf = Vec::new();
        for (t, f) in geo.grid().iter().zip(geo.cdf()) {
            if *t > 0.0 {
                grid.push(*t - 1e-9);
                cdf.push(geo.cdf_at(*t - 1e-9));
            }
            grid.push(*t);
            cdf.push(*f);
        }
        let numeric = DecisionTimeDistribution::numeric(grid, cdf).unwrap();
        assert!((numeric.mean().unwrap() - 2.0).abs() < 1e-7);
    }

    #[test]
    fn integrated_cdf_examples() {
        let det = DecisionTimeDistribution::deterministic(1.0).unwrap();
        assert_eq!(det.integrated_cdf(1.0), 0.0);
        let expo = DecisionTimeDistribution::exponential(1.0).unwrap();
        assert!((expo.integrated_cdf(1.0) - 1.0 / e()).abs() < 1e-15);
        for d in [
            &det,
            &expo,
            &DecisionTimeDistribution::geometric(0.3).unwrap(),
        ] {
            assert_eq!(d.integrated_cdf(0.0), 0.0);
        }
    }

    #[test]
    fn numeric_integrated_cdf_matches_analytic() {
        let expo = DecisionTimeDistribution::exponential(1.0).unwrap();
        let table =
            DecisionTimeDistribution::numeric(expo.grid().to_vec(), expo.cdf().to_vec()).unwrap();
        let pts = [0.0, 0.3, 1.0, 2.5, 30.0];
        let a = expo.integrated_cdf_on(&pts);
        let b = table.integrated_cdf_on(&pts);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn geometric_integrated_cdf_matches_step_sum() {
        let q = 0.3;
        let geo = DecisionTimeDistribution::geometric(q).unwrap();
        let s = 4.6;
        let h = 1e-5;
        let n = (s / h) as usize;
        let brute: f64 = (0..n).map(|i| geo.cdf_at((i as f64 + 0.5) * h) * h).sum();
        assert!((geo.integrated_cdf(s) - brute).abs() < 1e-5);
    }

    #[test]
    fn sosd_examples() {
        let det = DecisionTimeDistribution::deterministic(1.0).unwrap();
        let expo = DecisionTimeDistribution::exponential(1.0).unwrap();
        let r = sosd_compare(&det, &expo, 1e-6);
        assert_eq!(r.verdict, SosdVerdict::SecondIsMpsOfFirst);
        assert!((r.argmax_s - 1.0).abs() < 1e-2);
        assert!((r.max_gap - 1.0 / e()).abs() < 1e-6);
        let r = sosd_compare(&expo, &det, 1e-6);
        assert_eq!(r.verdict, SosdVerdict::FirstIsMpsOfSecond);
        assert_eq!(sosd_compare(&expo, &expo, 1e-6).verdict, SosdVerdict::Equal);
    }

    #[test]
    fn sosd_rejects_unequal_means() {
        let a = DecisionTimeDistribution::deterministic(1.0).unwrap();
        let b = DecisionTimeDistribution::exponential(0.5).unwrap();
        assert!(matches!(
            sosd_compare(&a, &b, 1e-6).verdict,
            SosdVerdict::Incomparable { .. }
        ));
    }

    #[test]
    fn sosd_detects_crossing() {
        // equal means of 1, but {0, 2} is riskier early and {0.5, 2.5} late
        let rep = |xs: &[f64]| {
            xs.iter()
                .flat_map(|x| std::iter::repeat_n(*x, 5000))
                .collect::<Vec<_>>()
        };
        let a = DecisionTimeDistribution::empirical(rep(&[0.0, 2.0]), 0).unwrap();
        let b = DecisionTimeDistribution::empirical(rep(&[0.5, 0.5, 0.5, 2.5]), 0).unwrap();
        let r = sosd_compare(&a, &b, 1e-9);
        assert!(
            matches!(r.verdict, SosdVerdict::Incomparable { .. }),
            "{r:?}"
        );
    }

    #[test]
    fn exhaustiveness_examples() {
        let geo = DecisionTimeDistribution::geometric(0.5).unwrap();
        assert!(exhaustiveness_check(&geo, 1.0, 2.0, 1e-12).unwrap());
        let det = DecisionTimeDistribution::deterministic(2.0).unwrap();
        assert!(exhaustiveness_check(&det, 1.0, 2.0, 1e-12).unwrap());
        assert!(!exhaustiveness_check(&det, 1.0, 1.0, 1e-6).unwrap());
    }

    #[test]
    fn improper_numeric_law_has_no_mean() {
        let d = DecisionTimeDistribution::numeric(vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
        assert!(!d.is_proper());
        assert!(!d.warnings().is_empty());
        assert!(matches!(d.mean(), Err(Error::ImproperDistribution { .. })));
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(DecisionTimeDistribution::numeric(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(DecisionTimeDistribution::numeric(vec![1.0, 0.5], vec![0.0, 1.0]).is_err());
        assert!(DecisionTimeDistribution::numeric(vec![0.0, 1.0], vec![0.0, 1.5]).is_err());
        assert!(DecisionTimeDistribution::empirical(vec![], 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let d = DecisionTimeDistribution::exponential(0.7).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = DecisionTimeDistribution::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), d.grid());
        for (a, b) in back.cdf().iter().zip(d.cdf()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn empirical_standard_errors() {
        let d = DecisionTimeDistribution::empirical(vec![1.0, 3.0], 0).unwrap();
        assert_eq!(d.mean().unwrap(), 2.0);
        assert!((d.mean_standard_error().unwrap() - 1.0).abs() < 1e-12);
        let se = d.integrated_cdf_se_on(&[0.5, 2.0, 4.0]).unwrap();
        assert_eq!(se[0], 0.0);
        // (s - T)^+ at s = 4 is {3, 1}: population sd 1, n = 2
        assert!((se[2] - (0.5f64).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn integrated_cdf_is_convex(rate in 0.1f64..5.0, q in 0.05f64..1.0) {
            for d in [
                DecisionTimeDistribution::exponential(rate).unwrap(),
                DecisionTimeDistribution::geometric(q).unwrap(),
            ] {
                let pts: Vec<f64> = linspace(0.0, 3.0 / rate.min(q), 400);
                let vals = d.integrated_cdf_on(&pts);
                for w in vals.windows(3) {
                    prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12);
                }
            }
        }

        #[test]
        fn spread_never_lowers_convex_discount(mean in 0.2f64..4.0, r in 0.05f64..3.0) {
            use crate::discount::expected_discount;
            type DiscountFunction = crate::discount::DiscountFunction<f64>;
            let det = DecisionTimeDistribution::deterministic(mean).unwrap();
            let expo = DecisionTimeDistribution::exponential(1.0 / mean).unwrap();
            prop_assert_eq!(sosd_compare(&det, &expo, 1e-6).verdict, SosdVerdict::SecondIsMpsOfFirst);
            for rho in [
                DiscountFunction::exponential(r).unwrap(),
                DiscountFunction::hyperbolic(r).unwrap(),
                DiscountFunction::truncated_linear(10.0 * r).unwrap(),
            ] {
                let a = expected_discount(&rho, &det).unwrap();
                let b = expected_discount(&rho, &expo).unwrap();
                prop_assert!(b >= a - 1e-9);
            }
        }
    }
}
