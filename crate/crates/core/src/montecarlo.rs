//! Seeded path simulation of Poisson and Gaussian learning, plus the
//! statistical audits run on the resulting bundles.
//!
//! Every path owns a ChaCha stream selected by its index, so a bundle does
//! not depend on how rayon schedules the work.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpt::FptProblem;
use crate::measure::{Belief, PosteriorLottery, UncertaintyMeasure};
use crate::scalar::{lit, Real};
use crate::strategies::StrategySpec;
use crate::timedist::DecisionTimeDistribution;

/// Bridge crossing exponents above this are treated as "no crossing".
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub n_paths: usize,
    pub dt: T,
    pub seed: u64,
    pub horizon: T,
    /// Times at which every path's belief is recorded, ascending.
    pub checkpoints: Vec<T>,
    /// Brownian-bridge test for barrier crossings inside a step.
    pub bridge: bool,
}

impl<T: Real> SimConfig<T> {
    pub fn new(n_paths: usize, dt: T, seed: u64, horizon: T) -> Result<Self> {
        let cfg = Self {
            n_paths,
            dt,
            seed,
            horizon,
            checkpoints: Vec::new(),
            bridge: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<T>) -> Result<Self> {
        self.checkpoints = checkpoints;
        self.validate()?;
        Ok(self)
    }

    pub fn with_bridge(mut self, bridge: bool) -> Self {
        self.bridge = bridge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step {} must be positive",
                self.dt
            )));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(
                "horizon must be finite and at least one step".into(),
            ));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1])
            || self
                .checkpoints
                .iter()
                .any(|t| *t < T::zero() || *t > self.horizon)
        {
            return Err(Error::InvalidParameter(
                "checkpoints must be ascending within [0, horizon]".into(),
            ));
        }
        Ok(())
    }

    fn rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle<T> {
    pub prior: Belief<T>,
    pub horizon: T,
    pub checkpoints: Vec<T>,
    /// `None` for paths still undecided at the horizon.
    pub decision_times: Vec<Option<T>>,
    /// Belief when the path stopped, or at the horizon if censored.
    pub terminal: Vec<Belief<T>>,
    /// `snapshots[k][path]` is the belief at `checkpoints[k]`.
    pub snapshots: Vec<Vec<Belief<T>>>,
}

struct PathRecord<T> {
    time: Option<T>,
    terminal: Belief<T>,
    snapshots: Vec<Belief<T>>,
}

impl<T: Real> PathBundle<T> {
    fn assemble(prior: Belief<T>, cfg: &SimConfig<T>, records: Vec<PathRecord<T>>) -> Self {
        let mut snapshots = vec![Vec::with_capacity(records.len()); cfg.checkpoints.len()];
        let mut decision_times = Vec::with_capacity(records.len());
        let mut terminal = Vec::with_capacity(records.len());
        for r in records {
            decision_times.push(r.time);
            terminal.push(r.terminal);
            for (k, s) in r.snapshots.into_iter().enumerate() {
                snapshots[k].push(s);
            }
        }
        Self {
            prior,
            horizon: cfg.horizon,
            checkpoints: cfg.checkpoints.clone(),
            decision_times,
            terminal,
            snapshots,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.decision_times.len()
    }

    pub fn decided(&self) -> impl Iterator<Item = (T, &Belief<T>)> {
        self.decision_times
            .iter()
            .zip(&self.terminal)
            .filter_map(|(t, b)| t.map(|t| (t, b)))
    }

    pub fn censored_count(&self) -> usize {
        self.decision_times.iter().filter(|t| t.is_none()).count()
    }

    pub fn censored_mass(&self) -> T {
        T::from_count(self.censored_count()) / T::from_count(self.n_paths())
    }

    /// Empirical decision-time law; censored paths enter as missing mass.
    pub fn time_distribution(&self) -> Result<DecisionTimeDistribution<T>> {
        let decided: Vec<T> = self.decision_times.iter().flatten().copied().collect();
        DecisionTimeDistribution::empirical(decided, self.censored_count())
    }

    /// Mean decision time over decided paths with its standard error.
    pub fn mean_time(&self) -> Result<Estimate<T>> {
        let times: Vec<T> = self.decision_times.iter().flatten().copied().collect();
        Estimate::from_samples(&times).ok_or(Error::ImproperDistribution { terminal_cdf: 0.0 })
    }

    /// Fraction of decided paths whose terminal belief satisfies `pred`.
    pub fn decided_fraction<F: Fn(&Belief<T>) -> bool>(&self, pred: F) -> Result<Estimate<T>> {
        let hits: Vec<T> = self
            .decided()
            .map(|(_, b)| if pred(b) { T::one() } else { T::zero() })
            .collect();
        Estimate::from_samples(&hits).ok_or(Error::ImproperDistribution { terminal_cdf: 0.0 })
    }

    /// Whether every decided path stopped on a posterior of `target`.
    pub fn terminal_in_support(&self, target: &PosteriorLottery<T>, tol: T) -> bool {
        self.decided().all(|(_, b)| {
            target
                .atoms()
                .iter()
                .any(|a| a.prob > T::zero() && a.posterior.distance(b) <= tol)
        })
    }

    /// Empirical frequency of each atom of `target` among decided paths.
    pub fn atom_frequencies(&self, target: &PosteriorLottery<T>, tol: T) -> Vec<AtomFrequency<T>> {
        let decided: Vec<&Belief<T>> = self.decided().map(|(_, b)| b).collect();
        let n = T::from_count(decided.len().max(1));
        target
            .atoms()
            .iter()
            .map(|a| {
                let hits = decided
                    .iter()
                    .filter(|b| a.posterior.distance(b) <= tol)
                    .count();
                AtomFrequency {
                    prob: a.prob,
                    frequency: T::from_count(hits) / n,
                    standard_error: (a.prob * (T::one() - a.prob) / n).sqrt(),
                }
            })
            .collect()
    }

    pub fn summary(&self) -> Result<BundleSummary<T>> {
        let mean = self.mean_time().ok();
        Ok(BundleSummary {
            n_paths: self.n_paths(),
            censored: self.censored_count(),
            censored_mass: self.censored_mass(),
            mean_time: mean.map(|m| m.value),
            mean_time_se: mean.map(|m| m.standard_error),
            horizon: self.horizon,
        })
    }

    /// `path,time` rows; censored paths have an empty time.
    pub fn write_times_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path", "time"]).map_err(io)?;
        for (i, t) in self.decision_times.iter().enumerate() {
            let time = t.map(|t| format!("{t:?}")).unwrap_or_default();
            w.write_record([i.to_string(), time]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundleSummary<T> {
    pub n_paths: usize,
    pub censored: usize,
    pub censored_mass: T,
    pub mean_time: Option<T>,
    pub mean_time_se: Option<T>,
    pub horizon: T,
}

/// Sample mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub standard_error: T,
    pub n: usize,
}

impl<T: Real> Estimate<T> {
    pub fn from_samples(xs: &[T]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = T::from_count(xs.len());
        let mean = xs.iter().copied().sum::<T>() / n;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / (n - T::one());
            (var / n).sqrt()
        } else {
            T::zero()
        };
        Some(Self {
            value: mean,
            standard_error: se,
            n: xs.len(),
        })
    }

    /// `|value - target|` in standard errors; zero when both vanish.
    pub fn z_score(&self, target: T) -> T {
        let gap = (self.value - target).abs();
        if gap == T::zero() {
            T::zero()
        } else {
            gap / self.standard_error
        }
    }

    pub fn within(&self, target: T, n_se: T) -> bool {
        self.z_score(target) <= n_se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomFrequency<T> {
    pub prob: T,
    pub frequency: T,
    pub standard_error: T,
}

impl<T: Real> AtomFrequency<T> {
    pub fn z_score(&self) -> T {
        Estimate {
            value: self.frequency,
            standard_error: self.standard_error,
            n: 0,
        }
        .z_score(self.prob)
    }
}

/// Poisson learning for `spec`: the target signal arrives at rate `c / I_bar`.
pub fn simulate_poisson<T: Real>(
    spec: &StrategySpec<T>,
    cfg: &SimConfig<T>,
) -> Result<PathBundle<T>> {
    simulate_arrivals(&spec.target, spec.poisson_rate(), cfg)
}

/// The belief jumps from the prior to a draw from `target` at the first
/// arrival of a rate-`rate` Poisson process, and stays there.
pub fn simulate_arrivals<T: Real>(
    target: &PosteriorLottery<T>,
    rate: T,
    cfg: &SimConfig<T>,
) -> Result<PathBundle<T>> {
    cfg.validate()?;
    if !(rate > T::zero() && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "arrival rate {rate} must be positive"
        )));
    }
    let atoms = target.atoms();
    let mut cumulative = Vec::with_capacity(atoms.len());
    let mut acc = T::zero();
    for a in atoms {
        acc = acc + a.prob;
        cumulative.push(acc);
    }
    let prior = target.prior().clone();
    let records = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i);
            let arrival = T::sample_exp1(&mut rng) / rate;
            let u = T::sample_unit(&mut rng) * acc;
            let pick = cumulative.partition_point(|c| *c <= u).min(atoms.len() - 1);
            let posterior = &atoms[pick].posterior;
            let decided = arrival <= cfg.horizon;
            let snapshots = cfg
                .checkpoints
                .iter()
                .map(|t| {
                    if decided && arrival <= *t {
                        posterior.clone()
                    } else {
                        prior.clone()
                    }
                })
                .collect();
            PathRecord {
                time: decided.then_some(arrival),
                terminal: if decided {
                    posterior.clone()
                } else {
                    prior.clone()
                },
                snapshots,
            }
        })
        .collect();
    Ok(PathBundle::assemble(prior, cfg, records))
}

/// Euler paths of `dX = sqrt(sigma2) dB`, absorbed at the barriers.
///
/// Increments are exact Gaussian, so the only discretization error is a
/// missed crossing inside a step; with `cfg.bridge` each step is also
/// absorbed with the bridge crossing probability
/// `exp(-2 (x - b)(x' - b) / (sigma2 dt))`.
pub fn simulate_gaussian<T: Real>(
    problem: &FptProblem<T>,
    cfg: &SimConfig<T>,
) -> Result<PathBundle<T>> {
    cfg.validate()?;
    let steps = (cfg.horizon / cfg.dt)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX);
    let snap_steps: Vec<usize> = cfg
        .checkpoints
        .iter()
        .map(|t| (*t / cfg.dt).round().to_usize().unwrap_or(0).min(steps))
        .collect();
    let scale = (problem.sigma2 * cfg.dt).sqrt();
    let bridge_scale = lit::<T>(-2.0) / (problem.sigma2 * cfg.dt);
    let cutoff = lit::<T>(-BRIDGE_CUTOFF);
    let crossing = |x: T, y: T, b: T| -> T {
        let e = bridge_scale * (x - b) * (y - b);
        if e < cutoff {
            T::zero()
        } else {
            e.exp()
        }
    };
    let belief = |x: T| Belief::binary(x.max(T::zero()).min(T::one())).expect("clamped to [0, 1]");
    let records = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i);
            let mut x = problem.start;
            let mut snaps = Vec::with_capacity(snap_steps.len());
            let mut next_snap = 0;
            let mut stopped: Option<(T, T)> = None;
            for k in 0..steps {
                while next_snap < snap_steps.len() && snap_steps[next_snap] == k {
                    snaps.push(x);
                    next_snap += 1;
                }
                let y = x + scale * T::sample_standard_normal(&mut rng);
                let t = T::from_count(k + 1) * cfg.dt;
                if y <= problem.lo {
                    stopped = Some((t, problem.lo));
                } else if y >= problem.hi {
                    stopped = Some((t, problem.hi));
                } else if cfg.bridge {
                    let p_lo = crossing(x, y, problem.lo);
                    let p_hi = crossing(x, y, problem.hi);
                    if p_lo + p_hi > T::zero() {
                        let u = T::sample_unit(&mut rng);
                        if u < p_lo {
                            stopped = Some((t, problem.lo));
                        } else if u < p_lo + p_hi {
                            stopped = Some((t, problem.hi));
                        }
                    }
                }
                if let Some((_, b)) = stopped {
                    x = b;
                    break;
                }
                x = y;
            }
            while snaps.len() < snap_steps.len() {
                snaps.push(x);
            }
            PathRecord {
                time: stopped.map(|(t, _)| t),
                terminal: belief(x),
                snapshots: snaps.into_iter().map(belief).collect(),
            }
        })
        .collect();
    let prior = belief(problem.start);
    Ok(PathBundle::assemble(prior, cfg, records))
}

/// Per-checkpoint deviation of the mean belief from the prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleCheck<T> {
    pub t: T,
    /// One entry per state.
    pub residual: Vec<T>,
    pub standard_error: Vec<T>,
}

impl<T: Real> MartingaleCheck<T> {
    /// Largest residual in units of its standard error.
    pub fn max_z(&self) -> T {
        self.residual
            .iter()
            .zip(&self.standard_error)
            .map(|(r, s)| if *r == T::zero() { T::zero() } else { *r / *s })
            .fold(T::zero(), T::max)
    }
}

pub fn martingale_residual<T: Real>(bundle: &PathBundle<T>) -> Vec<MartingaleCheck<T>> {
    let prior = bundle.prior.weights();
    bundle
        .checkpoints
        .iter()
        .zip(&bundle.snapshots)
        .map(|(t, snaps)| {
            let (residual, standard_error) = (0..prior.len())
                .map(|s| {
                    let xs: Vec<T> = snaps.iter().map(|b| b.weights()[s]).collect();
                    let est = Estimate::from_samples(&xs).expect("bundle has paths");
                    ((est.value - prior[s]).abs(), est.standard_error)
                })
                .unzip();
            MartingaleCheck {
                t: *t,
                residual,
                standard_error,
            }
        })
        .collect()
}

/// Estimated flow cost `E[H(mu_t) - H(mu_{t'})] / (t' - t)` over paths still
/// undecided at `t`, for consecutive checkpoints `t < t'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityCheck<T> {
    pub from: T,
    pub to: T,
    pub alive: usize,
    pub estimate: Option<Estimate<T>>,
}

impl<T: Real> CapacityCheck<T> {
    pub fn within(&self, c: T, n_se: T) -> bool {
        self.estimate.is_some_and(|e| e.within(c, n_se))
    }
}

pub fn capacity_audit<T: Real>(
    bundle: &PathBundle<T>,
    measure: &UncertaintyMeasure<T>,
) -> Vec<CapacityCheck<T>> {
    (1..bundle.checkpoints.len())
        .map(|k| {
            let (from, to) = (bundle.checkpoints[k - 1], bundle.checkpoints[k]);
            let width = to - from;
            let flows: Vec<T> = (0..bundle.n_paths())
                .filter(|&i| bundle.decision_times[i].is_none_or(|t| t > from))
                .map(|i| {
                    (measure.eval(&bundle.snapshots[k - 1][i])
                        - measure.eval(&bundle.snapshots[k][i]))
                        / width
                })
                .collect();
            CapacityCheck {
                from,
                to,
                alive: flows.len(),
                estimate: Estimate::from_samples(&flows),
            }
        })
        .collect()
}

/// One-sample Kolmogorov-Smirnov result at the 1% level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport<T> {
    pub statistic: T,
    pub critical: T,
    pub n: usize,
    pub passed: bool,
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct<T: Real>(n: usize) -> T {
    lit::<T>(1.6276) / T::from_count(n).sqrt()
}

/// KS distance between the samples and `cdf`. Samples need not be sorted.
pub fn ks_statistic<T: Real, F: Fn(T) -> T>(samples: &[T], cdf: F) -> T {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = T::from_count(xs.len());
    xs.iter().enumerate().fold(T::zero(), |d, (i, x)| {
        let f = cdf(*x);
        let above = T::from_count(i + 1) / n - f;
        let below = f - T::from_count(i) / n;
        d.max(above).max(below)
    })
}

/// KS test of the decided times in `bundle` against `cdf`.
pub fn ks_test<T: Real, F: Fn(T) -> T>(bundle: &PathBundle<T>, cdf: F) -> Result<KsReport<T>> {
    let times: Vec<T> = bundle.decision_times.iter().flatten().copied().collect();
    if times.is_empty() {
        return Err(Error::ImproperDistribution { terminal_cdf: 0.0 });
    }
    let statistic = ks_statistic(&times, cdf);
    let critical = ks_critical_1pct(times.len());
    Ok(KsReport {
        statistic,
        critical,
        n: times.len(),
        passed: statistic < critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpt::fpt_series;
    use crate::strategies::StrategyKind;
    use crate::timedist::{sosd_compare, SosdVerdict};

    type SimConfig = super::SimConfig<f64>;

    fn spec() -> StrategySpec<f64> {
        StrategySpec::paper(StrategyKind::Poisson, 1.0).unwrap()
    }

    fn paper_problem(horizon: f64) -> FptProblem<f64> {
        FptProblem::new(0.5, 0.0, 1.0, 0.25, horizon, 1e-3).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 0.1, 1, 1.0).is_err());
        assert!(SimConfig::new(1, 0.0, 1, 1.0).is_err());
        let cfg = SimConfig::new(1, 0.1, 1, 1.0).unwrap();
        assert!(cfg.clone().with_checkpoints(vec![0.5, 0.2]).is_err());
        assert!(cfg.with_checkpoints(vec![0.2, 2.0]).is_err());
    }

    #[test]
    fn poisson_law_and_support() {
        let spec = spec();
        let cfg = SimConfig::new(100_000, 1e-3, 7, 50.0).unwrap();
        let bundle = simulate_poisson(&spec, &cfg).unwrap();
        let ks = ks_test(&bundle, |t: f64| 1.0 - (-t).exp()).unwrap();
        assert!(ks.passed, "{ks:?}");
        assert!(bundle.terminal_in_support(&spec.target, 0.0));
        for f in bundle.atom_frequencies(&spec.target, 0.0) {
            assert!(f.z_score() <= 3.0, "{f:?}");
        }
        assert!(bundle.mean_time().unwrap().within(1.0, 3.0));
    }

    #[test]
    fn poisson_mean_converges() {
        let spec = spec();
        let mut last_se = f64::INFINITY;
        for n in [1_000, 10_000, 100_000] {
            let cfg = SimConfig::new(n, 1e-3, 11, 50.0).unwrap();
            let est = simulate_poisson(&spec, &cfg).unwrap().mean_time().unwrap();
            assert!(est.within(1.0, 3.0), "{est:?}");
            assert!(est.standard_error < last_se);
            last_se = est.standard_error;
        }
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = SimConfig::new(1, 1e-3, 42, 5.0)
            .unwrap()
            .with_checkpoints(vec![0.5])
            .unwrap();
        let a = simulate_poisson(&spec(), &cfg).unwrap();
        let b = simulate_poisson(&spec(), &cfg).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let g = paper_problem(5.0);
        let cfg = SimConfig::new(64, 1e-3, 42, 5.0).unwrap();
        assert_eq!(
            simulate_gaussian(&g, &cfg).unwrap(),
            simulate_gaussian(&g, &cfg).unwrap()
        );
    }

    #[test]
    fn poisson_martingale_and_capacity() {
        let spec = spec();
        let checkpoints = vec![0.25, 0.26, 0.5, 0.51, 1.0, 1.01];
        let cfg = SimConfig::new(100_000, 1e-3, 3, 50.0)
            .unwrap()
            .with_checkpoints(checkpoints)
            .unwrap();
        let bundle = simulate_poisson(&spec, &cfg).unwrap();
        for m in martingale_residual(&bundle) {
            assert!(m.max_z() <= 3.0, "{m:?}");
        }
        for k in capacity_audit(&bundle, &spec.measure)
            .into_iter()
            .step_by(2)
        {
            assert!(k.within(1.0, 3.0), "{k:?}");
        }
    }

    #[test]
    fn frozen_paths_have_zero_residual_and_cost() {
        let prior = Belief::binary(0.5).unwrap();
        let degenerate = PosteriorLottery::degenerate(prior);
        let cfg = SimConfig::new(1, 1e-3, 5, 1.0)
            .unwrap()
            .with_checkpoints(vec![0.5, 1.0])
            .unwrap();
        // arrival rate so low that the single path never jumps
        let bundle = simulate_arrivals(&degenerate, 1e-12, &cfg).unwrap();
        assert_eq!(bundle.censored_count(), 1);
        for m in martingale_residual(&bundle) {
            assert_eq!(m.residual, vec![0.0, 0.0]);
            assert_eq!(m.max_z(), 0.0);
        }
        let cfg = SimConfig::new(1000, 1e-3, 5, 10.0)
            .unwrap()
            .with_checkpoints(vec![0.5, 1.0])
            .unwrap();
        let bundle = simulate_arrivals(
            &PosteriorLottery::degenerate(Belief::binary(0.5).unwrap()),
            1.0,
            &cfg,
        )
        .unwrap();
        let audit = capacity_audit(&bundle, &UncertaintyMeasure::Quadratic);
        assert_eq!(audit[0].estimate.unwrap().value, 0.0);
    }

    #[test]
    fn gaussian_mean_symmetry_and_law() {
        let problem = paper_problem(12.0);
        let cfg = SimConfig::new(20_000, 1e-3, 9, 12.0).unwrap();
        let bundle = simulate_gaussian(&problem, &cfg).unwrap();
        assert_eq!(bundle.censored_count(), 0);
        assert!(bundle.mean_time().unwrap().within(1.0, 3.0));
        let up = bundle
            .decided_fraction(|b| b.scalar() == Some(1.0))
            .unwrap();
        assert!(up.within(0.5, 3.0), "{up:?}");
        let series = fpt_series(&problem);
        let ks = ks_test(&bundle, |t| series.cdf_at(t)).unwrap();
        assert!(ks.passed, "{ks:?}");
        let target = PosteriorLottery::binary(0.5, &[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(bundle.terminal_in_support(&target, 0.0));
    }

    #[test]
    fn raw_euler_overshoots_the_mean() {
        let problem = FptProblem::new(0.5, 0.0, 1.0, 0.25, 12.0, 1e-2).unwrap();
        let cfg = SimConfig::new(20_000, 1e-2, 9, 12.0).unwrap();
        let raw = simulate_gaussian(&problem, &cfg.clone().with_bridge(false))
            .unwrap()
            .mean_time()
            .unwrap();
        let bridged = simulate_gaussian(&problem, &cfg)
            .unwrap()
            .mean_time()
            .unwrap();
        assert!(raw.value > bridged.value);
        assert!(!raw.within(1.0, 3.0), "{raw:?}");
        assert!(bridged.within(1.0, 3.0), "{bridged:?}");
    }

    #[test]
    fn gaussian_martingale_and_capacity() {
        let problem = paper_problem(12.0);
        let cfg = SimConfig::new(20_000, 1e-3, 13, 12.0)
            .unwrap()
            .with_checkpoints(vec![0.1, 0.3, 0.32, 0.6, 0.62])
            .unwrap();
        let bundle = simulate_gaussian(&problem, &cfg).unwrap();
        assert!(martingale_residual(&bundle)[0].max_z() <= 3.0);
        let audit = capacity_audit(&bundle, &UncertaintyMeasure::Quadratic);
        assert!(audit[1].within(1.0, 3.0), "{:?}", audit[1]);
        assert!(audit[3].within(1.0, 3.0), "{:?}", audit[3]);
    }

    #[test]
    fn gaussian_sits_between_in_risk_order() {
        let problem = paper_problem(12.0);
        let cfg = SimConfig::new(20_000, 1e-3, 17, 12.0).unwrap();
        let mc = simulate_gaussian(&problem, &cfg)
            .unwrap()
            .time_distribution()
            .unwrap();
        let det = DecisionTimeDistribution::deterministic(1.0).unwrap();
        let exp = DecisionTimeDistribution::exponential(1.0).unwrap();
        let lower = sosd_compare(&det, &mc, 1e-6);
        assert_eq!(lower.verdict, SosdVerdict::SecondIsMpsOfFirst, "{lower:?}");
        let upper = sosd_compare(&mc, &exp, 1e-6);
        assert_eq!(upper.verdict, SosdVerdict::SecondIsMpsOfFirst, "{upper:?}");
    }

    #[test]
    fn ks_statistic_by_hand() {
        let d = ks_statistic(&[0.5], |t: f64| t);
        assert_eq!(d, 0.5);
        let d = ks_statistic(&[0.25, 0.75], |t: f64| t);
        assert_eq!(d, 0.25);
    }

    #[test]
    fn times_csv_marks_censoring() {
        let cfg = SimConfig::new(3, 1e-3, 1, 0.01).unwrap();
        let bundle = simulate_poisson(&spec(), &cfg).unwrap();
        let mut buf = Vec::new();
        bundle.write_times_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path,time\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
