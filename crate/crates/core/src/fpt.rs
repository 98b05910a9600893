//! First exit of a driftless diffusion from an interval.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{linspace, lit, simpson, Real};
use crate::timedist::{DecisionTimeDistribution, PROPERNESS_TOL};

/// Bound on the discarded tail of every sine series.
pub const SERIES_TAIL_TOL: f64 = 1e-12;
const MIN_TERMS: usize = 5;
const MAX_TERMS: usize = 1_000_000;
/// Largest accepted `D dt / dx^2` for the implicit solver.
pub const MAX_MESH_RATIO: f64 = 1e3;
pub const MIN_PDE_NODES: usize = 201;

/// Diffusion `dX = sqrt(sigma2) dB` from `start`, absorbed at `lo` and `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FptProblem<T> {
    pub start: T,
    pub lo: T,
    pub hi: T,
    pub sigma2: T,
    pub horizon: T,
    /// Spacing of the output time grid.
    pub dt: T,
}

impl<T: Real> FptProblem<T> {
    pub fn new(start: T, lo: T, hi: T, sigma2: T, horizon: T, dt: T) -> Result<Self> {
        if !(lo < start && start < hi) {
            return Err(Error::InvalidParameter(format!(
                "start {start} must lie strictly inside ({lo}, {hi})"
            )));
        }
        if !(sigma2 > T::zero() && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance {sigma2} must be positive"
            )));
        }
        if !(dt > T::zero() && horizon >= dt && horizon.is_finite()) {
            return Err(Error::InvalidParameter("need 0 < dt <= horizon".into()));
        }
        Ok(Self {
            start,
            lo,
            hi,
            sigma2,
            horizon,
            dt,
        })
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// `(start - lo)(hi - start) / sigma2`.
    pub fn mean_exit_time(&self) -> T {
        (self.start - self.lo) * (self.hi - self.start) / self.sigma2
    }

    /// Probability of leaving through `hi`.
    pub fn hit_hi_probability(&self) -> T {
        (self.start - self.lo) / self.width()
    }

    pub fn time_grid(&self) -> Vec<T> {
        let n = (self.horizon / self.dt)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        linspace(T::zero(), self.horizon, n + 1)
    }

    fn decay(&self) -> T {
        self.sigma2 * T::PI() * T::PI() / (lit::<T>(2.0) * self.width() * self.width())
    }
}

/// Sums `sum_k coeff(k) e^{-a k^2 t}` with `|coeff(k)| <= scale / k^power`,
/// stopping once the geometric tail bound drops below the tolerance.
fn sine_series<T: Real, C: Fn(usize) -> T>(a: T, t: T, scale: T, power: i32, coeff: C) -> T {
    let tol = T::tolerance(SERIES_TAIL_TOL);
    let mut acc = T::zero();
    for k in 1..=MAX_TERMS {
        let kf = T::from_count(k);
        acc = acc + coeff(k) * (-a * kf * kf * t).exp();
        if k >= MIN_TERMS {
            let next = kf + T::one();
            let lead = scale / next.powi(power) * (-a * next * next * t).exp();
            let ratio = (-lit::<T>(2.0) * a * next * t).exp();
            if ratio < T::one() && lead / (T::one() - ratio) < tol {
                break;
            }
        }
    }
    acc
}

/// Survival and barrier absorption at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitState<T> {
    pub survival: T,
    pub absorbed_lo: T,
    pub absorbed_hi: T,
}

/// Spectral solution of the absorbing heat equation at time `t`.
pub fn exit_state<T: Real>(problem: &FptProblem<T>, t: T) -> ExitState<T> {
    if t <= T::zero() {
        return ExitState {
            survival: T::one(),
            absorbed_lo: T::zero(),
            absorbed_hi: T::zero(),
        };
    }
    let y = (problem.start - problem.lo) / problem.width();
    let a = problem.decay();
    let pi = T::PI();
    let two = lit::<T>(2.0);
    let sin_k = |k: usize| (T::from_count(k) * pi * y).sin();
    let survival = sine_series(a, t, lit::<T>(4.0) / pi, 1, |k| {
        if k % 2 == 1 {
            lit::<T>(4.0) / (T::from_count(k) * pi) * sin_k(k)
        } else {
            T::zero()
        }
    });
    let lo_series = sine_series(a, t, two / pi, 1, |k| {
        two / (T::from_count(k) * pi) * sin_k(k)
    });
    let hi_series = sine_series(a, t, two / pi, 1, |k| {
        let sign = if k % 2 == 1 { T::one() } else { -T::one() };
        sign * two / (T::from_count(k) * pi) * sin_k(k)
    });
    let clamp = |x: T| x.max(T::zero()).min(T::one());
    ExitState {
        survival: clamp(survival),
        absorbed_lo: clamp(T::one() - y - lo_series),
        absorbed_hi: clamp(y - hi_series),
    }
}

/// Sine-series first-exit law on the problem's time grid, with the CDF
/// clamped to `[0, 1]`. Flags a warning when more than `1e-6` of the mass
/// survives the horizon.
pub fn fpt_series<T: Real>(problem: &FptProblem<T>) -> DecisionTimeDistribution<T> {
    let grid = problem.time_grid();
    let mut cdf: Vec<T> = grid
        .par_iter()
        .map(|t| T::one() - exit_state(problem, *t).survival)
        .collect();
    for i in 1..cdf.len() {
        cdf[i] = cdf[i].max(cdf[i - 1]);
    }
    finish(grid, cdf)
}

fn finish<T: Real>(grid: Vec<T>, cdf: Vec<T>) -> DecisionTimeDistribution<T> {
    let survival = T::one() - *cdf.last().expect("nonempty grid");
    let mut dist = DecisionTimeDistribution::numeric(grid, cdf).expect("monotone cdf in [0, 1]");
    if survival > lit(PROPERNESS_TOL) && dist.warnings().is_empty() {
        dist.push_warning(format!(
            "survival {survival} at the horizon exceeds {PROPERNESS_TOL:e}"
        ));
    }
    dist
}

/// Resolution of the finite-difference solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeConfig {
    /// Space nodes including both barriers.
    pub nodes: usize,
    /// Implicit steps per output time step.
    pub substeps: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            nodes: 401,
            substeps: 4,
        }
    }
}

/// Output of the finite-difference solver on the problem's time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeSolution<T> {
    pub distribution: DecisionTimeDistribution<T>,
    pub absorbed_lo: Vec<T>,
    pub absorbed_hi: Vec<T>,
    pub interior: Vec<T>,
}

/// [`fpt_pde_with`] at default resolution.
pub fn fpt_pde<T: Real>(problem: &FptProblem<T>) -> Result<DecisionTimeDistribution<T>> {
    Ok(fpt_pde_with(problem, PdeConfig::default())?.distribution)
}

/// Backward-Euler solve of `u_t = (sigma2 / 2) u_xx` with `u = 0` at both
/// barriers. The unit mass starts split linearly between the nodes around
/// `start`; the mass leaving through each barrier per step is
/// `r u_1 dx` and `r u_{N-2} dx` with `r = D dt / dx^2`, which conserves
/// total mass to rounding.
pub fn fpt_pde_with<T: Real>(problem: &FptProblem<T>, cfg: PdeConfig) -> Result<PdeSolution<T>> {
    if cfg.nodes < MIN_PDE_NODES {
        return Err(Error::InvalidParameter(format!(
            "space grid needs at least {MIN_PDE_NODES} nodes"
        )));
    }
    if cfg.substeps == 0 {
        return Err(Error::InvalidParameter("need at least one substep".into()));
    }
    let grid = problem.time_grid();
    let out_dt = grid[1] - grid[0];
    let h = out_dt / T::from_count(cfg.substeps);
    let n = cfg.nodes;
    let dx = problem.width() / T::from_count(n - 1);
    let r = problem.sigma2 / lit::<T>(2.0) * h / (dx * dx);
    if r > lit(MAX_MESH_RATIO) {
        return Err(Error::InvalidParameter(format!(
            "mesh ratio {r} exceeds {MAX_MESH_RATIO}; refine the time step or coarsen space"
        )));
    }
    let m = n - 2;
    let mut u = vec![T::zero(); m];
    let pos = (problem.start - problem.lo) / dx;
    let left = pos.floor().to_usize().unwrap_or(0);
    let frac = pos - T::from_count(left);
    // node j (1-based interior) is u[j - 1]
    for (node, weight) in [(left, T::one() - frac), (left + 1, frac)] {
        if weight > T::zero() && node >= 1 && node <= m {
            u[node - 1] = u[node - 1] + weight / dx;
        }
    }
    let diag = T::one() + lit::<T>(2.0) * r;
    let mut scratch_c = vec![T::zero(); m];
    let mut scratch_d = vec![T::zero(); m];
    let mut absorbed_lo = vec![T::zero(); grid.len()];
    let mut absorbed_hi = vec![T::zero(); grid.len()];
    let mut interior = vec![T::one(); grid.len()];
    let (mut lo_mass, mut hi_mass) = (T::zero(), T::zero());
    for step in 1..grid.len() {
        for _ in 0..cfg.substeps {
            thomas_symmetric(-r, diag, &mut u, &mut scratch_c, &mut scratch_d);
            lo_mass = lo_mass + r * u[0] * dx;
            hi_mass = hi_mass + r * u[m - 1] * dx;
        }
        absorbed_lo[step] = lo_mass;
        absorbed_hi[step] = hi_mass;
        interior[step] = u.iter().copied().sum::<T>() * dx;
    }
    let mut cdf: Vec<T> = absorbed_lo
        .iter()
        .zip(&absorbed_hi)
        .map(|(a, b)| (*a + *b).min(T::one()))
        .collect();
    for i in 1..cdf.len() {
        cdf[i] = cdf[i].max(cdf[i - 1]);
    }
    Ok(PdeSolution {
        distribution: finish(grid, cdf),
        absorbed_lo,
        absorbed_hi,
        interior,
    })
}

/// Solves the constant tridiagonal system `off x_{i-1} + diag x_i + off x_{i+1} = rhs_i`
/// in place.
fn thomas_symmetric<T: Real>(off: T, diag: T, rhs: &mut [T], c: &mut [T], d: &mut [T]) {
    let m = rhs.len();
    c[0] = off / diag;
    d[0] = rhs[0] / diag;
    for i in 1..m {
        let denom = diag - off * c[i - 1];
        c[i] = off / denom;
        d[i] = (rhs[i] - off * d[i - 1]) / denom;
    }
    rhs[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        rhs[i] = d[i] - c[i] * rhs[i + 1];
    }
}

/// Law of the diffusion at a fixed time: interior density plus point masses
/// at the barriers and, at `t = 0`, at the start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection<T> {
    pub t: T,
    pub x: Vec<T>,
    pub density: Vec<T>,
    /// Simpson integral of the density.
    pub interior_mass: T,
    pub lo_mass: T,
    pub hi_mass: T,
    pub start_atom: T,
}

impl<T: Real> CrossSection<T> {
    pub fn total_mass(&self) -> T {
        self.interior_mass + self.lo_mass + self.hi_mass + self.start_atom
    }
}

/// Cross-section on `points` evenly spaced space nodes (rounded up to odd).
pub fn cross_section<T: Real>(
    problem: &FptProblem<T>,
    t: T,
    points: usize,
) -> Result<CrossSection<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    let points = (points.max(3) / 2) * 2 + 1;
    let x = linspace(problem.lo, problem.hi, points);
    if t == T::zero() {
        return Ok(CrossSection {
            t,
            density: vec![T::zero(); x.len()],
            x,
            interior_mass: T::zero(),
            lo_mass: T::zero(),
            hi_mass: T::zero(),
            start_atom: T::one(),
        });
    }
    let l = problem.width();
    let a = problem.decay();
    let pi = T::PI();
    let y0 = (problem.start - problem.lo) / l;
    let density: Vec<T> = x
        .par_iter()
        .map(|xi| {
            let y = (*xi - problem.lo) / l;
            let v = sine_series(a, t, lit::<T>(2.0) / l, 0, |k| {
                let kf = T::from_count(k) * pi;
                lit::<T>(2.0) / l * (kf * y0).sin() * (kf * y).sin()
            });
            v.max(T::zero())
        })
        .collect();
    let dx = l / T::from_count(points - 1);
    let interior_mass = {
        let mut acc = density[0] + density[points - 1];
        for (i, d) in density.iter().enumerate().take(points - 1).skip(1) {
            acc = acc
                + *d * if i % 2 == 1 {
                    lit::<T>(4.0)
                } else {
                    lit::<T>(2.0)
                };
        }
        acc * dx / lit(3.0)
    };
    let state = exit_state(problem, t);
    Ok(CrossSection {
        t,
        x,
        density,
        interior_mass,
        lo_mass: state.absorbed_lo,
        hi_mass: state.absorbed_hi,
        start_atom: T::zero(),
    })
}

/// Mean exit time by Simpson quadrature of the series survival on
/// `[0, horizon]`, with steps resolving the time to reach the nearer barrier.
pub fn series_mean<T: Real>(problem: &FptProblem<T>) -> T {
    let near = (problem.start - problem.lo).min(problem.hi - problem.start);
    let scale = near * near / problem.sigma2;
    let panels = (problem.horizon / scale * lit::<T>(50.0))
        .ceil()
        .to_usize()
        .unwrap_or(2000);
    simpson(
        |t| exit_state(problem, t).survival,
        T::zero(),
        problem.horizon,
        panels.clamp(2000, 4_000_000),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type FptProblem = super::FptProblem<f64>;

    fn paper() -> FptProblem {
        FptProblem::new(0.5, 0.0, 1.0, 0.25, 25.0, 1e-3).unwrap()
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(FptProblem::new(0.0, 0.0, 1.0, 0.25, 1.0, 0.1).is_err());
        assert!(FptProblem::new(0.5, 0.0, 1.0, -1.0, 1.0, 0.1).is_err());
        assert!(FptProblem::new(0.5, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn series_mean_is_one_at_paper_parameters() {
        let d = fpt_series(&paper());
        assert_eq!(d.cdf()[0], 0.0);
        assert!(d.warnings().is_empty());
        assert!(
            (d.mean().unwrap() - 1.0).abs() < 1e-6,
            "{}",
            d.mean().unwrap()
        );
    }

    #[test]
    fn short_horizon_is_flagged() {
        let p = FptProblem::new(0.5, 0.0, 1.0, 0.25, 2.0, 1e-2).unwrap();
        let d = fpt_series(&p);
        assert!(!d.warnings().is_empty());
    }

    #[test]
    fn survival_against_method_of_images() {
        // independent small-time oracle: for t small the two nearest images
        // dominate, S(t) ~ 1 - 2 P(|B| >= 0.5) with sd sqrt(0.25 t)
        let p = paper();
        let t = 0.02f64;
        let sd = (0.25 * t).sqrt();
        let tail = 0.5 * libm_erfc(0.5 / (sd * 2f64.sqrt()));
        let s = exit_state(&p, t).survival;
        assert!((s - (1.0 - 4.0 * tail)).abs() < 1e-9, "{s}");
    }

    // erfc by continued-fraction-free series adequate for x > 3
    fn libm_erfc(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.5 * x);
        // Numerical Recipes erfcc, relative error < 1.2e-7
        t * (-x * x - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp()
    }

    #[test]
    fn barrier_masses_sum_to_absorbed_mass() {
        let p = FptProblem::new(0.3, 0.0, 1.0, 0.5, 40.0, 1e-2).unwrap();
        for t in [1e-3, 0.05, 0.4, 2.0, 30.0] {
            let s = exit_state(&p, t);
            assert!((s.survival + s.absorbed_lo + s.absorbed_hi - 1.0).abs() < 1e-10);
        }
        let late = exit_state(&p, 40.0);
        assert!((late.absorbed_hi - 0.3).abs() < 1e-10);
    }

    #[test]
    fn pde_matches_series() {
        let p = FptProblem::new(0.5, 0.0, 1.0, 0.25, 25.0, 1e-3).unwrap();
        let series = fpt_series(&p);
        let pde = fpt_pde(&p).unwrap();
        let gap = series
            .cdf()
            .iter()
            .zip(pde.cdf())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-3, "{gap}");
    }

    #[test]
    fn pde_symmetry_and_hitting_probability() {
        let p = FptProblem::new(0.5, 0.0, 1.0, 0.25, 25.0, 1e-2).unwrap();
        let sol = fpt_pde_with(&p, PdeConfig::default()).unwrap();
        let k = sol.absorbed_lo.len() - 1;
        assert!((sol.absorbed_lo[k] - sol.absorbed_hi[k]).abs() < 1e-10);
        let q = FptProblem::new(0.75, 0.0, 1.0, 0.25, 25.0, 1e-2).unwrap();
        let sol = fpt_pde_with(&q, PdeConfig::default()).unwrap();
        assert!((sol.absorbed_hi.last().unwrap() - 0.75).abs() < 1e-6);
        for i in 0..sol.interior.len() {
            let total = sol.interior[i] + sol.absorbed_lo[i] + sol.absorbed_hi[i];
            assert!((total - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pde_guards() {
        let p = paper();
        assert!(fpt_pde_with(
            &p,
            PdeConfig {
                nodes: 101,
                substeps: 1
            }
        )
        .is_err());
        let coarse_time = FptProblem::new(0.5, 0.0, 1.0, 0.25, 100.0, 10.0).unwrap();
        assert!(fpt_pde_with(
            &coarse_time,
            PdeConfig {
                nodes: 2001,
                substeps: 1
            }
        )
        .is_err());
    }

    #[test]
    fn pde_error_shrinks_with_refinement() {
        let p = FptProblem::new(0.5, 0.0, 1.0, 0.25, 4.0, 4e-3).unwrap();
        let series = fpt_series(&p);
        let gap = |substeps| {
            let pde = fpt_pde_with(
                &p,
                PdeConfig {
                    nodes: 801,
                    substeps,
                },
            )
            .unwrap();
            series
                .cdf()
                .iter()
                .zip(pde.distribution.cdf())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (gap(1), gap(2));
        assert!(fine < 0.65 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn cross_section_examples() {
        let p = paper();
        let c0 = cross_section(&p, 0.0, 101).unwrap();
        assert_eq!(c0.start_atom, 1.0);
        assert_eq!(c0.total_mass(), 1.0);
        let c = cross_section(&p, 0.5, 2001).unwrap();
        assert!((c.lo_mass - c.hi_mass).abs() < 1e-9);
        let n = c.density.len();
        for i in 0..n {
            assert!((c.density[i] - c.density[n - 1 - i]).abs() < 1e-9);
        }
        assert!((c.total_mass() - 1.0).abs() < 1e-6);
        let late = cross_section(&p, 25.0, 101).unwrap();
        assert!(late.interior_mass < 1e-12);
        assert!((late.hi_mass - 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn conservation_and_mean(start in 0.05f64..0.95, sigma2 in 0.1f64..2.0, t in 0.001f64..3.0) {
            let p = FptProblem::new(start, 0.0, 1.0, sigma2, 8.0 / sigma2, 1e-2).unwrap();
            let c = cross_section(&p, t, 4001).unwrap();
            prop_assert!((c.total_mass() - 1.0).abs() < 1e-6, "{}", c.total_mass());
            let mean = series_mean(&p);
            prop_assert!((mean - p.mean_exit_time()).abs() < 1e-6, "{} vs {}", mean, p.mean_exit_time());
        }
    }
}
