//! Monte Carlo audits: martingale property of beliefs, capacity usage
//! between checkpoints, and the decision-time law against its analytic
//! counterpart.

use serde::Serialize;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use seqinfo::fpt::{fpt_series, series_mean};
use seqinfo::montecarlo::{
    capacity_audit, ks_test, martingale_residual, simulate_gaussian, simulate_poisson, KsReport,
};
use seqinfo::strategies::{StrategyKind, DEFAULT_HORIZON_FACTOR};
use seqinfo::{FptProblem, PathBundle, SimConfig, StrategySpec};

use super::{finite_or_null, Setup};
use crate::error::CliError;
use crate::output::Verdict;
use crate::plot::{line_chart, Series};
use crate::scenario::{Resolved, SimStrategy};
use crate::Common;

/// Family-wise level of the martingale and capacity z-tests.
const LEVEL: f64 = 0.01;
/// Default horizon in mean decision times.
const HORIZON_MEANS: f64 = 60.0;
/// Default checkpoint pairs as fractions of the mean decision time.
const CHECKPOINT_FRACTIONS: [f64; 6] = [0.25, 0.26, 0.5, 0.51, 1.0, 1.01];
/// Step-size multiples compared in the bridge study, coarse to fine.
const STUDY_MULTIPLES: [f64; 3] = [16.0, 4.0, 1.0];

#[derive(Debug, Serialize)]
struct MartingaleRow {
    t: f64,
    residual: Vec<f64>,
    standard_error: Vec<f64>,
    max_z: serde_json::Value,
}

#[derive(Debug, Serialize)]
struct CapacityRow {
    from: f64,
    to: f64,
    alive: usize,
    rate: Option<f64>,
    standard_error: Option<f64>,
    z: serde_json::Value,
}

#[derive(Debug, Serialize)]
struct StudyRow {
    dt: f64,
    bridge: bool,
    mean: f64,
    standard_error: f64,
    bias: f64,
    censored: usize,
}

pub fn run(common: &Common, bridge_study: bool) -> Result<Verdict, CliError> {
    let mut setup = Setup::new(common)?;
    let r = setup.resolved.clone();
    let mc = &r.scenario.mc;
    let kind = match mc.strategy {
        SimStrategy::Poisson => StrategyKind::Poisson,
        SimStrategy::Gaussian => StrategyKind::Gaussian,
    };
    let spec = StrategySpec::new(
        kind,
        r.c,
        r.measure.clone(),
        r.target.clone(),
        r.utility.clone(),
    )?
    .with_grid(DEFAULT_HORIZON_FACTOR, r.scenario.grids.time_points)?;
    let mean = spec.mean_time();
    let horizon = mc.horizon.unwrap_or(HORIZON_MEANS * mean);
    let checkpoints = match &mc.checkpoints {
        Some(cp) => cp.clone(),
        None => CHECKPOINT_FRACTIONS.iter().map(|f| f * mean).collect(),
    };
    let cfg = SimConfig::new(mc.paths, mc.dt, r.scenario.seeds.mc, horizon)?
        .with_checkpoints(checkpoints.clone())?
        .with_bridge(mc.bridge);

    let (bundle, ks, diffusion) = match mc.strategy {
        SimStrategy::Poisson => {
            let bundle = simulate_poisson(&spec, &cfg)?;
            let rate = spec.poisson_rate();
            let ks = ks_test(&bundle, |t| 1.0 - (-rate * t).exp())?;
            (bundle, ks, None)
        }
        SimStrategy::Gaussian => {
            let problem = spec.diffusion()?;
            let bundle = simulate_gaussian(&problem, &cfg)?;
            let law = fpt_series(&problem);
            let ks = ks_test(&bundle, |t| law.cdf_at(t))?;
            (bundle, ks, Some(problem))
        }
    };

    let martingale = martingale_residual(&bundle);
    let capacity: Vec<_> = capacity_audit(&bundle, &r.measure)
        .into_iter()
        .step_by(2)
        .collect();
    let tests = martingale.iter().map(|m| m.residual.len()).sum::<usize>() + capacity.len();
    let z_crit = bonferroni_critical(tests);

    let martingale_rows: Vec<MartingaleRow> = martingale
        .iter()
        .map(|m| MartingaleRow {
            t: m.t,
            residual: m.residual.clone(),
            standard_error: m.standard_error.clone(),
            max_z: finite_or_null(m.max_z()),
        })
        .collect();
    let martingale_ok = martingale.iter().all(|m| m.max_z() <= z_crit);
    let capacity_rows: Vec<CapacityRow> = capacity
        .iter()
        .map(|k| CapacityRow {
            from: k.from,
            to: k.to,
            alive: k.alive,
            rate: k.estimate.map(|e| e.value),
            standard_error: k.estimate.map(|e| e.standard_error),
            z: k.estimate
                .map_or(serde_json::Value::Null, |e| finite_or_null(e.z_score(r.c))),
        })
        .collect();
    let capacity_ok = capacity.iter().all(|k| k.within(r.c, z_crit));
    let summary = bundle.summary()?;

    let mut pass = martingale_ok && capacity_ok && ks.passed;
    let mut report = json!({
        "strategy": mc.strategy,
        "paths": mc.paths,
        "dt": mc.dt,
        "seed": r.scenario.seeds.mc,
        "horizon": horizon,
        "bridge": mc.bridge,
        "capacity": r.c,
        "analytic_mean_time": mean,
        "summary": summary,
        "z_critical": z_crit,
        "family_level": LEVEL,
        "tests": tests,
        "martingale": { "passed": martingale_ok, "checkpoints": martingale_rows },
        "capacity_audit": { "passed": capacity_ok, "intervals": capacity_rows },
        "ks": ks_json(&ks),
    });

    if bridge_study {
        let Some(problem) = &diffusion else {
            return Err(CliError::Input(
                "--bridge-study needs mc.strategy = \"gaussian\"".into(),
            ));
        };
        let (rows, shrinks) = study(problem, &cfg)?;
        pass &= shrinks;
        let study_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|s| {
                vec![
                    s.dt,
                    if s.bridge { 1.0 } else { 0.0 },
                    s.mean,
                    s.standard_error,
                    s.bias,
                ]
            })
            .collect();
        setup.out.write_table(
            "bridge_study.csv",
            &["dt", "bridge", "mean", "standard_error", "bias"],
            &study_rows,
        )?;
        report["bridge_study"] = json!({ "rows": rows, "bias_shrinks_with_dt": shrinks });
    }
    report["verdict"] = json!(Verdict::from_pass(pass));

    setup.out.write_json("audit.json", &report)?;
    setup
        .out
        .write_with("times.csv", |buf| Ok(bundle.write_times_csv(buf)?))?;
    write_cdf_plot(&mut setup, &bundle, &r, diffusion.as_ref())?;

    let verdict = Verdict::from_pass(pass);
    let params =
        setup.parameters(json!({ "checkpoints": checkpoints, "bridge_study": bridge_study }));
    setup.out.finish("mc", &params, verdict)?;
    Ok(verdict)
}

/// Two-sided normal critical value with the family-wise level split
/// across `tests` z-tests.
fn bonferroni_critical(tests: usize) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - LEVEL / (2.0 * tests.max(1) as f64))
}

fn ks_json(ks: &KsReport<f64>) -> serde_json::Value {
    json!({
        "statistic": finite_or_null(ks.statistic),
        "critical_1pct": finite_or_null(ks.critical),
        "n": ks.n,
        "passed": ks.passed,
    })
}

/// Mean decision time at coarser and finer steps, with the bridge
/// correction off and on. The uncorrected bias must fall at every
/// refinement, and the corrected run must not be worse than the
/// uncorrected one at the same step (three standard errors of slack).
fn study(problem: &FptProblem, base: &SimConfig) -> Result<(Vec<StudyRow>, bool), CliError> {
    let exact = series_mean(problem);
    let mut rows = Vec::new();
    for multiple in STUDY_MULTIPLES {
        for bridge in [false, true] {
            let cfg = SimConfig::new(base.n_paths, base.dt * multiple, base.seed, base.horizon)?
                .with_bridge(bridge);
            let estimate = simulate_gaussian(problem, &cfg)?;
            let m = estimate.mean_time()?;
            rows.push(StudyRow {
                dt: cfg.dt,
                bridge,
                mean: m.value,
                standard_error: m.standard_error,
                bias: m.value - exact,
                censored: estimate.censored_count(),
            });
        }
    }
    let off: Vec<&StudyRow> = rows.iter().filter(|s| !s.bridge).collect();
    let on: Vec<&StudyRow> = rows.iter().filter(|s| s.bridge).collect();
    let falls = off.windows(2).all(|w| w[1].bias.abs() < w[0].bias.abs());
    let corrected = off
        .iter()
        .zip(&on)
        .all(|(a, b)| b.bias.abs() <= a.bias.abs() + 3.0 * (a.standard_error + b.standard_error));
    Ok((rows, falls && corrected))
}

fn write_cdf_plot(
    setup: &mut Setup,
    bundle: &PathBundle,
    r: &Resolved,
    diffusion: Option<&FptProblem>,
) -> Result<(), CliError> {
    if bundle.n_paths() < 2 {
        return Ok(());
    }
    let empirical = bundle.time_distribution()?;
    let end = (DEFAULT_HORIZON_FACTOR / 5.0) * r.info_total / r.c;
    let ts = super::linspace(0.0, end.min(bundle.horizon), 400);
    let analytic: Box<dyn Fn(f64) -> f64> = match diffusion {
        Some(problem) => {
            let law = fpt_series(problem);
            Box::new(move |t| law.cdf_at(t))
        }
        None => {
            let rate = r.c / r.info_total;
            Box::new(move |t| 1.0 - (-rate * t).exp())
        }
    };
    let series = [
        Series {
            label: "simulated",
            points: ts.iter().map(|t| (*t, empirical.cdf_at(*t))).collect(),
        },
        Series {
            label: "analytic",
            points: ts.iter().map(|t| (*t, analytic(*t))).collect(),
        },
    ];
    setup.out.write_bytes(
        "cdf.svg",
        line_chart("Decision-time CDF", "t", "F(t)", &series).as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_single_test_is_the_two_sided_one_percent_point() {
        assert!((bonferroni_critical(1) - 2.5758293035489).abs() < 1e-9);
        assert!(bonferroni_critical(10) > bonferroni_critical(1));
    }
}
