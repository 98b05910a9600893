//! Risk ordering of decision-time laws, either between two CSV files or
//! along the chain implied by the scenario.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use seqinfo::dp::{stationary_policy_distribution, TimeMode};
use seqinfo::fpt::fpt_series;
use seqinfo::strategies::{StrategyKind, DEFAULT_HORIZON_FACTOR};
use seqinfo::timedist::{sosd_compare, SosdVerdict, DEFAULT_SOSD_TOL};
use seqinfo::{DecisionTimeDistribution, StrategySpec};

use super::Setup;
use crate::error::CliError;
use crate::output::Verdict;
use crate::scenario::Mode;
use crate::Common;

pub fn run(common: &Common, files: Option<(PathBuf, PathBuf)>) -> Result<Verdict, CliError> {
    let mut setup = Setup::new(common)?;
    let (report, pass, extra) = match files {
        Some((first, second)) => {
            setup.out.record_input(&first)?;
            setup.out.record_input(&second)?;
            let a = read_law(&first)?;
            let b = read_law(&second)?;
            let tol = file_tolerance(&a, &b);
            let cmp = sosd_compare(&a, &b, tol);
            let pass = matches!(
                cmp.verdict,
                SosdVerdict::SecondIsMpsOfFirst | SosdVerdict::Equal
            );
            let report = json!({
                "first": first.display().to_string(),
                "second": second.display().to_string(),
                "tolerance": tol,
                "comparison": cmp,
                "second_weakly_riskier": pass,
            });
            (report, pass, json!({ "first": first, "second": second }))
        }
        None => {
            let (report, pass) = chain(&setup, common.grid)?;
            (report, pass, json!({ "time_points": common.grid }))
        }
    };
    setup.out.write_json("sosd.json", &report)?;
    let verdict = Verdict::from_pass(pass);
    let params = setup.parameters(extra);
    setup.out.finish("sosd", &params, verdict)?;
    Ok(verdict)
}

fn read_law(path: &Path) -> Result<DecisionTimeDistribution, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    DecisionTimeDistribution::read_csv(file)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Tabulated laws are read back as piecewise-linear CDFs, which moves an
/// atom's mass across one grid cell; the comparison tolerance is therefore
/// the coarser of the two grid spacings.
fn file_tolerance(a: &DecisionTimeDistribution, b: &DecisionTimeDistribution) -> f64 {
    let spacing =
        |d: &DecisionTimeDistribution| d.grid().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    DEFAULT_SOSD_TOL.max(spacing(a)).max(spacing(b))
}

/// Deterministic wait, then Gaussian learning when the scenario supports
/// it (continuous mode only), then the stationary policy. Each law must be
/// a mean-preserving spread of the one before.
fn chain(setup: &Setup, time_points: Option<usize>) -> Result<(Value, bool), CliError> {
    let r = &setup.resolved;
    let mean = r.info_total / r.c;
    let mut laws: Vec<(String, DecisionTimeDistribution)> = vec![(
        "deterministic".into(),
        DecisionTimeDistribution::deterministic(mean)?,
    )];
    let mut notes = Vec::new();
    let mode = match r.scenario.mode {
        Mode::Continuous => TimeMode::Continuous,
        Mode::Discrete => TimeMode::Discrete,
    };
    if mode == TimeMode::Continuous {
        let gaussian = StrategySpec::new(
            StrategyKind::Gaussian,
            r.c,
            r.measure.clone(),
            r.target.clone(),
            r.utility.clone(),
        )?
        .with_grid(
            DEFAULT_HORIZON_FACTOR,
            time_points.unwrap_or(r.scenario.grids.time_points),
        )?;
        match gaussian.diffusion() {
            Ok(problem) => laws.push(("gaussian".into(), fpt_series(&problem))),
            Err(e) => notes.push(format!("gaussian learning skipped: {e}")),
        }
    }
    let stationary = match mode {
        TimeMode::Continuous => "poisson",
        TimeMode::Discrete => "geometric",
    };
    laws.push((
        stationary.into(),
        stationary_policy_distribution(r.c, r.info_total, mode)?,
    ));

    let mut comparisons = Vec::new();
    let mut pass = true;
    for w in laws.windows(2) {
        let cmp = sosd_compare(&w[0].1, &w[1].1, DEFAULT_SOSD_TOL);
        pass &= matches!(
            cmp.verdict,
            SosdVerdict::SecondIsMpsOfFirst | SosdVerdict::Equal
        );
        comparisons.push(json!({ "first": w[0].0, "second": w[1].0, "comparison": cmp }));
    }
    let names: Vec<&str> = laws.iter().map(|(n, _)| n.as_str()).collect();
    let means: Vec<Value> = laws
        .iter()
        .map(|(n, d)| json!({ "law": n, "mean": d.mean().ok() }))
        .collect();
    Ok((
        json!({
            "chain": names,
            "holds": pass,
            "means": means,
            "comparisons": comparisons,
            "notes": notes,
        }),
        pass,
    ))
}
