//! Optimal target lottery, with optional sweeps over the prior and over
//! the discount rate.

use serde::Serialize;
use serde_json::json;

use seqinfo::target::{solve_target, SimplexGrid, SolverOptions};
use seqinfo::{Belief, DiscountFunction, Error, TargetProblem, TargetSolution};

use super::Setup;
use crate::error::CliError;
use crate::output::Verdict;
use crate::scenario::Resolved;
use crate::Common;

/// Slack allowed in the comparative-static ordering.
const ORDER_TOL: f64 = 1e-6;
/// Distance from a vertex that still counts as full revelation.
const VERTEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
struct AtomRow {
    posterior: Vec<f64>,
    prob: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SolutionReport {
    atoms: Vec<AtomRow>,
    lambda: f64,
    value: f64,
    residual: f64,
    iterations: usize,
    info_cost: f64,
    mean_time: f64,
    damped: bool,
    full_revelation: bool,
    trace: Vec<f64>,
}

impl From<&TargetSolution> for SolutionReport {
    fn from(s: &TargetSolution) -> Self {
        Self {
            atoms: s
                .lottery
                .atoms()
                .iter()
                .map(|a| AtomRow {
                    posterior: a.posterior.weights().to_vec(),
                    prob: a.prob,
                })
                .collect(),
            lambda: s.lambda,
            value: s.value,
            residual: s.residual,
            iterations: s.iterations,
            info_cost: s.info_cost,
            mean_time: s.mean_time,
            damped: s.damped,
            full_revelation: is_full_revelation(s),
            trace: s.trace.clone(),
        }
    }
}

fn is_full_revelation(s: &TargetSolution) -> bool {
    s.lottery
        .atoms()
        .iter()
        .filter(|a| a.prob > 0.0)
        .all(|a| a.posterior.weights().iter().any(|w| *w >= 1.0 - VERTEX_TOL))
}

pub fn run(common: &Common) -> Result<Verdict, CliError> {
    let mut setup = Setup::new(common)?;
    let r = setup.resolved.clone();
    let options = options(&r, common.grid)?;
    let problem = build_problem(&r, r.prior.clone(), r.discount.clone())?;
    let params =
        setup.parameters(json!({ "simplex_resolution": options.grid.map(|g| g.resolution) }));

    let solution = match solve_target(&problem, &options) {
        Ok(s) => s,
        Err(e @ Error::NonConvergence { .. }) => {
            let Error::NonConvergence {
                iterations,
                last_change,
                trace,
            } = &e
            else {
                unreachable!()
            };
            setup.out.write_json(
                "nonconvergence.json",
                &json!({
                    "error": e.to_string(),
                    "iterations": iterations,
                    "last_change": last_change,
                    "trace": trace,
                }),
            )?;
            setup.out.finish("target", &params, Verdict::Fail)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    setup
        .out
        .write_json("solution.json", &SolutionReport::from(&solution))?;
    let mut pass = true;

    if let Some(priors) = &r.scenario.grids.prior_sweep {
        if r.prior.dim() != 2 {
            return Err(CliError::Input(
                "grids.prior_sweep needs a binary scenario".into(),
            ));
        }
        let mut rows = Vec::new();
        for p in priors {
            let prior = Belief::binary(*p)?;
            let s = solve_target(&build_problem(&r, prior, r.discount.clone())?, &options)?;
            rows.push(SweepRow::new(*p, &s));
        }
        let order = ordering_report(&rows);
        pass &= order.holds;
        setup.out.write_table(
            "prior_sweep.csv",
            SweepRow::HEADER,
            &rows.iter().map(SweepRow::cells).collect::<Vec<_>>(),
        )?;
        setup.out.write_json(
            "prior_sweep.json",
            &json!({ "rows": rows, "ordering": order }),
        )?;
    }

    if let Some(rates) = &r.scenario.grids.rate_sweep {
        let mut rows = Vec::new();
        for rate in rates {
            let rho = DiscountFunction::exponential(*rate)?;
            let s = solve_target(&build_problem(&r, r.prior.clone(), rho)?, &options)?;
            rows.push(SweepRow::new(*rate, &s));
        }
        let patient = rows
            .iter()
            .min_by(|a, b| a.parameter.total_cmp(&b.parameter))
            .map(|row| row.full_revelation);
        setup.out.write_table(
            "rate_sweep.csv",
            SweepRow::HEADER,
            &rows.iter().map(SweepRow::cells).collect::<Vec<_>>(),
        )?;
        setup.out.write_json(
            "rate_sweep.json",
            &json!({ "rows": rows, "most_patient_is_full_revelation": patient }),
        )?;
    }

    let verdict = Verdict::from_pass(pass);
    setup.out.finish("target", &params, verdict)?;
    Ok(verdict)
}

fn options(r: &Resolved, resolution: Option<usize>) -> Result<SolverOptions<f64>, CliError> {
    let mut options = SolverOptions {
        max_iter: r.scenario.grids.max_iter,
        tol: r.scenario.grids.solver_tol,
        ..SolverOptions::default()
    };
    if let Some(n) = resolution {
        if n < 2 {
            return Err(CliError::Input(
                "--grid needs a simplex resolution of at least 2".into(),
            ));
        }
        let base = SimplexGrid::for_states(r.prior.dim())?;
        options.grid = Some(SimplexGrid {
            resolution: n,
            ..base
        });
    }
    Ok(options)
}

fn build_problem(
    r: &Resolved,
    prior: Belief,
    discount: DiscountFunction,
) -> Result<TargetProblem, CliError> {
    Ok(TargetProblem::new(
        r.utility.clone(),
        r.measure.clone(),
        prior,
        r.c,
        discount,
    )?)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    parameter: f64,
    lo: f64,
    hi: f64,
    value: f64,
    info_cost: f64,
    mean_time: f64,
    lambda: f64,
    full_revelation: bool,
}

impl SweepRow {
    const HEADER: &'static [&'static str] = &[
        "parameter",
        "lo",
        "hi",
        "value",
        "info_cost",
        "mean_time",
        "lambda",
        "full_revelation",
    ];

    fn new(parameter: f64, s: &TargetSolution) -> Self {
        let scalars: Vec<f64> = s
            .lottery
            .atoms()
            .iter()
            .filter(|a| a.prob > 0.0)
            .filter_map(|a| a.posterior.scalar())
            .collect();
        let lo = scalars.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scalars.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            parameter,
            lo: if lo.is_finite() { lo } else { f64::NAN },
            hi: if hi.is_finite() { hi } else { f64::NAN },
            value: s.value,
            info_cost: s.info_cost,
            mean_time: s.mean_time,
            lambda: s.lambda,
            full_revelation: is_full_revelation(s),
        }
    }

    fn cells(&self) -> Vec<f64> {
        vec![
            self.parameter,
            self.lo,
            self.hi,
            self.value,
            self.info_cost,
            self.mean_time,
            self.lambda,
            if self.full_revelation { 1.0 } else { 0.0 },
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
struct OrderingReport {
    /// Across priors with higher value, information cost and mean waiting
    /// time should not rise.
    holds: bool,
    violations: Vec<String>,
    tolerance: f64,
}

fn ordering_report(rows: &[SweepRow]) -> OrderingReport {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut violations = Vec::new();
    for w in sorted.windows(2) {
        let (low, high) = (w[0], w[1]);
        if high.value - low.value <= ORDER_TOL {
            continue;
        }
        if high.info_cost > low.info_cost + ORDER_TOL {
            violations.push(format!(
                "prior {} (value {:.6}) costs {:.6} > {:.6} at prior {} (value {:.6})",
                high.parameter, high.value, high.info_cost, low.info_cost, low.parameter, low.value
            ));
        }
        if high.mean_time > low.mean_time + ORDER_TOL {
            violations.push(format!(
                "prior {} (value {:.6}) waits {:.6} > {:.6} at prior {} (value {:.6})",
                high.parameter, high.value, high.mean_time, low.mean_time, low.parameter, low.value
            ));
        }
    }
    OrderingReport {
        holds: violations.is_empty(),
        violations,
        tolerance: ORDER_TOL,
    }
}
