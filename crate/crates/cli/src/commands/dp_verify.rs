//! Certificate that stationary stopping at rate `c / I_bar` solves the
//! relaxed program for the scenario's discount.

use serde_json::json;

use seqinfo::dp::{
    backward_induction, brute_force_oracle, closed_form_table, closed_form_value,
    convex_reduction_certificate, stationary_stop_prob, ValueTable,
};
use seqinfo::Error;

use super::{linspace, Setup};
use crate::error::CliError;
use crate::output::Verdict;
use crate::Common;

const TABLE_TOL: f64 = 1e-10;

pub fn run(common: &Common, periods: Option<usize>) -> Result<Verdict, CliError> {
    let mut setup = Setup::new(common)?;
    let r = &setup.resolved;
    let grids = &r.scenario.grids;
    let periods = periods.unwrap_or(grids.periods);
    if periods == 0 {
        return Err(CliError::Input("--periods must be positive".into()));
    }
    let info_points = common.grid.unwrap_or(grids.info_points);
    if info_points < 2 {
        return Err(CliError::Input(
            "--grid needs at least 2 information points".into(),
        ));
    }
    let (c, info, vstar) = (r.c, r.info_total, r.vstar);
    let q = stationary_stop_prob(c, info);
    let degenerate = c >= info;

    let info_grid = linspace(0.0, info, info_points);
    let induction = backward_induction(c, info, vstar, periods, &info_grid)?;
    let closed = closed_form_table(c, info, vstar, periods, &info_grid)?;
    let table_diff = induction.max_abs_diff(&closed)?;
    let table_ok = table_diff <= TABLE_TOL;

    let rho = &r.discount;
    let stop_grid = grids
        .oracle_stop
        .clone()
        .unwrap_or_else(|| vec![0.0, q, (1.0 + q) / 2.0, 1.0]);
    let oracle_info = grids
        .oracle_info
        .clone()
        .unwrap_or_else(|| vec![0.0, info / 2.0, info]);
    let oracle = brute_force_oracle(
        c,
        info,
        vstar,
        rho,
        periods,
        &stop_grid,
        &oracle_info,
        grids.budget,
    )?;
    let oracle_ok = oracle.certified;

    let (reduction, reduction_ok) =
        match convex_reduction_certificate(c, info, vstar, rho, grids.eps) {
            Ok(report) => {
                let ok = report.passed;
                (
                    json!({ "status": if ok { "passed" } else { "failed" }, "report": report }),
                    ok,
                )
            }
            Err(e @ Error::NotConvexDiscount { .. }) => (
                json!({ "status": "failed", "reason": e.to_string() }),
                false,
            ),
            Err(e) => (
                json!({ "status": "not_applicable", "reason": e.to_string() }),
                true,
            ),
        };
    let stationary_value = closed_form_value(c, info, vstar, rho, periods)?;

    let pass = table_ok && oracle_ok && reduction_ok;
    let mut notes = Vec::new();
    if degenerate {
        notes.push(format!(
            "degenerate case: capacity {c} per period covers the total information {info}, so the optimal policy stops in the first period"
        ));
    }
    if let Some(w) = &oracle.witness {
        notes.push(format!("oracle witness: {w}"));
    }
    let certificate = json!({
        "verdict": Verdict::from_pass(pass),
        "capacity": c,
        "info_total": info,
        "full_info_value": vstar,
        "periods": periods,
        "stationary_stop_prob": q,
        "degenerate": degenerate,
        "stationary_value": stationary_value,
        "table": {
            "info_points": info_points,
            "max_abs_diff": table_diff,
            "tolerance": TABLE_TOL,
            "passed": table_ok,
            "monotonicity_defect": induction.monotonicity_defect(),
        },
        "oracle": {
            "stop_grid": stop_grid,
            "info_grid": oracle_info,
            "budget": grids.budget,
            "result": oracle,
            "passed": oracle_ok,
        },
        "convex_reduction": reduction,
        "notes": notes,
    });
    setup.out.write_json("certificate.json", &certificate)?;
    setup.out.write_table(
        "value_table.csv",
        &["period", "info", "value", "next_info", "stop_prob"],
        &table_rows(&induction),
    )?;

    let verdict = Verdict::from_pass(pass);
    let params = setup.parameters(json!({ "periods": periods, "info_points": info_points }));
    setup.out.finish("dp-verify", &params, verdict)?;
    Ok(verdict)
}

fn table_rows(table: &ValueTable<f64>) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for t in 1..=table.periods {
        for (i, info) in table.info_grid.iter().enumerate() {
            let pick = |m: &Option<Vec<Vec<f64>>>| m.as_ref().map_or(f64::NAN, |m| m[t - 1][i]);
            rows.push(vec![
                t as f64,
                *info,
                table.value(t, i),
                pick(&table.next_info),
                pick(&table.stop_prob),
            ]);
        }
    }
    rows
}
