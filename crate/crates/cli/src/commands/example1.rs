//! The worked binary example: prior 1/2, quadratic uncertainty, full
//! revelation, guess-the-state payoff, capacity 1 and discount `e^{-t}`.
//! Scenario files are ignored here apart from `--grid`.

use serde_json::json;

use seqinfo::fpt::cross_section;
use seqinfo::strategies::{
    gaussian, gaussian_value_analytic, poisson, pure_accumulation, StrategyKind,
    DEFAULT_GRID_POINTS, DEFAULT_HORIZON_FACTOR,
};
use seqinfo::timedist::{sosd_compare, SosdVerdict, DEFAULT_SOSD_TOL};
use seqinfo::{DiscountFunction, FptProblem, StrategyOutcome, StrategySpec};

use super::linspace;
use crate::error::CliError;
use crate::output::{OutputDir, Verdict};
use crate::plot::{line_chart, thin, Series};
use crate::Common;

const TOL_ACCUMULATION: f64 = 1e-9;
const TOL_POISSON: f64 = 1e-12;
const TOL_GAUSSIAN: f64 = 1e-3;
const REPORTED_GAUSSIAN: f64 = 0.459;
const TOL_MEAN: f64 = 1e-4;
const SNAPSHOT_TIMES: [f64; 4] = [0.05, 0.25, 0.5, 1.0];
const SNAPSHOT_POINTS: usize = 201;
const PLOT_POINTS: usize = 800;

pub fn run(common: &Common) -> Result<Verdict, CliError> {
    let time_points = common.grid.unwrap_or(DEFAULT_GRID_POINTS);
    if time_points < 2 {
        return Err(CliError::Input(
            "--grid needs at least 2 time points".into(),
        ));
    }
    let mut out = OutputDir::create(&common.out)?;
    let rho = DiscountFunction::exponential(1.0)?;
    let spec = |kind| {
        StrategySpec::paper(kind, 1.0)
            .and_then(|s| s.with_grid(DEFAULT_HORIZON_FACTOR, time_points))
    };
    let accumulation = pure_accumulation(&spec(StrategyKind::PureAccumulation)?)?;
    let gaussian_spec = spec(StrategyKind::Gaussian)?;
    let diffusion = gaussian_spec.diffusion()?;
    let gauss = gaussian(&gaussian_spec)?;
    let arrivals = poisson(&spec(StrategyKind::Poisson)?)?;
    let strategies: [(&str, &StrategyOutcome); 3] = [
        ("pure_accumulation", &accumulation),
        ("gaussian", &gauss),
        ("poisson", &arrivals),
    ];

    let v_a = accumulation.value(&rho)?;
    let v_g = gauss.value(&rho)?;
    let v_g_closed = gaussian_value_analytic(0.5)?;
    let v_p = arrivals.value(&rho)?;
    let means: Vec<f64> = strategies
        .iter()
        .map(|(_, s)| s.time_dist.mean())
        .collect::<Result<_, _>>()?;
    let values_ok = (v_a - (-1f64).exp()).abs() <= TOL_ACCUMULATION
        && (v_p - 0.5).abs() <= TOL_POISSON
        && (v_g - REPORTED_GAUSSIAN).abs() <= TOL_GAUSSIAN
        && (v_g_closed - REPORTED_GAUSSIAN).abs() <= TOL_GAUSSIAN;
    let means_ok = means.iter().all(|m| (m - 1.0).abs() <= TOL_MEAN);
    let ordered = v_p > v_g && v_g > v_a;

    let lower = sosd_compare(&accumulation.time_dist, &gauss.time_dist, DEFAULT_SOSD_TOL);
    let upper = sosd_compare(&gauss.time_dist, &arrivals.time_dist, DEFAULT_SOSD_TOL);
    let chain_ok = lower.verdict == SosdVerdict::SecondIsMpsOfFirst
        && upper.verdict == SosdVerdict::SecondIsMpsOfFirst;
    out.write_json(
        "sosd.json",
        &json!({
            "chain": ["pure_accumulation", "gaussian", "poisson"],
            "holds": chain_ok,
            "pure_accumulation_vs_gaussian": lower,
            "gaussian_vs_poisson": upper,
        }),
    )?;

    let pass = values_ok && means_ok && ordered && chain_ok;
    out.write_json(
        "values.json",
        &json!({
            "V_A": v_a,
            "V_G": v_g,
            "V_G_closed_form": v_g_closed,
            "V_P": v_p,
            "means": {
                "pure_accumulation": means[0],
                "gaussian": means[1],
                "poisson": means[2],
            },
            "gaussian_sigma2": diffusion.sigma2,
            "checks": {
                "values_within_tolerance": values_ok,
                "means_equal_one": means_ok,
                "V_P > V_G > V_A": ordered,
                "risk_chain": chain_ok,
            },
            "tolerances": {
                "V_A": TOL_ACCUMULATION,
                "V_P": TOL_POISSON,
                "V_G": TOL_GAUSSIAN,
                "mean": TOL_MEAN,
            },
            "verdict": Verdict::from_pass(pass),
        }),
    )?;

    write_laws(&mut out, &strategies)?;
    write_belief_path(&mut out, &accumulation)?;
    write_cross_sections(&mut out, &diffusion)?;

    let verdict = Verdict::from_pass(pass);
    let params = json!({ "time_points": time_points, "horizon_factor": DEFAULT_HORIZON_FACTOR, "discount_rate": 1.0 });
    out.finish("example1", &json!({ "command": params }), verdict)?;
    Ok(verdict)
}

fn write_laws(
    out: &mut OutputDir,
    strategies: &[(&str, &StrategyOutcome); 3],
) -> Result<(), CliError> {
    let mut cdf_series = Vec::new();
    let mut pdf_series = Vec::new();
    for (name, s) in strategies {
        out.write_with(&format!("cdf_{name}.csv"), |buf| {
            Ok(s.time_dist.write_csv(buf)?)
        })?;
        let pdf = s.time_dist.pdf_table();
        let rows: Vec<Vec<f64>> = pdf.iter().map(|(t, d)| vec![*t, *d]).collect();
        out.write_table(&format!("density_{name}.csv"), &["t", "density"], &rows)?;
        cdf_series.push(Series {
            label: name,
            points: thin(window(s.time_dist.grid(), s.time_dist.cdf()), PLOT_POINTS),
        });
        if *name != "pure_accumulation" {
            pdf_series.push(Series {
                label: name,
                points: thin(
                    pdf.into_iter().filter(|(t, _)| *t <= 4.0).collect(),
                    PLOT_POINTS,
                ),
            });
        }
    }
    let s = linspace(0.0, 4.0, 401);
    let integrated: Vec<Vec<f64>> = strategies
        .iter()
        .map(|(_, o)| o.time_dist.integrated_cdf_on(&s))
        .collect();
    let rows: Vec<Vec<f64>> = (0..s.len())
        .map(|i| vec![s[i], integrated[0][i], integrated[1][i], integrated[2][i]])
        .collect();
    out.write_table(
        "integrated_cdf.csv",
        &["s", "pure_accumulation", "gaussian", "poisson"],
        &rows,
    )?;
    let integrated_series: Vec<Series> = strategies
        .iter()
        .zip(&integrated)
        .map(|((name, _), v)| Series {
            label: name,
            points: s.iter().copied().zip(v.iter().copied()).collect(),
        })
        .collect();
    out.write_bytes(
        "cdf.svg",
        line_chart("Decision-time CDF", "t", "F(t)", &cdf_series).as_bytes(),
    )?;
    out.write_bytes(
        "density.svg",
        line_chart("Decision-time density", "t", "f(t)", &pdf_series).as_bytes(),
    )?;
    out.write_bytes(
        "integrated_cdf.svg",
        line_chart("Integrated CDF", "s", "int_0^s F", &integrated_series).as_bytes(),
    )?;
    Ok(())
}

fn window(grid: &[f64], cdf: &[f64]) -> Vec<(f64, f64)> {
    grid.iter()
        .copied()
        .zip(cdf.iter().copied())
        .take_while(|(t, _)| *t <= 4.0)
        .collect()
}

fn write_belief_path(out: &mut OutputDir, accumulation: &StrategyOutcome) -> Result<(), CliError> {
    let Some(path) = &accumulation.belief_path else {
        return Ok(());
    };
    let rows: Vec<Vec<f64>> = path.iter().map(|(t, mu)| vec![*t, *mu]).collect();
    out.write_table("belief_path.csv", &["t", "belief"], &rows)?;
    let upper: Vec<(f64, f64)> = path.clone();
    let lower: Vec<(f64, f64)> = path.iter().map(|(t, mu)| (*t, 1.0 - mu)).collect();
    out.write_bytes(
        "belief_path.svg",
        line_chart(
            "Pure accumulation belief path",
            "t",
            "belief",
            &[
                Series {
                    label: "upper branch",
                    points: upper,
                },
                Series {
                    label: "lower branch",
                    points: lower,
                },
            ],
        )
        .as_bytes(),
    )
}

fn write_cross_sections(out: &mut OutputDir, diffusion: &FptProblem) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut masses = Vec::new();
    let mut series = Vec::new();
    let labels: Vec<String> = SNAPSHOT_TIMES.iter().map(|t| format!("t = {t}")).collect();
    for (t, label) in SNAPSHOT_TIMES.iter().zip(&labels) {
        let section = cross_section(diffusion, *t, SNAPSHOT_POINTS)?;
        for (x, d) in section.x.iter().zip(&section.density) {
            rows.push(vec![*t, *x, *d]);
        }
        let decided = 1.0 - (-t).exp();
        masses.push(json!({
            "t": t,
            "gaussian": {
                "interior": section.interior_mass,
                "at_0": section.lo_mass,
                "at_1": section.hi_mass,
                "total": section.total_mass(),
            },
            "poisson": {
                "at_prior": (-t).exp(),
                "at_0": decided / 2.0,
                "at_1": decided / 2.0,
            },
        }));
        series.push(Series {
            label,
            points: section
                .x
                .iter()
                .copied()
                .zip(section.density.iter().copied())
                .collect(),
        });
    }
    out.write_table("cross_sections.csv", &["t", "belief", "density"], &rows)?;
    out.write_json("cross_section_masses.json", &masses)?;
    out.write_bytes(
        "cross_sections.svg",
        line_chart(
            "Gaussian learning: belief density",
            "belief",
            "density",
            &series,
        )
        .as_bytes(),
    )
}
