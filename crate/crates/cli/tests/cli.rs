use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

use seqinfo::DecisionTimeDistribution;

fn seqinfo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqinfo"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(
        &fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())),
    )
    .unwrap()
}

fn scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn example1_reports_the_worked_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqinfo(&["example1"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(dir.path().join("values.json"));
    let f = |k: &str| v[k].as_f64().unwrap();
    assert!((f("V_A") - (-1f64).exp()).abs() < 1e-9);
    assert_eq!(f("V_P"), 0.5);
    // Gaussian value at the midpoint reduces to sech(sqrt 2).
    let sech = 1.0 / 2f64.sqrt().cosh();
    assert!((f("V_G") - 0.459).abs() < 1e-3);
    assert!((f("V_G") - sech).abs() < 1e-3);
    assert!((f("V_G_closed_form") - sech).abs() < 1e-12);
    for (_, m) in v["means"].as_object().unwrap() {
        assert!((m.as_f64().unwrap() - 1.0).abs() < 1e-4);
    }
    let sosd = json(dir.path().join("sosd.json"));
    assert_eq!(sosd["holds"], Value::Bool(true));
    for name in [
        "cdf.svg",
        "density.svg",
        "integrated_cdf.svg",
        "cross_sections.svg",
        "belief_path.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn cross_sections_keep_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&seqinfo(&["example1"], dir.path())), 0);
    let masses = json(dir.path().join("cross_section_masses.json"));
    for snap in masses.as_array().unwrap() {
        let t = snap["t"].as_f64().unwrap();
        let total = snap["gaussian"]["total"].as_f64().unwrap();
        assert!((total - 1.0).abs() < 1e-3, "t={t}: total {total}");
        let p = &snap["poisson"];
        let at_prior = p["at_prior"].as_f64().unwrap();
        assert!((at_prior - (-t).exp()).abs() < 1e-15);
        assert!(
            (at_prior + p["at_0"].as_f64().unwrap() + p["at_1"].as_f64().unwrap() - 1.0).abs()
                < 1e-12
        );
    }
}

#[test]
fn cdf_files_round_trip_through_the_reader() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&seqinfo(&["example1"], dir.path())), 0);
    for name in ["pure_accumulation", "gaussian", "poisson"] {
        let path = dir.path().join(format!("cdf_{name}.csv"));
        let text = fs::read_to_string(&path).unwrap();
        let law = DecisionTimeDistribution::read_csv(text.as_bytes()).unwrap();
        let mut rows = 0;
        for line in text.lines().skip(1) {
            let (t, f) = line.split_once(',').unwrap();
            let (t, f): (f64, f64) = (t.parse().unwrap(), f.parse().unwrap());
            assert!((law.cdf_at(t) - f).abs() <= 1e-12, "{name} at t={t}");
            rows += 1;
        }
        assert_eq!(rows, law.grid().len());
    }
}

#[test]
fn dp_verify_passes_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqinfo(&["dp-verify"], dir.path());
    assert_eq!(code(&out), 0);
    let cert = json(dir.path().join("certificate.json"));
    assert_eq!(cert["verdict"], "PASS");
    assert!(cert["table"]["max_abs_diff"].as_f64().unwrap() < 1e-10);
    assert_eq!(cert["oracle"]["result"]["certified"], Value::Bool(true));
}

#[test]
fn dp_verify_interior_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(
        dir.path(),
        "s.json",
        r#"{"capacity": 0.3, "discount": {"kind": "hyperbolic", "k": 1}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = seqinfo(&["dp-verify", "--scenario", &s, "--periods", "5"], &out_dir);
    assert_eq!(
        code(&out),
        0,
        "{}",
        fs::read_to_string(out_dir.join("certificate.json")).unwrap()
    );
    let cert = json(out_dir.join("certificate.json"));
    assert_eq!(cert["degenerate"], Value::Bool(false));
    assert_eq!(cert["convex_reduction"]["status"], "passed");
}

#[test]
fn dp_verify_notes_the_degenerate_case() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "s.json", r#"{"capacity": 3, "prior": 0.3}"#);
    let out_dir = dir.path().join("out");
    assert_eq!(
        code(&seqinfo(&["dp-verify", "--scenario", &s], &out_dir)),
        0
    );
    let cert = json(out_dir.join("certificate.json"));
    assert_eq!(cert["degenerate"], Value::Bool(true));
    assert!(cert["notes"][0].as_str().unwrap().contains("degenerate"));
}

#[test]
fn dp_verify_fails_when_banking_pays() {
    // Flat for three periods, then nothing: waiting two periods and
    // deciding for sure beats stopping at a constant rate.
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(
        dir.path(),
        "s.json",
        r#"{"capacity": 0.5, "discount": {"kind": "periods", "values": [1, 1, 1]}}"#,
    );
    let out_dir = dir.path().join("out");
    assert_eq!(
        code(&seqinfo(&["dp-verify", "--scenario", &s], &out_dir)),
        1
    );
    let cert = json(out_dir.join("certificate.json"));
    assert_eq!(cert["verdict"], "FAIL");
    assert_eq!(cert["oracle"]["result"]["certified"], Value::Bool(false));
    let witness = cert["oracle"]["result"]["witness"].as_str().unwrap();
    assert!(witness.contains("banked"), "{witness}");
    let stationary = cert["oracle"]["result"]["stationary_value"]
        .as_f64()
        .unwrap();
    let best = cert["oracle"]["result"]["value"].as_f64().unwrap();
    assert!((stationary - 0.875).abs() < 1e-12);
    assert!((best - 1.0).abs() < 1e-12);
}

#[test]
fn dp_verify_budget_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(
        dir.path(),
        "s.json",
        r#"{"capacity": 0.5, "grids": {"budget": 10}}"#,
    );
    assert_eq!(
        code(&seqinfo(
            &["dp-verify", "--scenario", &s],
            &dir.path().join("out")
        )),
        2
    );
}

#[test]
fn target_solves_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&seqinfo(&["target"], dir.path())), 0);
    let sol = json(dir.path().join("solution.json"));
    // Symmetric split at nu: value nu / (1 + 4 (nu - 1/2)^2) by grid search.
    let n = 1_000_000;
    let (best_nu, best) = (0..=n)
        .map(|i| 0.5 + 0.5 * i as f64 / n as f64)
        .map(|nu| (nu, nu / (1.0 + 4.0 * (nu - 0.5).powi(2))))
        .fold(
            (0.0, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    assert!((sol["value"].as_f64().unwrap() - best).abs() < 1e-6);
    assert!((sol["value"].as_f64().unwrap() - 0.6036).abs() < 1e-4);
    let mut highs: Vec<f64> = sol["atoms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["posterior"][1].as_f64().unwrap())
        .collect();
    highs.sort_by(f64::total_cmp);
    assert!((highs[1] - best_nu).abs() < 1e-4);
    assert!((highs[1] - 0.7071).abs() < 1e-4);
}

#[test]
fn target_sweeps_report_order_and_patience_limit() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(
        dir.path(),
        "s.json",
        r#"{"grids": {"prior_sweep": [0.2, 0.35, 0.45, 0.5, 0.55, 0.65, 0.8], "rate_sweep": [0.001, 1.0]}}"#,
    );
    let out_dir = dir.path().join("out");
    assert_eq!(code(&seqinfo(&["target", "--scenario", &s], &out_dir)), 0);
    let prior = json(out_dir.join("prior_sweep.json"));
    assert_eq!(prior["ordering"]["holds"], Value::Bool(true));
    assert_eq!(prior["rows"].as_array().unwrap().len(), 7);
    let rate = json(out_dir.join("rate_sweep.json"));
    assert_eq!(rate["most_patient_is_full_revelation"], Value::Bool(true));
}

#[test]
fn target_non_convergence_exits_one_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "s.json", r#"{"grids": {"max_iter": 1}}"#);
    let out_dir = dir.path().join("out");
    let out = seqinfo(&["target", "--scenario", &s], &out_dir);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    let report = json(out_dir.join("nonconvergence.json"));
    assert_eq!(report["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn mc_poisson_audits_pass_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqinfo(&["mc", "--seed", "42", "--paths", "100000"], dir.path());
    assert_eq!(code(&out), 0);
    let audit = json(dir.path().join("audit.json"));
    assert_eq!(audit["ks"]["passed"], Value::Bool(true));
    assert_eq!(audit["martingale"]["passed"], Value::Bool(true));
    assert_eq!(audit["capacity_audit"]["passed"], Value::Bool(true));
}

#[test]
fn mc_single_path_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    seqinfo(&["mc", "--paths", "1", "--seed", "7"], &a);
    seqinfo(&["mc", "--paths", "1", "--seed", "7"], &b);
    for name in ["audit.json", "times.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn mc_bridge_study_bias_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(
        dir.path(),
        "s.json",
        r#"{"mc": {"strategy": "gaussian", "paths": 20000}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = seqinfo(&["mc", "--scenario", &s, "--bridge-study"], &out_dir);
    let audit = json(out_dir.join("audit.json"));
    assert_eq!(code(&out), 0, "{audit}");
    assert_eq!(
        audit["bridge_study"]["bias_shrinks_with_dt"],
        Value::Bool(true)
    );
    assert_eq!(audit["bridge_study"]["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn sosd_compares_files() {
    let dir = tempfile::tempdir().unwrap();
    let ex = dir.path().join("ex");
    assert_eq!(code(&seqinfo(&["example1"], &ex)), 0);
    let det = ex.join("cdf_pure_accumulation.csv").display().to_string();
    let exp = ex.join("cdf_poisson.csv").display().to_string();
    let forward = seqinfo(
        &["sosd", "--first", &det, "--second", &exp],
        &dir.path().join("f"),
    );
    assert_eq!(code(&forward), 0);
    let backward = seqinfo(
        &["sosd", "--first", &exp, "--second", &det],
        &dir.path().join("b"),
    );
    assert_eq!(code(&backward), 1);
    let report = json(dir.path().join("b").join("sosd.json"));
    assert_eq!(report["comparison"]["verdict"], "first_is_mps_of_second");
}

#[test]
fn sosd_chain_in_discrete_mode() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(
        dir.path(),
        "s.json",
        r#"{"capacity": 0.25, "mode": "discrete"}"#,
    );
    let out_dir = dir.path().join("out");
    assert_eq!(code(&seqinfo(&["sosd", "--scenario", &s], &out_dir)), 0);
    let report = json(out_dir.join("sosd.json"));
    assert_eq!(
        report["chain"],
        serde_json::json!(["deterministic", "geometric"])
    );
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = scenario(dir.path(), "typo.json", r#"{"capacty": 1}"#);
    let out = seqinfo(&["target", "--scenario", &typo], &dir.path().join("o1"));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacty"));
    let implausible = scenario(
        dir.path(),
        "implausible.json",
        r#"{"target": [{"posterior": 0.1, "prob": 0.5}, {"posterior": 0.6, "prob": 0.5}]}"#,
    );
    assert_eq!(
        code(&seqinfo(
            &["mc", "--scenario", &implausible],
            &dir.path().join("o2")
        )),
        2
    );
    let missing = dir.path().join("nope.json").display().to_string();
    assert_eq!(
        code(&seqinfo(
            &["dp-verify", "--scenario", &missing],
            &dir.path().join("o3")
        )),
        2
    );
    let shannon = scenario(
        dir.path(),
        "shannon.json",
        r#"{"uncertainty": {"kind": "shannon"}, "mc": {"strategy": "gaussian"}}"#,
    );
    assert_eq!(
        code(&seqinfo(
            &["mc", "--scenario", &shannon],
            &dir.path().join("o4")
        )),
        2
    );
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert_eq!(code(&seqinfo(&["dp-verify"], &blocker.join("sub"))), 2);
}

#[test]
fn manifest_hashes_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "s.json", r#"{"capacity": 0.5}"#);
    let out_dir = dir.path().join("out");
    assert_eq!(
        code(&seqinfo(&["dp-verify", "--scenario", &s], &out_dir)),
        0
    );
    let manifest = json(out_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "dp-verify");
    assert_eq!(manifest["verdict"], "PASS");
    assert_eq!(manifest["parameters"]["scenario"]["capacity"], 0.5);
    let hex = |bytes: &[u8]| -> String {
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    };
    let input = &manifest["inputs"][0];
    assert_eq!(input["sha256"], hex(&fs::read(&s).unwrap()));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for o in outputs {
        let bytes = fs::read(out_dir.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], hex(&bytes));
        assert_eq!(o["bytes"], bytes.len());
    }
}
