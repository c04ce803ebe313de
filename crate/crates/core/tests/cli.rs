use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gradlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradlab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn gradlab")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn sweep_rows(dir: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(dir.join("sweep.csv"))
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn column(rows: &[csv::StringRecord], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn ou_run_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["run", "ou_1d"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.trim_end().ends_with("PASS"));

    let json = summary(dir.path());
    assert_eq!(json["pass"], true);
    assert_eq!(json["exit_code"], 0);
    let checks = json["variants"][0]["checks"].as_array().unwrap();
    let t1 = checks
        .iter()
        .find(|c| c["id"] == "semigroup-pointwise_unregularized_linear0_1")
        .unwrap();
    // |∇T_1 x| = e^{-1} against T_1|∇x| = 1.
    let margin = t1["report"]["min_margin"].as_f64().unwrap();
    assert!((margin - (1.0 - (-1.0f64).exp())).abs() < 0.01, "{margin}");

    assert!(dir.path().join("density.csv").exists());
    assert!(dir
        .path()
        .join("margins_semigroup-pointwise_unregularized_linear0_1.csv")
        .exists());
    let density = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert!(density.lines().next().unwrap().contains("reference"));
}

#[test]
fn theorem_form_exhibit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["run", "theorem_form_lambda4"]);
    assert_eq!(out.status.code(), Some(2));
    let json = summary(dir.path());
    assert_eq!(json["exit_code"], 2);
    let failures = json["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert!(failures[0].as_str().unwrap().contains("resolvent-theorem"));
    assert!(json["header"]["note"].as_str().unwrap().len() > 20);
}

#[test]
fn even_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("even.toml");
    let text = include_str!("../scenarios/ou_1d.toml").replace("points = 401", "points = 400");
    fs::write(&scenario, text).unwrap();
    let out = gradlab(&dir.path().join("out"), &["run", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("grid.points"), "{stderr}");
}

#[test]
fn non_dissipative_drift_is_a_hypothesis_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("expanding.toml");
    let text = include_str!("../scenarios/ou_1d.toml").replace("matrix = [[-1.0]]", "matrix = [[1.0]]");
    fs::write(&scenario, text).unwrap();
    let out = gradlab(&dir.path().join("out"), &["run", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("dissipativ"), "{stderr}");
}

#[test]
fn unknown_scenario_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["run", "no_such_scenario"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_sweep_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["sweep", "ou_1d", "--axis", "lambda", "--values"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("--values"));
}

#[test]
fn bad_sweep_axis_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["sweep", "ou_1d", "--axis", "mu", "--values", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn summary_is_independent_of_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(
        gradlab(a.path(), &["--threads", "1", "run", "cubic_density"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        gradlab(b.path(), &["--threads", "4", "run", "cubic_density"])
            .status
            .code(),
        Some(0)
    );
    let sa = fs::read(a.path().join("summary.json")).unwrap();
    let sb = fs::read(b.path().join("summary.json")).unwrap();
    assert!(sa == sb, "summary.json differs between thread counts");
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["--seed", "1234", "run", "theorem_form_lambda4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(dir.path())["scenario"]["seed"], 1234);
}

#[test]
fn list_scenarios_names_every_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(dir.path(), &["list-scenarios"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for name in [
        "ou_1d",
        "theorem_form_lambda4",
        "cubic_drift",
        "cubic_density",
        "sign_drift_regularized",
        "rotational_ou_2d",
        "scheduled_ou",
        "wave_ou_1d",
    ] {
        assert!(stdout.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn h_sweep_shows_first_order_oracle_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(
        dir.path(),
        &["sweep", "ou_1d", "--axis", "h", "--values", "0.03,0.015,0.0075"],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = sweep_rows(dir.path());
    assert_eq!(rows.len(), 3);
    let err = column(&rows, 5);
    for w in err.windows(2) {
        let r = w[1] / w[0];
        assert!((0.4..=0.7).contains(&r), "ratio {r}");
    }
    // theorem-form violation stays at 1/5 - 1/16 for λ = 4 on every grid
    for v in column(&rows, 4) {
        assert!((v - 0.1375).abs() < 1e-6, "{v}");
    }
}

#[test]
fn k_sweep_approaches_unregularized_resolvent() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradlab(
        dir.path(),
        &["sweep", "cubic_drift", "--axis", "k", "--values", "2,4,8,16"],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = sweep_rows(dir.path());
    let dist = column(&rows, 6);
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
    assert!(rows[0][7].is_empty());
    let successive: Vec<f64> = rows[1..].iter().map(|r| r[7].parse().unwrap()).collect();
    assert_eq!(successive.len(), 3);
    // The last two steps shrink; the first pair k = 2, 4 is unusually close.
    assert!(successive[2] < successive[1], "{successive:?}");
}
