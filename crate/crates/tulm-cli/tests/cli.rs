//! End-to-end tests of the command-line driver: the fit, predict, and
//! direct pipeline on the bundled fixture, exit codes on broken inputs,
//! and byte-level determinism of study outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tulm")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr should have a line");
    serde_json::from_str(line).expect("stderr line should be JSON")
}

#[test]
fn fit_predict_direct_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let fit_out = dir.path().join("fit-out");
    let cfg = fixture("fit_gaussian.toml");
    let out = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--output",
        fit_out.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    assert!(fit_out.join("draws.csv").is_file());
    assert!(fit_out.join("fit_meta.json").is_file());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit_out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["outputs"]["draws.csv"].is_string());
    assert!(manifest["inputs"].as_object().unwrap().len() >= 2);

    let predict_cfg = dir.path().join("predict.toml");
    std::fs::write(
        &predict_cfg,
        format!(
            "draws = \"fit-out\"\ncells = {:?}\nalpha = 0.05\n\n[cell_columns]\narea = \"area\"\nweek = \"week\"\ncount = \"count\"\ncovariates = [\"gender\", \"age\"]\nintercept = true\n",
            fixture("cells.csv")
        ),
    )
    .unwrap();
    let pred_out = dir.path().join("pred-out");
    let out = run(&[
        "predict",
        "--config",
        predict_cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--output",
        pred_out.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let domains = std::fs::read_to_string(pred_out.join("domains.csv")).unwrap();
    let lines: Vec<&str> = domains.lines().collect();
    assert_eq!(lines.len(), 1 + 12, "3 areas x 4 weeks plus header");
    assert_eq!(
        lines[0],
        "area,week,point,sd,ci_lower,ci_upper,n_draws"
    );
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        let lo: f64 = fields[4].parse().unwrap();
        let point: f64 = fields[2].parse().unwrap();
        let hi: f64 = fields[5].parse().unwrap();
        assert!(lo <= point && point <= hi);
    }

    let direct_out = dir.path().join("direct-out");
    let out = run(&[
        "direct",
        "--config",
        fixture("direct.toml").to_str().unwrap(),
        "--seed",
        "11",
        "--output",
        direct_out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(direct_out.join("direct.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 12);
    assert!(text.contains("hajek"));
}

// The direct subcommand must reproduce the library estimator exactly.
#[test]
fn direct_output_matches_library_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "direct",
        "--config",
        fixture("direct.toml").to_str().unwrap(),
        "--seed",
        "3",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);

    let mapping = tulm::data::ColumnMapping {
        unit: "unit".into(),
        area: "area".into(),
        week: "week".into(),
        weight: "weight".into(),
        response: "y".into(),
        covariates: vec!["gender".into(), "age".into()],
        trials: None,
        intercept: true,
    };
    let data = tulm::data::ingest_microdata(
        fixture("microdata.csv"),
        &mapping,
        tulm::data::Mode::Gaussian,
    )
    .unwrap();
    let expected = tulm::baselines::direct_estimate(&data, None, 0.05).unwrap();

    let text = std::fs::read_to_string(out_dir.join("direct.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), expected.len());
    for (row, e) in rows.iter().zip(&expected) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0].parse::<usize>().unwrap(), e.area + 1);
        assert_eq!(fields[1].parse::<usize>().unwrap(), e.week + 1);
        assert_eq!(fields[2].parse::<f64>().unwrap(), e.point);
        assert_eq!(fields[3].parse::<f64>().unwrap(), e.se);
    }
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never-created");
    let out = run(&[
        "fit",
        "--config",
        dir.path().join("no-such.toml").to_str().unwrap(),
        "--seed",
        "1",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("no-such.toml"));
    assert!(!out_dir.exists(), "failed run must not leave outputs");
}

#[test]
fn unknown_estimator_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    let text = std::fs::read_to_string(fixture("study_binary.toml"))
        .unwrap()
        .replace("[\"direct\", \"tulm\"]", "[\"direct\", \"bogus\"]");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--output",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn unparseable_microdata_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "unit,area,week,weight,y,gender,age\nu1,1,1,not_a_number,5.0,0,0.5\n",
    )
    .unwrap();
    let cfg = dir.path().join("fit.toml");
    let text = std::fs::read_to_string(fixture("fit_gaussian.toml"))
        .unwrap()
        .replace("microdata = \"microdata.csv\"", "microdata = \"bad.csv\"");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--output",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 3);
    let err = stderr_json(&out);
    assert_eq!(err["error"], "data");
    assert!(err["message"].as_str().unwrap().contains("weight"));
}

#[test]
fn missing_seed_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "direct",
        "--config",
        fixture("direct.toml").to_str().unwrap(),
        "--output",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn study_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("study_binary.toml");
    let mut hashes = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "study",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "42",
            "--output",
            out_dir.to_str().unwrap(),
        ]);
        assert_exit(&out, 0);
        assert!(out_dir.join("timing.json").is_file());
        let files: Vec<Vec<u8>> = ["domain_records.csv", "summary.csv", "manifest.json"]
            .iter()
            .map(|f| std::fs::read(out_dir.join(f)).unwrap())
            .collect();
        hashes.push(files);
    }
    assert_eq!(
        hashes[0], hashes[1],
        "equal seeds must give byte-identical outputs"
    );

    let out_dir = dir.path().join("c");
    let out = run(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "43",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let other = std::fs::read(out_dir.join("domain_records.csv")).unwrap();
    assert_ne!(hashes[0][0], other, "different seeds must differ");
}
