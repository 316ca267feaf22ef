//! Subcommand drivers. Every run writes its data files first and a
//! `manifest.json` last, so a manifest marks a completed run and carries
//! the hashes needed to audit it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tulm::baselines::{direct_estimate, DirectEstimate, DirectMethod};
use tulm::btulm::run_btulm;
use tulm::data::{build_prev_covariate, ingest_cells, ingest_microdata, scale_weights, Mode};
use tulm::draws::PosteriorDraws;
use tulm::evaluation::{
    build_population, kernel_report, run_study, write_domain_records_csv, write_summary_csv,
    write_timings_json,
};
use tulm::gtulm::run_gtulm;
use tulm::prediction::{predict_binary_domains, predict_gaussian_domains, DomainEstimate};
use tulm::rng::RngStream;
use tulm::{Error, Result};

use crate::config;

pub fn fit(config_path: &Path, seed: u64, out_dir: &Path) -> Result<()> {
    let cfg: config::FitConfig = config::load(config_path)?;
    let micro = config::resolve(config_path, &cfg.microdata);
    let data = ingest_microdata(&micro, &cfg.columns, cfg.mode)?;
    let data = scale_weights(data)?;
    let draws = match cfg.mode {
        Mode::Gaussian => run_gtulm(&data, &cfg.gaussian, &mut RngStream::new(seed, 0))?,
        Mode::Binary => {
            let data = build_prev_covariate(data)?;
            run_btulm(&data, &cfg.binary, &mut RngStream::new(seed, 0))?
        }
    };
    std::fs::create_dir_all(out_dir)?;
    draws.write_dir(out_dir)?;
    println!(
        "fit: {} draws, {} parameters",
        draws.n_draws(),
        draws.meta.layout.n_cols()
    );
    write_manifest(
        out_dir,
        "fit",
        seed,
        Some(config_path),
        &[micro],
        &["draws.csv", "fit_meta.json"],
    )
}

pub fn predict(config_path: &Path, seed: u64, out_dir: &Path) -> Result<()> {
    let cfg: config::PredictConfig = config::load(config_path)?;
    let draws_dir = config::resolve(config_path, &cfg.draws);
    let cells_path = config::resolve(config_path, &cfg.cells);
    let draws = PosteriorDraws::read_dir(&draws_dir)?;
    let cells = ingest_cells(&cells_path, &cfg.cell_columns)?;
    let stream = RngStream::new(seed, 1);
    let estimates = match draws.meta.mode {
        Mode::Gaussian => predict_gaussian_domains(&draws, &cells, cfg.alpha, &stream)?,
        Mode::Binary => predict_binary_domains(&draws, &cells, cfg.alpha, &stream)?,
    };
    std::fs::create_dir_all(out_dir)?;
    write_domains_csv(&estimates, &out_dir.join("domains.csv"))?;
    println!("predict: {} domains", estimates.len());
    write_manifest(
        out_dir,
        "predict",
        seed,
        Some(config_path),
        &[
            draws_dir.join("draws.csv"),
            draws_dir.join("fit_meta.json"),
            cells_path,
        ],
        &["domains.csv"],
    )
}

pub fn direct(config_path: &Path, seed: u64, out_dir: &Path) -> Result<()> {
    let cfg: config::DirectConfig = config::load(config_path)?;
    let micro = config::resolve(config_path, &cfg.microdata);
    let data = ingest_microdata(&micro, &cfg.columns, cfg.mode)?;
    let mut inputs = vec![micro];
    let cells = match (&cfg.cells, &cfg.cell_columns) {
        (Some(path), Some(mapping)) => {
            let path = config::resolve(config_path, path);
            let cells = ingest_cells(&path, mapping)?;
            inputs.push(path);
            Some(cells)
        }
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "cells and cell_columns must be given together".into(),
            ))
        }
    };
    let estimates = direct_estimate(&data, cells.as_ref(), cfg.alpha)?;
    std::fs::create_dir_all(out_dir)?;
    write_direct_csv(&estimates, &out_dir.join("direct.csv"))?;
    println!("direct: {} domains", estimates.len());
    write_manifest(out_dir, "direct", seed, Some(config_path), &inputs, &["direct.csv"])
}

pub fn study(config_path: &Path, seed: u64, out_dir: &Path) -> Result<()> {
    let cfg: config::StudyFileConfig = config::load(config_path)?;
    let pop = build_population(&cfg.population, &mut RngStream::new(seed, 2))?;
    let result = run_study(&pop, &cfg.study, &RngStream::new(seed, 3))?;
    std::fs::create_dir_all(out_dir)?;
    write_domain_records_csv(&result, out_dir.join("domain_records.csv"))?;
    write_summary_csv(&result, out_dir.join("summary.csv"))?;
    // Wall-clock timings are the one run-dependent output; they live in
    // their own file and stay out of the manifest hashes.
    write_timings_json(&result, out_dir.join("timing.json"))?;
    for row in &result.summary {
        println!(
            "{}: mse {:.6} abs_bias {:.6} coverage {:.3} interval_score {:.4} ({} scored)",
            row.estimator.as_str(),
            row.mse,
            row.abs_bias,
            row.coverage,
            row.mean_interval_score,
            row.n_scored
        );
    }
    write_manifest(
        out_dir,
        "study",
        seed,
        Some(config_path),
        &[],
        &["domain_records.csv", "summary.csv"],
    )
}

pub fn validate_kernels(seed: u64, out_dir: &Path) -> Result<()> {
    let checks = kernel_report(seed)?;
    std::fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("kernel_checks.csv"))?;
    w.write_record(["check", "statistic", "threshold", "pass"])?;
    for c in &checks {
        w.write_record([
            c.name.clone(),
            format!("{:.6}", c.statistic),
            format!("{:.6}", c.threshold),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    for c in &checks {
        println!(
            "{:<28} statistic {:.4} threshold {:.4} {}",
            c.name,
            c.statistic,
            c.threshold,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    write_manifest(out_dir, "validate-kernels", seed, None, &[], &["kernel_checks.csv"])?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "kernel checks failed: {}",
            failed.join(", ")
        )))
    }
}

fn fmt_field(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Domain estimates with 1-based area and week labels, matching the input
/// file convention.
fn write_domains_csv(estimates: &[DomainEstimate], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["area", "week", "point", "sd", "ci_lower", "ci_upper", "n_draws"])?;
    for e in estimates {
        w.write_record([
            (e.area + 1).to_string(),
            (e.week + 1).to_string(),
            fmt_field(e.summary.point),
            fmt_field(e.summary.sd),
            fmt_field(e.summary.ci_lower),
            fmt_field(e.summary.ci_upper),
            e.summary.n_draws.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_direct_csv(estimates: &[DirectEstimate], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "area",
        "week",
        "point",
        "se",
        "ci_lower",
        "ci_upper",
        "n_responses",
        "defined",
        "method",
    ])?;
    for e in estimates {
        let method = match e.method {
            DirectMethod::HorvitzThompson => "horvitz_thompson",
            DirectMethod::Hajek => "hajek",
        };
        w.write_record([
            (e.area + 1).to_string(),
            (e.week + 1).to_string(),
            fmt_field(e.point),
            fmt_field(e.se),
            fmt_field(e.ci_lower),
            fmt_field(e.ci_upper),
            e.n_responses.to_string(),
            e.defined.to_string(),
            method.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

/// Writes `manifest.json` into `out_dir`: the command, seed, versions, and
/// SHA-256 hashes of the config, every input file, and every output file.
/// Written after all outputs so its presence marks a completed run.
fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config_path: Option<&Path>,
    inputs: &[PathBuf],
    outputs: &[&str],
) -> Result<()> {
    let mut input_hashes = BTreeMap::new();
    if let Some(p) = config_path {
        input_hashes.insert(p.display().to_string(), sha256_hex(p)?);
    }
    for p in inputs {
        input_hashes.insert(p.display().to_string(), sha256_hex(p)?);
    }
    let mut output_hashes = BTreeMap::new();
    for name in outputs {
        output_hashes.insert(name.to_string(), sha256_hex(&out_dir.join(name))?);
    }
    let doc = serde_json::json!({
        "command": command,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": input_hashes,
        "outputs": output_hashes,
    });
    let body = serde_json::to_string_pretty(&doc)?;
    std::fs::write(out_dir.join("manifest.json"), body + "\n")?;
    Ok(())
}
