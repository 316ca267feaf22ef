//! Repeated-sampling evaluation: draw many samples from one fixed
//! population, run each estimator on each sample, and score the domain
//! estimates against the population truth.

use crate::baselines::{direct_estimate, run_bbulm_per_week, run_gbulm_per_week};
use crate::btulm::{run_btulm, BtulmConfig};
use crate::data::{Mode, PopulationCells};
use crate::error::{Error, Result};
use crate::evaluation::population::{informative_sample, SyntheticPopulation};
use crate::gtulm::{run_gtulm, GtulmConfig};
use crate::parallel::par_map_indexed;
use crate::prediction::{
    predict_binary_domain_draws, predict_gaussian_domain_draws, summarize_draws, DomainDraws,
};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

/// Lower-is-better score for a (1 - alpha) interval: width plus a
/// (2/alpha)-weighted penalty for missing the target.
pub fn interval_score(lower: f64, upper: f64, x: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if !(upper >= lower) {
        return Err(Error::Config(format!(
            "interval [{lower}, {upper}] is reversed"
        )));
    }
    let below = (lower - x).max(0.0);
    let above = (x - upper).max(0.0);
    Ok((upper - lower) + 2.0 / alpha * (below + above))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Direct,
    Bulm,
    Tulm,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Direct => "direct",
            EstimatorKind::Bulm => "bulm",
            EstimatorKind::Tulm => "tulm",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_replicates: usize,
    pub expected_frac: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub gaussian: GtulmConfig,
    #[serde(default)]
    pub binary: BtulmConfig,
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n_replicates: 50,
            expected_frac: 0.02,
            alpha: 0.05,
            estimators: vec![EstimatorKind::Direct, EstimatorKind::Bulm, EstimatorKind::Tulm],
            gaussian: GtulmConfig::default(),
            binary: BtulmConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        if !(self.expected_frac > 0.0 && self.expected_frac <= 1.0) {
            return Err(Error::Config(format!(
                "expected sampling fraction must be in (0, 1], got {}",
                self.expected_frac
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("estimator list is empty".into()));
        }
        let mut seen = Vec::new();
        for e in &self.estimators {
            if seen.contains(e) {
                return Err(Error::Config(format!("estimator {} listed twice", e.as_str())));
            }
            seen.push(*e);
        }
        self.gaussian.validate()?;
        self.binary.validate()?;
        Ok(())
    }
}

/// One scored domain estimate. Areas and weeks are zero-based here; file
/// writers shift to one-based labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainRecord {
    pub estimator: EstimatorKind,
    pub area: usize,
    pub week: usize,
    pub truth: f64,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub covered: bool,
    pub interval_score: f64,
    pub defined: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: usize,
    pub n_sampled_units: usize,
    pub records: Vec<DomainRecord>,
    /// (estimator, message) pairs for steps that failed; the replicate
    /// keeps going with the remaining estimators.
    pub failures: Vec<(String, String)>,
    pub runtime_s: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    pub mse: f64,
    /// Mean over domains of the absolute mean error in each domain.
    pub abs_bias: f64,
    pub coverage: f64,
    pub mean_interval_score: f64,
    pub n_scored: usize,
    pub n_excluded: usize,
    pub n_failed_replicates: usize,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub reports: Vec<ReplicateReport>,
    pub summary: Vec<SummaryRow>,
}

impl StudyResult {
    /// Total seconds spent per estimator, summed over replicates. Kept
    /// out of the record and summary files so those stay deterministic.
    pub fn total_runtimes(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for rep in &self.reports {
            for (name, secs) in &rep.runtime_s {
                *out.entry(name.clone()).or_insert(0.0) += secs;
            }
        }
        out
    }
}

type EstimateRow = (usize, usize, f64, f64, f64, f64, bool);

fn rows_from_domain_draws(dd: &DomainDraws, alpha: f64) -> Result<Vec<EstimateRow>> {
    let mut rows = Vec::with_capacity(dd.domains.len());
    for (k, &(area, week)) in dd.domains.iter().enumerate() {
        let col: Vec<f64> = dd.values.iter().map(|r| r[k]).collect();
        let s = summarize_draws(&col, alpha)?;
        rows.push((area, week, s.point, s.sd, s.ci_lower, s.ci_upper, true));
    }
    Ok(rows)
}

fn fit_and_predict(
    kind: EstimatorKind,
    sample: &crate::data::PanelDataset,
    cells: &PopulationCells,
    cfg: &StudyConfig,
    rep_stream: &RngStream,
) -> Result<Vec<EstimateRow>> {
    match kind {
        EstimatorKind::Direct => Ok(direct_estimate(sample, Some(cells), cfg.alpha)?
            .into_iter()
            .map(|e| (e.area, e.week, e.point, e.se, e.ci_lower, e.ci_upper, e.defined))
            .collect()),
        EstimatorKind::Tulm => {
            let mut fit_rng = rep_stream.substream(1);
            let predict_stream = rep_stream.substream(2);
            let dd = match sample.mode {
                Mode::Gaussian => {
                    let draws = run_gtulm(sample, &cfg.gaussian, &mut fit_rng)?;
                    predict_gaussian_domain_draws(&draws, cells, &predict_stream)?
                }
                Mode::Binary => {
                    let draws = run_btulm(sample, &cfg.binary, &mut fit_rng)?;
                    predict_binary_domain_draws(&draws, cells, &predict_stream)?
                }
            };
            rows_from_domain_draws(&dd, cfg.alpha)
        }
        EstimatorKind::Bulm => {
            let fit_stream = rep_stream.substream(3);
            let predict_stream = rep_stream.substream(4);
            let fits = match sample.mode {
                Mode::Gaussian => run_gbulm_per_week(sample, &cfg.gaussian, &fit_stream)?,
                Mode::Binary => run_bbulm_per_week(sample, &cfg.binary, &fit_stream)?,
            };
            let mut rows = Vec::new();
            for fit in &fits {
                let week = fit.meta.layout.weeks[0];
                let ps = predict_stream.substream(week as u64);
                let dd = match sample.mode {
                    Mode::Gaussian => predict_gaussian_domain_draws(fit, cells, &ps)?,
                    Mode::Binary => predict_binary_domain_draws(fit, cells, &ps)?,
                };
                rows.extend(rows_from_domain_draws(&dd, cfg.alpha)?);
            }
            Ok(rows)
        }
    }
}

fn score_rows(
    kind: EstimatorKind,
    rows: Vec<EstimateRow>,
    truth: &BTreeMap<(usize, usize), (f64, u64)>,
    alpha: f64,
) -> Vec<DomainRecord> {
    let mut out = Vec::with_capacity(rows.len());
    for (area, week, estimate, se, lo, hi, defined) in rows {
        let Some(&(t, _)) = truth.get(&(area, week)) else {
            continue;
        };
        if defined {
            let covered = lo <= t && t <= hi;
            let score = interval_score(lo, hi, t, alpha).unwrap_or(f64::NAN);
            out.push(DomainRecord {
                estimator: kind,
                area,
                week,
                truth: t,
                estimate,
                se,
                ci_lower: lo,
                ci_upper: hi,
                covered,
                interval_score: score,
                defined: true,
            });
        } else {
            out.push(DomainRecord {
                estimator: kind,
                area,
                week,
                truth: t,
                estimate: f64::NAN,
                se: f64::NAN,
                ci_lower: f64::NAN,
                ci_upper: f64::NAN,
                covered: false,
                interval_score: f64::NAN,
                defined: false,
            });
        }
    }
    out
}

fn run_replicate(
    pop: &SyntheticPopulation,
    cfg: &StudyConfig,
    cells: &PopulationCells,
    truth: &BTreeMap<(usize, usize), (f64, u64)>,
    rep_stream: &RngStream,
    replicate: usize,
) -> ReplicateReport {
    let mut report = ReplicateReport {
        replicate,
        n_sampled_units: 0,
        records: Vec::new(),
        failures: Vec::new(),
        runtime_s: Vec::new(),
    };
    let mut sample_rng = rep_stream.substream(0);
    let sample = match informative_sample(pop, cfg.expected_frac, &mut sample_rng) {
        Ok(s) => s,
        Err(e) => {
            report.failures.push(("sample".into(), e.to_string()));
            return report;
        }
    };
    report.n_sampled_units = sample.unit_labels.len();
    for &kind in &cfg.estimators {
        let started = Instant::now();
        match fit_and_predict(kind, &sample, cells, cfg, rep_stream) {
            Ok(rows) => report
                .records
                .extend(score_rows(kind, rows, truth, cfg.alpha)),
            Err(e) => report.failures.push((kind.as_str().into(), e.to_string())),
        }
        report
            .runtime_s
            .push((kind.as_str().into(), started.elapsed().as_secs_f64()));
    }
    report
}

fn summarize_reports(
    reports: &[ReplicateReport],
    estimators: &[EstimatorKind],
) -> Vec<SummaryRow> {
    let mut rows = Vec::with_capacity(estimators.len());
    for &kind in estimators {
        let mut errors: Vec<f64> = Vec::new();
        let mut by_domain: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        let mut covered = 0usize;
        let mut score_sum = 0.0;
        let mut n_excluded = 0usize;
        let mut n_failed = 0usize;
        for rep in reports {
            if rep
                .failures
                .iter()
                .any(|(name, _)| name == kind.as_str() || name == "sample")
            {
                n_failed += 1;
            }
            for r in rep.records.iter().filter(|r| r.estimator == kind) {
                if !r.defined {
                    n_excluded += 1;
                    continue;
                }
                let e = r.estimate - r.truth;
                errors.push(e);
                by_domain.entry((r.area, r.week)).or_default().push(e);
                covered += r.covered as usize;
                score_sum += r.interval_score;
            }
        }
        let n = errors.len();
        let mse = if n > 0 {
            errors.iter().map(|e| e * e).sum::<f64>() / n as f64
        } else {
            f64::NAN
        };
        let abs_bias = if by_domain.is_empty() {
            f64::NAN
        } else {
            by_domain
                .values()
                .map(|v| (v.iter().sum::<f64>() / v.len() as f64).abs())
                .sum::<f64>()
                / by_domain.len() as f64
        };
        rows.push(SummaryRow {
            estimator: kind,
            mse,
            abs_bias,
            coverage: if n > 0 { covered as f64 / n as f64 } else { f64::NAN },
            mean_interval_score: if n > 0 { score_sum / n as f64 } else { f64::NAN },
            n_scored: n,
            n_excluded,
            n_failed_replicates: n_failed,
        });
    }
    rows
}

/// Repeated-sampling study over one population. Replicate r derives all
/// of its randomness from substream r, so results do not depend on thread
/// count and rerunning with the same stream reproduces them exactly.
pub fn run_study(
    pop: &SyntheticPopulation,
    cfg: &StudyConfig,
    stream: &RngStream,
) -> Result<StudyResult> {
    cfg.validate()?;
    let cells = pop.to_cells();
    let truth = pop.truth_table();
    if truth.is_empty() {
        return Err(Error::Data("population has no responders".into()));
    }
    let root = stream.substream(0x575d);
    let reports = par_map_indexed(cfg.n_replicates, |r| {
        run_replicate(pop, cfg, &cells, &truth, &root.substream(r as u64), r)
    });
    let summary = summarize_reports(&reports, &cfg.estimators);
    Ok(StudyResult { reports, summary })
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Per-domain scores, one row per (replicate, estimator, domain), with
/// one-based area and week labels. Deterministic for a fixed study.
pub fn write_domain_records_csv(result: &StudyResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "replicate",
        "estimator",
        "area",
        "week",
        "truth",
        "estimate",
        "se",
        "ci_lower",
        "ci_upper",
        "covered",
        "interval_score",
        "defined",
    ])?;
    for rep in &result.reports {
        for r in &rep.records {
            w.write_record([
                rep.replicate.to_string(),
                r.estimator.as_str().to_string(),
                (r.area + 1).to_string(),
                (r.week + 1).to_string(),
                format!("{}", r.truth),
                fmt_opt(r.estimate),
                fmt_opt(r.se),
                fmt_opt(r.ci_lower),
                fmt_opt(r.ci_upper),
                (r.covered as u8).to_string(),
                fmt_opt(r.interval_score),
                (r.defined as u8).to_string(),
            ])?;
        }
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

pub fn write_summary_csv(result: &StudyResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "estimator",
        "mse",
        "abs_bias",
        "coverage",
        "mean_interval_score",
        "n_scored",
        "n_excluded",
        "n_failed_replicates",
    ])?;
    for s in &result.summary {
        w.write_record([
            s.estimator.as_str().to_string(),
            fmt_opt(s.mse),
            fmt_opt(s.abs_bias),
            fmt_opt(s.coverage),
            fmt_opt(s.mean_interval_score),
            s.n_scored.to_string(),
            s.n_excluded.to_string(),
            s.n_failed_replicates.to_string(),
        ])?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// Wall-clock totals per estimator as a small JSON object; separated from
/// the score files because timings vary run to run.
pub fn write_timings_json(result: &StudyResult, path: impl AsRef<Path>) -> Result<()> {
    let map = result.total_runtimes();
    let mut f = std::fs::File::create(path.as_ref())?;
    let body = serde_json::to_string_pretty(&map)?;
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
