//! Synthetic longitudinal populations and informative Poisson sampling.
//!
//! A population is a finite set of units, each with fixed covariates, a
//! response window of one to three consecutive weeks, and responses
//! generated from the same longitudinal model family the samplers fit.
//! Sampling tilts inclusion toward units with larger responses and size
//! variables, which makes the design informative: weighted estimators stay
//! valid, unweighted ones do not.

use crate::data::{
    build_prev_covariate, scale_weights, CellRow, Mode, PanelDataset, PopulationCells,
    PrevStatus, UnitWeekRecord, MAX_CONSECUTIVE_WEEKS,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::Rng as _;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Power transform (y^lambda - 1) / lambda, log at lambda = 0. Requires
/// strictly positive input.
pub fn box_cox_scalar(y: f64, lambda: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Numerical(format!(
            "power transform needs positive responses, got {y}"
        )));
    }
    if lambda == 0.0 {
        Ok(y.ln())
    } else {
        Ok((y.powf(lambda) - 1.0) / lambda)
    }
}

pub fn box_cox(values: &[f64], lambda: f64) -> Result<Vec<f64>> {
    values.iter().map(|&y| box_cox_scalar(y, lambda)).collect()
}

/// Inverse of `box_cox_scalar`. The argument must satisfy
/// 1 + lambda z > 0.
pub fn inv_box_cox(z: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(z.exp());
    }
    let base = 1.0 + lambda * z;
    if base <= 0.0 {
        return Err(Error::Numerical(format!(
            "value {z} is outside the inverse transform domain for lambda {lambda}"
        )));
    }
    Ok(base.powf(1.0 / lambda))
}

/// Inverse transform for presentation of generated responses. The power
/// transform's range is bounded on one side for lambda != 0, so a normal
/// tail value can lack a raw preimage; this saturates the base just inside
/// the domain, mapping such values to an extreme but finite raw response.
fn raw_scale(z: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return z.min(709.0).exp();
    }
    let base = (1.0 + lambda * z).max(1e-26);
    base.powf(1.0 / lambda)
}

/// Parameters of the synthetic population generator. Covariates are fixed:
/// intercept, a binary indicator, a 13-level age score on [-1, 1], and its
/// square. For binary populations `beta` carries two extra trailing
/// coefficients for the previous-response states (no, then yes).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub mode: Mode,
    pub n_units: usize,
    pub n_areas: usize,
    pub n_weeks: usize,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub rho: f64,
    pub phi: f64,
    #[serde(default = "one")]
    pub sigma2: f64,
    pub sigma2_eta1: f64,
    pub sigma2_eta: f64,
    /// Probability of a one-, two-, or three-week response window.
    pub pattern_fracs: [f64; 3],
    /// Analysis scale for Gaussian responses: raw responses are stored as
    /// the inverse transform of the generated values.
    #[serde(default)]
    pub box_cox_lambda: Option<f64>,
    #[serde(default = "default_weight_shape")]
    pub weight_shape: f64,
    #[serde(default = "default_weight_scale")]
    pub weight_scale: f64,
}

fn one() -> f64 {
    1.0
}
fn default_weight_shape() -> f64 {
    4.0
}
fn default_weight_scale() -> f64 {
    0.5
}

pub const COVARIATE_NAMES: [&str; 4] = ["intercept", "gender", "age", "age_sq"];

impl GeneratorSpec {
    pub fn default_gaussian() -> Self {
        GeneratorSpec {
            mode: Mode::Gaussian,
            n_units: 50_000,
            n_areas: 20,
            n_weeks: 8,
            beta: vec![6.5, -0.1, 0.2, -0.2],
            rho: 0.6,
            phi: 0.8,
            sigma2: 1.0,
            sigma2_eta1: 0.3,
            sigma2_eta: 0.1,
            pattern_fracs: [0.5, 0.3, 0.2],
            box_cox_lambda: Some(-0.0863),
            weight_shape: 4.0,
            weight_scale: 0.5,
        }
    }

    pub fn default_binary() -> Self {
        GeneratorSpec {
            mode: Mode::Binary,
            n_units: 50_000,
            n_areas: 20,
            n_weeks: 8,
            beta: vec![-0.7, 0.3, 0.4, -0.3, -0.35, 1.5],
            rho: 0.0,
            phi: 0.8,
            sigma2: 1.0,
            sigma2_eta1: 0.3,
            sigma2_eta: 0.1,
            pattern_fracs: [0.5, 0.3, 0.2],
            box_cox_lambda: None,
            weight_shape: 4.0,
            weight_scale: 0.5,
        }
    }

    pub fn base_p(&self) -> usize {
        COVARIATE_NAMES.len()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.mode {
            Mode::Gaussian => self.base_p(),
            Mode::Binary => self.base_p() + 2,
        };
        if self.beta.len() != expected {
            return Err(Error::Config(format!(
                "beta must have {expected} entries for {:?} mode, got {}",
                self.mode,
                self.beta.len()
            )));
        }
        if self.n_units == 0 || self.n_areas == 0 || self.n_weeks == 0 {
            return Err(Error::Config("population dimensions must be positive".into()));
        }
        if self.mode == Mode::Gaussian && !(self.rho.abs() < 1.0) {
            return Err(Error::Config(format!("rho must be in (-1, 1), got {}", self.rho)));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::Config(format!("phi must be in (-1, 1), got {}", self.phi)));
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("sigma2_eta1", self.sigma2_eta1),
            ("sigma2_eta", self.sigma2_eta),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        let fsum: f64 = self.pattern_fracs.iter().sum();
        if self.pattern_fracs.iter().any(|f| *f < 0.0) || (fsum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(
                "pattern fractions must be nonnegative and sum to one".into(),
            ));
        }
        if !(self.weight_shape > 0.0) || !(self.weight_scale > 0.0) {
            return Err(Error::Config("weight distribution parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PopUnit {
    pub area: usize,
    pub x: Vec<f64>,
    pub wstar: f64,
    pub start: usize,
    pub len: usize,
    /// Responses on the analysis scale, one per window week.
    pub y: Vec<f64>,
    /// Responses on the raw scale: the saturating inverse transform of
    /// `y` when a transform is set, otherwise equal to `y`.
    pub y_raw: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SyntheticPopulation {
    pub mode: Mode,
    pub n_areas: usize,
    pub n_weeks: usize,
    pub covariate_names: Vec<String>,
    pub lambda: Option<f64>,
    pub units: Vec<PopUnit>,
    /// Area random-effect paths used during generation, week major.
    pub eta: Vec<Vec<f64>>,
}

impl SyntheticPopulation {
    /// Domain truth: mean analysis-scale response and responder count per
    /// (area, week) among units whose window covers that week.
    pub fn truth_table(&self) -> BTreeMap<(usize, usize), (f64, u64)> {
        let mut sums: BTreeMap<(usize, usize), (f64, u64)> = BTreeMap::new();
        for u in &self.units {
            for (k, &y) in u.y.iter().enumerate() {
                let e = sums.entry((u.area, u.start + k)).or_insert((0.0, 0));
                e.0 += y;
                e.1 += 1;
            }
        }
        sums.into_iter()
            .map(|(d, (s, c))| (d, (s / c as f64, c)))
            .collect()
    }

    /// Covariate cells for poststratification. Binary cells carry the
    /// response-window tag so prediction can chain consecutive weeks;
    /// Gaussian cells do not need it.
    pub fn to_cells(&self) -> PopulationCells {
        let mut counts: BTreeMap<(usize, usize, Option<(usize, usize)>, Vec<u64>), u64> =
            BTreeMap::new();
        for u in &self.units {
            let bits: Vec<u64> = u.x.iter().map(|v| v.to_bits()).collect();
            let cohort = match self.mode {
                Mode::Binary => Some((u.start, u.len)),
                Mode::Gaussian => None,
            };
            for k in 0..u.len {
                *counts
                    .entry((u.area, u.start + k, cohort, bits.clone()))
                    .or_insert(0) += 1;
            }
        }
        let rows = counts
            .into_iter()
            .map(|((area, week, cohort, bits), count)| CellRow {
                area,
                week,
                count,
                cohort,
                x: bits.iter().map(|b| f64::from_bits(*b)).collect(),
            })
            .collect();
        PopulationCells {
            covariate_names: self.covariate_names.clone(),
            n_areas: self.n_areas,
            n_weeks: self.n_weeks,
            rows,
        }
    }
}

fn draw_window(spec: &GeneratorSpec, rng: &mut RngStream) -> (usize, usize) {
    let u = rng.uniform();
    let mut len = if u < spec.pattern_fracs[0] {
        1
    } else if u < spec.pattern_fracs[0] + spec.pattern_fracs[1] {
        2
    } else {
        3
    };
    len = len.min(spec.n_weeks).min(MAX_CONSECUTIVE_WEEKS);
    let span = spec.n_weeks - len;
    let start = if span == 0 {
        0
    } else {
        ((rng.uniform() * (span + 1) as f64) as usize).min(span)
    };
    (start, len)
}

fn draw_covariates(rng: &mut RngStream) -> Vec<f64> {
    let gender = if rng.uniform() < 0.5 { 0.0 } else { 1.0 };
    let cat = ((rng.uniform() * 13.0) as usize).min(12);
    let age = (cat as f64 - 6.0) / 6.0;
    vec![1.0, gender, age, age * age]
}

/// Generates a synthetic population from the longitudinal model. Gaussian
/// responses follow the stationary-lag AR structure on the analysis scale
/// and are stored raw through the inverse power transform; binary
/// responses evolve through the previous-response coefficients.
pub fn build_population(spec: &GeneratorSpec, rng: &mut RngStream) -> Result<SyntheticPopulation> {
    spec.validate()?;
    let (m, t_weeks) = (spec.n_areas, spec.n_weeks);
    let mut eta = vec![vec![0.0f64; m]; t_weeks];
    for j in 0..m {
        eta[0][j] = spec.sigma2_eta1.sqrt() * rng.standard_normal();
    }
    for t in 1..t_weeks {
        for j in 0..m {
            eta[t][j] = spec.phi * eta[t - 1][j] + spec.sigma2_eta.sqrt() * rng.standard_normal();
        }
    }
    let weight_dist = Gamma::new(spec.weight_shape, spec.weight_scale)
        .map_err(|e| Error::Config(format!("weight distribution: {e}")))?;
    let p_base = spec.base_p();
    let mut units = Vec::with_capacity(spec.n_units);
    for _ in 0..spec.n_units {
        let area = ((rng.uniform() * m as f64) as usize).min(m - 1);
        let x = draw_covariates(rng);
        let wstar: f64 = rng.sample(weight_dist);
        let (start, len) = draw_window(spec, rng);
        let xb: f64 = x.iter().zip(&spec.beta[..p_base]).map(|(a, b)| a * b).sum();
        let mut y = Vec::with_capacity(len);
        match spec.mode {
            Mode::Gaussian => {
                let sd_first = spec.sigma2.sqrt();
                let sd_follow = (spec.sigma2 * (1.0 - spec.rho * spec.rho)).sqrt();
                let mut prev_z = 0.0;
                for k in 0..len {
                    let mean = xb + eta[start + k][area];
                    let z = if k == 0 {
                        mean + sd_first * rng.standard_normal()
                    } else {
                        let prev_mean = xb + eta[start + k - 1][area];
                        mean + spec.rho * (prev_z - prev_mean) + sd_follow * rng.standard_normal()
                    };
                    y.push(z);
                    prev_z = z;
                }
            }
            Mode::Binary => {
                let b_no = spec.beta[p_base];
                let b_yes = spec.beta[p_base + 1];
                let mut prev = None;
                for k in 0..len {
                    let mut lambda = xb + eta[start + k][area];
                    lambda += match prev {
                        None => 0.0,
                        Some(false) => b_no,
                        Some(true) => b_yes,
                    };
                    let p = 1.0 / (1.0 + (-lambda).exp());
                    let resp = rng.uniform() < p;
                    y.push(if resp { 1.0 } else { 0.0 });
                    prev = Some(resp);
                }
            }
        }
        let y_raw = match (spec.mode, spec.box_cox_lambda) {
            (Mode::Gaussian, Some(l)) => y.iter().map(|&z| raw_scale(z, l)).collect(),
            _ => y.clone(),
        };
        units.push(PopUnit {
            area,
            x,
            wstar,
            start,
            len,
            y,
            y_raw,
        });
    }
    Ok(SyntheticPopulation {
        mode: spec.mode,
        n_areas: m,
        n_weeks: t_weeks,
        covariate_names: COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(),
        lambda: spec.box_cox_lambda,
        units,
        eta,
    })
}

/// Poisson-sampling inclusion probabilities proportional to
/// exp(0.1 ybar + 0.2 wstar), capped at one, with expected sample size
/// `expected_frac` times the population size when no cap binds.
pub fn inclusion_probabilities(
    pop: &SyntheticPopulation,
    expected_frac: f64,
) -> Result<Vec<f64>> {
    if !(expected_frac > 0.0 && expected_frac <= 1.0) {
        return Err(Error::Config(format!(
            "expected sampling fraction must be in (0, 1], got {expected_frac}"
        )));
    }
    let scores: Vec<f64> = pop
        .units
        .iter()
        .map(|u| {
            let ybar = u.y.iter().sum::<f64>() / u.y.len() as f64;
            (0.1 * ybar + 0.2 * u.wstar).exp()
        })
        .collect();
    let total: f64 = scores.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::Numerical(
            "inclusion scores are not finite; the population scale is too extreme".into(),
        ));
    }
    let target = expected_frac * pop.units.len() as f64;
    Ok(scores.iter().map(|s| (target * s / total).min(1.0)).collect())
}

/// Draws one informative Poisson sample: each unit enters independently
/// with its inclusion probability and contributes its whole response
/// window with design weight 1/pi. Weights are then scaled within week,
/// and binary panels get the previous-response covariate.
pub fn informative_sample(
    pop: &SyntheticPopulation,
    expected_frac: f64,
    rng: &mut RngStream,
) -> Result<PanelDataset> {
    let pi = inclusion_probabilities(pop, expected_frac)?;
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (i, u) in pop.units.iter().enumerate() {
        if rng.uniform() >= pi[i] {
            continue;
        }
        let unit = labels.len();
        labels.push(format!("u{i}"));
        for (k, &y) in u.y.iter().enumerate() {
            records.push(UnitWeekRecord {
                unit,
                area: u.area,
                week: u.start + k,
                y,
                trials: 1,
                weight: 1.0 / pi[i],
                scaled_weight: None,
                x: u.x.clone(),
                prev: PrevStatus::NotSampled,
            });
        }
    }
    if records.is_empty() {
        return Err(Error::Data(
            "informative sample came back empty; raise the sampling fraction".into(),
        ));
    }
    let data = PanelDataset::from_records(
        pop.mode,
        records,
        pop.n_areas,
        pop.n_weeks,
        pop.covariate_names.clone(),
        labels,
        None,
    )?;
    let data = scale_weights(data)?;
    match pop.mode {
        Mode::Binary => build_prev_covariate(data),
        Mode::Gaussian => Ok(data),
    }
}
