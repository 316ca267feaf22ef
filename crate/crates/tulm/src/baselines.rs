//! Design-based direct estimates and cross-sectional (single week at a
//! time) model baselines.
//!
//! The per-week models drop the longitudinal structure: Gaussian
//! y ~ N(x'beta + eta_j, sigma2)^w with eta ~ N(0, sigma2_eta I), and
//! binomial logit p = x'beta + eta_j with Polya-Gamma augmentation and no
//! previous-response covariate. They are written against the same kernel
//! primitives but independently of the longitudinal samplers, so the two
//! implementations can be played against each other on single-week data.

use crate::data::{Mode, PanelDataset, PopulationCells};
use crate::draws::{DrawsMeta, ParamLayout, PosteriorDraws};
use crate::error::{Error, Result};
use crate::gtulm::GtulmConfig;
use crate::btulm::BtulmConfig;
use crate::rng::gaussian::{draw_mvn_precision, PrecisionGaussian};
use crate::rng::polya_gamma::PolyaGamma;
use crate::rng::univariate::draw_inverse_gamma;
use crate::rng::RngStream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectMethod {
    /// Weighted total divided by the known domain population count.
    HorvitzThompson,
    /// Weighted total divided by the estimated count (sum of weights).
    Hajek,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectEstimate {
    pub area: usize,
    pub week: usize,
    pub point: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_responses: usize,
    /// False when the domain had no sampled responses; the numeric fields
    /// are NaN then.
    pub defined: bool,
    pub method: DirectMethod,
}

/// Direct survey-weighted domain means with a Poisson-sampling variance:
/// var = (1/N^2) sum w (w - 1) (y - mean)^2. With population cell counts
/// the divisor is the known domain size N_jt (Horvitz-Thompson); without
/// them the sum of weights stands in (Hajek). Intervals are Wald at level
/// 1 - alpha.
pub fn direct_estimate(
    data: &PanelDataset,
    cells: Option<&PopulationCells>,
    alpha: f64,
) -> Result<Vec<DirectEstimate>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let domains: Vec<(usize, usize)> = match cells {
        Some(c) => c.domains(),
        None => {
            let mut d: Vec<(usize, usize)> =
                data.records.iter().map(|r| (r.area, r.week)).collect();
            d.sort_unstable();
            d.dedup();
            d
        }
    };
    let mut by_domain: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        by_domain.entry((r.area, r.week)).or_default().push(i);
    }
    let mut out = Vec::with_capacity(domains.len());
    for (area, week) in domains {
        let idx = by_domain.get(&(area, week)).map(|v| v.as_slice()).unwrap_or(&[]);
        let pop_count = cells.map(|c| c.domain_count(area, week)).unwrap_or(0);
        let method = if pop_count > 0 {
            DirectMethod::HorvitzThompson
        } else {
            DirectMethod::Hajek
        };
        if idx.is_empty() {
            out.push(DirectEstimate {
                area,
                week,
                point: f64::NAN,
                se: f64::NAN,
                ci_lower: f64::NAN,
                ci_upper: f64::NAN,
                n_responses: 0,
                defined: false,
                method,
            });
            continue;
        }
        let wsum: f64 = idx.iter().map(|&i| data.records[i].weight).sum();
        let wysum: f64 = idx
            .iter()
            .map(|&i| data.records[i].weight * data.records[i].y)
            .sum();
        let divisor = match method {
            DirectMethod::HorvitzThompson => pop_count as f64,
            DirectMethod::Hajek => wsum,
        };
        let point = wysum / divisor;
        let quad: f64 = idx
            .iter()
            .map(|&i| {
                let r = &data.records[i];
                r.weight * (r.weight - 1.0) * (r.y - point) * (r.y - point)
            })
            .sum();
        let var = (quad / (divisor * divisor)).max(0.0);
        let se = var.sqrt();
        out.push(DirectEstimate {
            area,
            week,
            point,
            se,
            ci_lower: point - z * se,
            ci_upper: point + z * se,
            n_responses: idx.len(),
            defined: true,
            method,
        });
    }
    Ok(out)
}

/// Single-week Gaussian cache.
struct WeekCache {
    p: usize,
    n_areas: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    area: Vec<usize>,
    trials: Vec<f64>,
}

impl WeekCache {
    fn new(data: &PanelDataset) -> Result<Self> {
        if data.n_weeks != 1 {
            return Err(Error::Config(
                "per-week baseline expects a single-week dataset".into(),
            ));
        }
        let n = data.records.len();
        if n == 0 {
            return Err(Error::Data("no records in week".into()));
        }
        let p = data.p();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut area = Vec::with_capacity(n);
        let mut trials = Vec::with_capacity(n);
        for (i, r) in data.records.iter().enumerate() {
            x.extend_from_slice(&r.x);
            y.push(r.y);
            w.push(data.scaled_weight(i)?);
            area.push(r.area);
            trials.push(r.trials as f64);
        }
        Ok(WeekCache {
            p,
            n_areas: data.n_areas,
            x,
            y,
            w,
            area,
            trials,
        })
    }

    fn xdot(&self, i: usize, beta: &DVector<f64>) -> f64 {
        let xi = &self.x[i * self.p..(i + 1) * self.p];
        xi.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
    }

    fn n(&self) -> usize {
        self.y.len()
    }
}

fn week_layout(p: usize, n_areas: usize, week: usize, scalars: Vec<String>) -> ParamLayout {
    ParamLayout {
        p,
        n_areas,
        weeks: vec![week],
        scalars,
    }
}

fn gbulm_week(
    data: &PanelDataset,
    week: usize,
    cfg: &GtulmConfig,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    let cache = WeekCache::new(data)?;
    let (p, m, n) = (cache.p, cache.n_areas, cache.n());
    let mut beta;
    let mut eta = DVector::<f64>::zeros(m);
    let mut sigma2 = 1.0f64;
    let mut sigma2_eta = 1.0f64;
    let meta = DrawsMeta {
        mode: Mode::Gaussian,
        layout: week_layout(p, m, week, vec!["sigma2".into(), "sigma2_eta".into()]),
        covariate_names: data.covariate_names.clone(),
        prev_cols: None,
        n_burn: cfg.n_burn,
        thin: cfg.thin,
        rho_accept_rate: None,
    };
    let mut draws = PosteriorDraws::new(meta);
    for iter in 0..cfg.n_iter {
        // beta | eta, sigma2
        let mut precision = DMatrix::<f64>::zeros(p, p);
        let mut h = DVector::<f64>::zeros(p);
        for i in 0..n {
            let xi = &cache.x[i * p..(i + 1) * p];
            let c = cache.w[i] / sigma2;
            for r in 0..p {
                for cidx in 0..p {
                    precision[(r, cidx)] += c * xi[r] * xi[cidx];
                }
                h[r] += c * (cache.y[i] - eta[cache.area[i]]) * xi[r];
            }
        }
        for k in 0..p {
            precision[(k, k)] += 1.0 / cfg.sigma2_beta;
        }
        beta = draw_mvn_precision(&PrecisionGaussian::new(precision, h)?, rng)?;

        // eta | beta, sigma2, sigma2_eta
        let mut q = vec![1.0 / sigma2_eta; m];
        let mut lh = vec![0.0; m];
        for i in 0..n {
            let j = cache.area[i];
            q[j] += cache.w[i] / sigma2;
            lh[j] += cache.w[i] * (cache.y[i] - cache.xdot(i, &beta)) / sigma2;
        }
        for j in 0..m {
            eta[j] = lh[j] / q[j] + rng.standard_normal() / q[j].sqrt();
        }

        // sigma2 | beta, eta
        let mut quad = 0.0;
        let mut wsum = 0.0;
        for i in 0..n {
            let r = cache.y[i] - cache.xdot(i, &beta) - eta[cache.area[i]];
            quad += cache.w[i] * r * r;
            wsum += cache.w[i];
        }
        sigma2 = draw_inverse_gamma(cfg.a + 0.5 * wsum, cfg.b + 0.5 * quad, rng)?;

        // sigma2_eta | eta
        sigma2_eta = draw_inverse_gamma(
            cfg.a + 0.5 * m as f64,
            cfg.b + 0.5 * eta.norm_squared(),
            rng,
        )?;

        if iter >= cfg.n_burn && (iter - cfg.n_burn) % cfg.thin == 0 {
            let mut row = Vec::with_capacity(p + m + 2);
            row.extend(beta.iter());
            row.extend(eta.iter());
            row.push(sigma2);
            row.push(sigma2_eta);
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "single-week fit diverged at iteration {iter}"
                )));
            }
            draws.push(row)?;
        }
    }
    Ok(draws)
}

fn bbulm_week(
    data: &PanelDataset,
    week: usize,
    cfg: &BtulmConfig,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    if data.mode != Mode::Binary {
        return Err(Error::Config("model requires binary-mode data".into()));
    }
    let cache = WeekCache::new(data)?;
    let (p, m, n) = (cache.p, cache.n_areas, cache.n());
    let pg: Vec<PolyaGamma> = (0..n)
        .map(|i| PolyaGamma::new(cache.w[i] * cache.trials[i]))
        .collect::<Result<_>>()?;
    let kappa: Vec<f64> = (0..n)
        .map(|i| cache.w[i] * (cache.y[i] - cache.trials[i] / 2.0))
        .collect();
    let mut beta = DVector::<f64>::zeros(p);
    let mut eta = DVector::<f64>::zeros(m);
    let mut sigma2_eta = 1.0f64;
    let mut omega = vec![0.25f64; n];
    let meta = DrawsMeta {
        mode: Mode::Binary,
        layout: week_layout(p, m, week, vec!["sigma2_eta".into()]),
        covariate_names: data.covariate_names.clone(),
        prev_cols: None,
        n_burn: cfg.n_burn,
        thin: cfg.thin,
        rho_accept_rate: None,
    };
    let mut draws = PosteriorDraws::new(meta);
    for iter in 0..cfg.n_iter {
        for i in 0..n {
            let lambda = cache.xdot(i, &beta) + eta[cache.area[i]];
            omega[i] = pg[i].draw(lambda, rng);
        }

        let mut q = vec![1.0 / sigma2_eta; m];
        let mut lh = vec![0.0; m];
        for i in 0..n {
            let j = cache.area[i];
            q[j] += omega[i];
            lh[j] += kappa[i] - omega[i] * cache.xdot(i, &beta);
        }
        for j in 0..m {
            eta[j] = lh[j] / q[j] + rng.standard_normal() / q[j].sqrt();
        }

        let mut precision = DMatrix::<f64>::zeros(p, p);
        let mut h = DVector::<f64>::zeros(p);
        for i in 0..n {
            let xi = &cache.x[i * p..(i + 1) * p];
            for r in 0..p {
                for c in 0..p {
                    precision[(r, c)] += omega[i] * xi[r] * xi[c];
                }
                h[r] += (kappa[i] - omega[i] * eta[cache.area[i]]) * xi[r];
            }
        }
        for k in 0..p {
            precision[(k, k)] += 1.0 / cfg.sigma2_beta;
        }
        beta = draw_mvn_precision(&PrecisionGaussian::new(precision, h)?, rng)?;

        sigma2_eta = draw_inverse_gamma(
            cfg.a + 0.5 * m as f64,
            cfg.b + 0.5 * eta.norm_squared(),
            rng,
        )?;

        if iter >= cfg.n_burn && (iter - cfg.n_burn) % cfg.thin == 0 {
            let mut row = Vec::with_capacity(p + m + 1);
            row.extend(beta.iter());
            row.extend(eta.iter());
            row.push(sigma2_eta);
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "single-week fit diverged at iteration {iter}"
                )));
            }
            draws.push(row)?;
        }
    }
    Ok(draws)
}

/// Fits the cross-sectional Gaussian model to each week separately. Every
/// week runs on an identically seeded clone of `rng`, so weeks with equal
/// data produce equal chains.
pub fn run_gbulm_per_week(
    data: &PanelDataset,
    cfg: &GtulmConfig,
    rng: &RngStream,
) -> Result<Vec<PosteriorDraws>> {
    cfg.validate()?;
    if data.mode != Mode::Gaussian {
        return Err(Error::Config("model requires gaussian-mode data".into()));
    }
    let mut out = Vec::with_capacity(data.n_weeks);
    for t in 0..data.n_weeks {
        let sub = data.subset_week(t)?;
        if sub.records.is_empty() {
            continue;
        }
        let mut week_rng = rng.substream(0xb001);
        out.push(gbulm_week(&sub, t, cfg, &mut week_rng)?);
    }
    Ok(out)
}

/// Fits the cross-sectional binomial model to each week separately, with
/// the same per-week seeding rule as the Gaussian variant.
pub fn run_bbulm_per_week(
    data: &PanelDataset,
    cfg: &BtulmConfig,
    rng: &RngStream,
) -> Result<Vec<PosteriorDraws>> {
    cfg.validate()?;
    if data.mode != Mode::Binary {
        return Err(Error::Config("model requires binary-mode data".into()));
    }
    let mut out = Vec::with_capacity(data.n_weeks);
    for t in 0..data.n_weeks {
        let sub = data.subset_week(t)?;
        if sub.records.is_empty() {
            continue;
        }
        let mut week_rng = rng.substream(0xb002);
        out.push(bbulm_week(&sub, t, cfg, &mut week_rng)?);
    }
    Ok(out)
}
