//! Binomial longitudinal unit-level model with a survey-weighted
//! pseudo-likelihood and Polya-Gamma augmentation.
//!
//! Each record contributes (p^y (1-p)^(n-y))^w with
//! logit p = lambda = x'beta + eta_{t,j}, where x is the base covariate
//! row extended by the two previous-response dummies (reference level: not
//! sampled last week). Augmenting every record with
//! omega ~ PG(w n, lambda) makes beta and the weekly area effects
//! conditionally Gaussian; phi and the two effect variances update as in
//! the Gaussian model. Area effects again follow
//! eta_1 ~ N(0, sigma2_eta1 I), eta_t | eta_{t-1} ~ N(phi eta_{t-1},
//! sigma2_eta I).
//!
//! [`btulm_log_joint`] evaluates the density with omega marginalized out
//! (the weighted logistic likelihood itself) and is the independent
//! reference for the augmented updates.

use crate::data::{covariate_names_with_prev, Mode, PanelDataset, PrevStatus, UnitWeekRecord};
use crate::draws::{DrawsMeta, ParamLayout, PosteriorDraws};
use crate::error::{Error, Result};
use crate::parallel::par_chunked_rng_map;
use crate::rng::gaussian::{draw_mvn_precision, PrecisionGaussian};
use crate::rng::polya_gamma::PolyaGamma;
use crate::rng::univariate::{draw_inverse_gamma, draw_truncated_normal};
use crate::rng::RngStream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BtulmConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub a: f64,
    pub b: f64,
    pub sigma2_beta: f64,
}

impl Default for BtulmConfig {
    fn default() -> Self {
        BtulmConfig {
            n_iter: 8000,
            n_burn: 1000,
            thin: 1,
            a: 1.0,
            b: 1.0,
            sigma2_beta: 1e4,
        }
    }
}

impl BtulmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.n_burn >= self.n_iter {
            return Err(Error::Config(format!(
                "need n_burn < n_iter, got {} / {}",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.a > 0.0) || !(self.b > 0.0) || !(self.sigma2_beta > 0.0) {
            return Err(Error::Config(
                "variance hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BtulmState {
    /// Coefficients on the expanded covariates (base, prev_no, prev_yes).
    pub beta: DVector<f64>,
    pub eta: Vec<DVector<f64>>,
    pub phi: f64,
    pub sigma2_eta1: f64,
    pub sigma2_eta: f64,
    /// One augmentation variable per record.
    pub omega: Vec<f64>,
}

impl BtulmState {
    pub fn init(p_expanded: usize, n_weeks: usize, n_areas: usize, n_records: usize) -> Self {
        BtulmState {
            beta: DVector::zeros(p_expanded),
            eta: vec![DVector::zeros(n_areas); n_weeks],
            phi: 0.0,
            sigma2_eta1: 1.0,
            sigma2_eta: 1.0,
            omega: vec![0.25; n_records],
        }
    }

    fn check_finite(&self) -> Result<()> {
        let bad = !self.beta.iter().all(|v| v.is_finite())
            || !self.eta.iter().all(|e| e.iter().all(|v| v.is_finite()))
            || !self.phi.is_finite()
            || !(self.sigma2_eta1 > 0.0 && self.sigma2_eta1.is_finite())
            || !(self.sigma2_eta > 0.0 && self.sigma2_eta.is_finite())
            || !self.omega.iter().all(|v| *v > 0.0 && v.is_finite());
        if bad {
            return Err(Error::Numerical(
                "sampler state left the support (non-finite value or bad variance)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BtulmParam {
    Beta(usize),
    /// (week, area)
    Eta(usize, usize),
    Phi,
    Sigma2Eta1,
    Sigma2Eta,
}

/// Base covariates extended by the prev-status dummies.
fn expand_x(r: &UnitWeekRecord) -> Vec<f64> {
    let mut x = Vec::with_capacity(r.x.len() + 2);
    x.extend_from_slice(&r.x);
    match r.prev {
        PrevStatus::NotSampled => x.extend_from_slice(&[0.0, 0.0]),
        PrevStatus::PrevNo => x.extend_from_slice(&[1.0, 0.0]),
        PrevStatus::PrevYes => x.extend_from_slice(&[0.0, 1.0]),
    }
    x
}

struct BCache {
    p: usize,
    n: usize,
    n_areas: usize,
    n_weeks: usize,
    x: Vec<f64>,
    kappa: Vec<f64>,
    area: Vec<usize>,
    week: Vec<usize>,
    by_week: Vec<Vec<usize>>,
    pg: Vec<PolyaGamma>,
}

impl BCache {
    fn new(data: &PanelDataset) -> Result<Self> {
        if data.mode != Mode::Binary {
            return Err(Error::Config("model requires binary-mode data".into()));
        }
        if !data.prev_built {
            return Err(Error::Config(
                "build the prev-status covariate before fitting".into(),
            ));
        }
        let n = data.records.len();
        if n == 0 {
            return Err(Error::Data("no records to fit".into()));
        }
        let p = data.p() + 2;
        let mut x = Vec::with_capacity(n * p);
        let mut kappa = Vec::with_capacity(n);
        let mut area = Vec::with_capacity(n);
        let mut week = Vec::with_capacity(n);
        let mut pg = Vec::with_capacity(n);
        let mut by_week = vec![Vec::new(); data.n_weeks];
        for (i, r) in data.records.iter().enumerate() {
            let w = data.scaled_weight(i)?;
            x.extend(expand_x(r));
            kappa.push(w * (r.y - r.trials as f64 / 2.0));
            area.push(r.area);
            week.push(r.week);
            by_week[r.week].push(i);
            pg.push(PolyaGamma::new(w * r.trials as f64)?);
        }
        Ok(BCache {
            p,
            n,
            n_areas: data.n_areas,
            n_weeks: data.n_weeks,
            x,
            kappa,
            area,
            week,
            by_week,
            pg,
        })
    }

    fn xdot(&self, i: usize, beta: &DVector<f64>) -> f64 {
        let xi = &self.x[i * self.p..(i + 1) * self.p];
        xi.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
    }
}

fn b_beta_parts(cache: &BCache, state: &BtulmState, cfg: &BtulmConfig) -> (DMatrix<f64>, DVector<f64>) {
    let p = cache.p;
    let mut precision = DMatrix::zeros(p, p);
    let mut h = DVector::zeros(p);
    for i in 0..cache.n {
        let xi = &cache.x[i * p..(i + 1) * p];
        let om = state.omega[i];
        for r in 0..p {
            for c in 0..p {
                precision[(r, c)] += om * xi[r] * xi[c];
            }
        }
        let resid = cache.kappa[i] - om * state.eta[cache.week[i]][cache.area[i]];
        for r in 0..p {
            h[r] += resid * xi[r];
        }
    }
    for k in 0..p {
        precision[(k, k)] += 1.0 / cfg.sigma2_beta;
    }
    (precision, h)
}

fn b_eta_parts(cache: &BCache, state: &BtulmState, t: usize) -> (Vec<f64>, Vec<f64>) {
    let m = cache.n_areas;
    let tmax = cache.n_weeks - 1;
    let s2e = state.sigma2_eta;
    let phi = state.phi;
    let mut q = vec![0.0; m];
    let mut h = vec![0.0; m];
    for j in 0..m {
        if t == 0 {
            q[j] += 1.0 / state.sigma2_eta1;
            if tmax > 0 {
                q[j] += phi * phi / s2e;
                h[j] += phi * state.eta[1][j] / s2e;
            }
        } else if t < tmax {
            q[j] += (1.0 + phi * phi) / s2e;
            h[j] += phi * (state.eta[t - 1][j] + state.eta[t + 1][j]) / s2e;
        } else {
            q[j] += 1.0 / s2e;
            h[j] += phi * state.eta[t - 1][j] / s2e;
        }
    }
    for &i in &cache.by_week[t] {
        let j = cache.area[i];
        q[j] += state.omega[i];
        h[j] += cache.kappa[i] - state.omega[i] * cache.xdot(i, &state.beta);
    }
    (q, h)
}

pub struct BtulmSampler {
    pub cfg: BtulmConfig,
    pub state: BtulmState,
    cache: BCache,
}

impl BtulmSampler {
    pub fn new(data: &PanelDataset, cfg: BtulmConfig) -> Result<Self> {
        cfg.validate()?;
        let cache = BCache::new(data)?;
        let state = BtulmState::init(cache.p, cache.n_weeks, cache.n_areas, cache.n);
        Ok(BtulmSampler { cfg, state, cache })
    }

    /// Redraws every augmentation variable from PG(w n, lambda). Records
    /// are processed in fixed chunks with per-chunk substreams of
    /// `stream`, so the result does not depend on thread count.
    pub fn step_omega(&mut self, stream: &RngStream) -> Result<()> {
        let cache = &self.cache;
        let lambdas: Vec<f64> = (0..cache.n)
            .map(|i| cache.xdot(i, &self.state.beta) + self.state.eta[cache.week[i]][cache.area[i]])
            .collect();
        let omega = par_chunked_rng_map(stream, cache.n, |i, rng| {
            cache.pg[i].draw(lambdas[i], rng)
        });
        self.state.omega = omega;
        Ok(())
    }

    pub fn step_beta(&mut self, rng: &mut RngStream) -> Result<()> {
        let (precision, h) = b_beta_parts(&self.cache, &self.state, &self.cfg);
        let g = PrecisionGaussian::new(precision, h)?;
        self.state.beta = draw_mvn_precision(&g, rng)?;
        Ok(())
    }

    pub fn step_eta(&mut self, t: usize, rng: &mut RngStream) -> Result<()> {
        let (q, h) = b_eta_parts(&self.cache, &self.state, t);
        for j in 0..self.cache.n_areas {
            if !(q[j] > 0.0) {
                return Err(Error::Numerical(format!(
                    "non-positive conditional precision for area effect ({t}, {j})"
                )));
            }
            self.state.eta[t][j] = h[j] / q[j] + rng.standard_normal() / q[j].sqrt();
        }
        Ok(())
    }

    pub fn step_phi(&mut self, rng: &mut RngStream) -> Result<()> {
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 1..self.cache.n_weeks {
            num += self.state.eta[t].dot(&self.state.eta[t - 1]);
            den += self.state.eta[t - 1].dot(&self.state.eta[t - 1]);
        }
        self.state.phi = if den > 0.0 {
            draw_truncated_normal(num / den, self.state.sigma2_eta / den, -1.0, 1.0, rng)?
        } else {
            rng.uniform_range(-1.0, 1.0)
        };
        Ok(())
    }

    pub fn step_sigma2_eta1(&mut self, rng: &mut RngStream) -> Result<()> {
        let m = self.cache.n_areas as f64;
        let shape = self.cfg.a + 0.5 * m;
        let rate = self.cfg.b + 0.5 * self.state.eta[0].norm_squared();
        self.state.sigma2_eta1 = draw_inverse_gamma(shape, rate, rng)?;
        Ok(())
    }

    pub fn step_sigma2_eta(&mut self, rng: &mut RngStream) -> Result<()> {
        let m = self.cache.n_areas as f64;
        let tm1 = (self.cache.n_weeks - 1) as f64;
        let mut quad = 0.0;
        for t in 1..self.cache.n_weeks {
            let d = &self.state.eta[t] - &self.state.eta[t - 1] * self.state.phi;
            quad += d.norm_squared();
        }
        let shape = self.cfg.a + 0.5 * m * tm1;
        let rate = self.cfg.b + 0.5 * quad;
        self.state.sigma2_eta = draw_inverse_gamma(shape, rate, rng)?;
        Ok(())
    }

    /// One full Gibbs sweep; `omega_stream` seeds the parallel
    /// augmentation pass and must be distinct per sweep.
    pub fn sweep(&mut self, omega_stream: &RngStream, rng: &mut RngStream) -> Result<()> {
        self.step_omega(omega_stream)?;
        for t in 0..self.cache.n_weeks {
            self.step_eta(t, rng)?;
        }
        self.step_beta(rng)?;
        self.step_phi(rng)?;
        self.step_sigma2_eta1(rng)?;
        self.step_sigma2_eta(rng)?;
        self.state.check_finite()
    }

    fn row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(
            self.cache.p + self.cache.n_weeks * self.cache.n_areas + 3,
        );
        row.extend(self.state.beta.iter());
        for t in 0..self.cache.n_weeks {
            row.extend(self.state.eta[t].iter());
        }
        row.push(self.state.phi);
        row.push(self.state.sigma2_eta1);
        row.push(self.state.sigma2_eta);
        row
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout {
            p: self.cache.p,
            n_areas: self.cache.n_areas,
            weeks: (0..self.cache.n_weeks).collect(),
            scalars: vec![
                "phi".into(),
                "sigma2_eta1".into(),
                "sigma2_eta".into(),
            ],
        }
    }
}

/// Precision-form conditional of beta given the current augmentation.
pub fn btulm_beta_conditional(
    data: &PanelDataset,
    state: &BtulmState,
    cfg: &BtulmConfig,
) -> Result<PrecisionGaussian> {
    let cache = BCache::new(data)?;
    let (precision, h) = b_beta_parts(&cache, state, cfg);
    PrecisionGaussian::new(precision, h)
}

/// Precision-form conditional of the week-t area effects given the
/// current augmentation.
pub fn btulm_eta_conditional(
    data: &PanelDataset,
    state: &BtulmState,
    t: usize,
) -> Result<PrecisionGaussian> {
    let cache = BCache::new(data)?;
    if t >= cache.n_weeks {
        return Err(Error::Config(format!("week {t} out of range")));
    }
    let (q, h) = b_eta_parts(&cache, state, t);
    PrecisionGaussian::new(
        DMatrix::from_diagonal(&DVector::from_vec(q.clone())),
        DVector::from_vec(h),
    )
}

fn ln1p_exp(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn ln_normal(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln()) - d * d / (2.0 * var)
}

fn ln_inverse_gamma(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln()
        - rate / x
}

/// Log joint of data and parameters with the augmentation marginalized
/// out, up to the binomial coefficients (constant in the parameters).
pub fn btulm_log_joint(data: &PanelDataset, state: &BtulmState, cfg: &BtulmConfig) -> Result<f64> {
    if data.mode != Mode::Binary {
        return Err(Error::Config("model requires binary-mode data".into()));
    }
    if !data.prev_built {
        return Err(Error::Config(
            "build the prev-status covariate before evaluating the model".into(),
        ));
    }
    if state.phi.abs() >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if state.sigma2_eta1 <= 0.0 || state.sigma2_eta <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut lp = 0.0;
    for (i, r) in data.records.iter().enumerate() {
        let w = data.scaled_weight(i)?;
        let x = expand_x(r);
        let lambda: f64 = x.iter().zip(state.beta.iter()).map(|(a, b)| a * b).sum::<f64>()
            + state.eta[r.week][r.area];
        lp += w * (r.y * lambda - r.trials as f64 * ln1p_exp(lambda));
    }
    for k in 0..state.beta.len() {
        lp += ln_normal(state.beta[k], 0.0, cfg.sigma2_beta);
    }
    for j in 0..data.n_areas {
        lp += ln_normal(state.eta[0][j], 0.0, state.sigma2_eta1);
    }
    for t in 1..data.n_weeks {
        for j in 0..data.n_areas {
            lp += ln_normal(state.eta[t][j], state.phi * state.eta[t - 1][j], state.sigma2_eta);
        }
    }
    lp += (0.5f64).ln();
    lp += ln_inverse_gamma(state.sigma2_eta1, cfg.a, cfg.b);
    lp += ln_inverse_gamma(state.sigma2_eta, cfg.a, cfg.b);
    Ok(lp)
}

/// Log joint with one scalar coordinate replaced by `value`.
pub fn btulm_full_conditional_logdensity(
    param: BtulmParam,
    value: f64,
    state: &BtulmState,
    data: &PanelDataset,
    cfg: &BtulmConfig,
) -> Result<f64> {
    let mut s = state.clone();
    match param {
        BtulmParam::Beta(k) => s.beta[k] = value,
        BtulmParam::Eta(t, j) => s.eta[t][j] = value,
        BtulmParam::Phi => s.phi = value,
        BtulmParam::Sigma2Eta1 => s.sigma2_eta1 = value,
        BtulmParam::Sigma2Eta => s.sigma2_eta = value,
    }
    btulm_log_joint(data, &s, cfg)
}

/// Monte Carlo check of the augmentation identity for one record: returns
/// the weighted binomial log-likelihood at `lambda` (left) and the same
/// quantity reconstructed from draws of PG(w n, 0) (right), both up to
/// the binomial coefficient.
pub fn pg_loglik_identity_check(
    y: f64,
    trials: u64,
    w: f64,
    lambda: f64,
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if n_draws == 0 {
        return Err(Error::Config("need at least one draw".into()));
    }
    let b = w * trials as f64;
    let kappa = w * (y - trials as f64 / 2.0);
    let lhs = w * (y * lambda - trials as f64 * ln1p_exp(lambda));
    let pg = PolyaGamma::new(b)?;
    let mut acc = 0.0;
    for _ in 0..n_draws {
        let omega = pg.draw(0.0, rng);
        acc += (-omega * lambda * lambda / 2.0).exp();
    }
    let rhs = -b * 2.0f64.ln() + kappa * lambda + (acc / n_draws as f64).ln();
    Ok((lhs, rhs))
}

/// Runs the augmented Gibbs sampler. Sequential draws consume `rng`; the
/// per-sweep augmentation passes use substreams of it keyed by sweep
/// index.
pub fn run_btulm(
    data: &PanelDataset,
    cfg: &BtulmConfig,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    let mut sampler = BtulmSampler::new(data, cfg.clone())?;
    let layout = sampler.layout();
    let p_base = data.p();
    let meta = DrawsMeta {
        mode: Mode::Binary,
        layout,
        covariate_names: covariate_names_with_prev(&data.covariate_names),
        prev_cols: Some((p_base, p_base + 1)),
        n_burn: cfg.n_burn,
        thin: cfg.thin,
        rho_accept_rate: None,
    };
    let omega_root = rng.substream(0x6f6d_6567);
    let mut draws = PosteriorDraws::new(meta);
    for iter in 0..cfg.n_iter {
        let omega_stream = omega_root.substream(iter as u64);
        sampler
            .sweep(&omega_stream, rng)
            .map_err(|e| Error::Numerical(format!("sweep {iter}: {e}")))?;
        if iter >= cfg.n_burn && (iter - cfg.n_burn) % cfg.thin == 0 {
            draws.push(sampler.row())?;
        }
    }
    Ok(draws)
}
