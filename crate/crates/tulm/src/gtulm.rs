//! Gaussian longitudinal unit-level model with a survey-weighted
//! pseudo-likelihood.
//!
//! For a unit's first response, y ~ N(mu, sigma2)^w with
//! mu = x'beta + eta_{t,j}; for a follow-up one week after the previous
//! response, y ~ N(mu + rho (y_prev - mu_prev), sigma2 (1 - rho^2))^w, an
//! AR(1) in the unit's residuals. Area effects evolve as
//! eta_1 ~ N(0, sigma2_eta1 I), eta_t | eta_{t-1} ~ N(phi eta_{t-1},
//! sigma2_eta I). beta ~ N(0, sigma2_beta I), rho and phi are uniform on
//! (-1, 1), and the three variances are inverse gamma with shape `a` and
//! rate `b`.
//!
//! All updates are conjugate Gibbs draws except rho, which takes a
//! random-walk Metropolis step. [`gtulm_log_joint`] evaluates the same
//! model density directly from this statement and is the reference the
//! conditional draws are tested against.

use crate::data::{Mode, PanelDataset};
use crate::draws::{DrawsMeta, ParamLayout, PosteriorDraws};
use crate::error::{Error, Result};
use crate::rng::gaussian::{draw_mvn_precision, PrecisionGaussian};
use crate::rng::univariate::{draw_inverse_gamma, draw_truncated_normal};
use crate::rng::RngStream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.837877066409345483560659;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GtulmConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    /// Inverse-gamma shape for the three variance parameters.
    pub a: f64,
    /// Inverse-gamma rate.
    pub b: f64,
    pub sigma2_beta: f64,
    pub rho_halfwidth: f64,
}

impl Default for GtulmConfig {
    fn default() -> Self {
        GtulmConfig {
            n_iter: 2000,
            n_burn: 500,
            thin: 1,
            a: 1.0,
            b: 1.0,
            sigma2_beta: 1e4,
            rho_halfwidth: 0.05,
        }
    }
}

impl GtulmConfig {
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
        if !(self.rho_halfwidth > 0.0 && self.rho_halfwidth <= 1.0) {
            return Err(Error::Config(
                "rho_halfwidth must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GtulmState {
    pub beta: DVector<f64>,
    /// One vector of area effects per week.
    pub eta: Vec<DVector<f64>>,
    pub rho: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub sigma2_eta1: f64,
    pub sigma2_eta: f64,
}

impl GtulmState {
    pub fn init(p: usize, n_weeks: usize, n_areas: usize) -> Self {
        GtulmState {
            beta: DVector::zeros(p),
            eta: vec![DVector::zeros(n_areas); n_weeks],
            rho: 0.0,
            phi: 0.0,
            sigma2: 1.0,
            sigma2_eta1: 1.0,
            sigma2_eta: 1.0,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let bad = !self.beta.iter().all(|v| v.is_finite())
            || !self.eta.iter().all(|e| e.iter().all(|v| v.is_finite()))
            || !self.rho.is_finite()
            || !self.phi.is_finite()
            || !(self.sigma2 > 0.0 && self.sigma2.is_finite())
            || !(self.sigma2_eta1 > 0.0 && self.sigma2_eta1.is_finite())
            || !(self.sigma2_eta > 0.0 && self.sigma2_eta.is_finite());
        if bad {
            return Err(Error::Numerical(
                "sampler state left the support (non-finite or non-positive variance)".into(),
            ));
        }
        Ok(())
    }
}

/// A scalar coordinate of the model, for conditional-density evaluation.
#[derive(Clone, Copy, Debug)]
pub enum GtulmParam {
    Beta(usize),
    /// (week, area)
    Eta(usize, usize),
    Rho,
    Phi,
    Sigma2,
    Sigma2Eta1,
    Sigma2Eta,
}

/// Flat arrays over records plus the precomputed pieces every sweep reuses.
struct Cache {
    p: usize,
    n_areas: usize,
    n_weeks: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    area: Vec<usize>,
    prev: Vec<Option<usize>>,
    first_by_week: Vec<Vec<usize>>,
    follow_by_week: Vec<Vec<usize>>,
    /// Sum of w x x' over first-time records.
    xtwx_first: DMatrix<f64>,
    /// Sum of w x x' over follow-up records.
    xtwx_follow: DMatrix<f64>,
    w_total: f64,
    w_follow_total: f64,
}

impl Cache {
    fn new(data: &PanelDataset) -> Result<Self> {
        if data.mode != Mode::Gaussian {
            return Err(Error::Config("model requires gaussian-mode data".into()));
        }
        let n = data.records.len();
        if n == 0 {
            return Err(Error::Data("no records to fit".into()));
        }
        let p = data.p();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut area = Vec::with_capacity(n);
        for (i, r) in data.records.iter().enumerate() {
            x.extend_from_slice(&r.x);
            y.push(r.y);
            w.push(data.scaled_weight(i)?);
            area.push(r.area);
        }
        let mut xtwx_first = DMatrix::zeros(p, p);
        let mut xtwx_follow = DMatrix::zeros(p, p);
        let mut w_follow_total = 0.0;
        for i in 0..n {
            let xi = &x[i * p..(i + 1) * p];
            let target = if data.prev_index[i].is_some() {
                w_follow_total += w[i];
                &mut xtwx_follow
            } else {
                &mut xtwx_first
            };
            for r in 0..p {
                for c in 0..p {
                    target[(r, c)] += w[i] * xi[r] * xi[c];
                }
            }
        }
        let w_total = w.iter().sum();
        Ok(Cache {
            p,
            n_areas: data.n_areas,
            n_weeks: data.n_weeks,
            x,
            y,
            w,
            area,
            prev: data.prev_index.clone(),
            first_by_week: data.first_time.clone(),
            follow_by_week: data.followup.clone(),
            xtwx_first,
            xtwx_follow,
            w_total,
            w_follow_total,
        })
    }

    fn xdot(&self, i: usize, beta: &DVector<f64>) -> f64 {
        let xi = &self.x[i * self.p..(i + 1) * self.p];
        xi.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
    }
}

fn beta_parts(cache: &Cache, state: &GtulmState, cfg: &GtulmConfig) -> (DMatrix<f64>, DVector<f64>) {
    let p = cache.p;
    let s2 = state.sigma2;
    let rho = state.rho;
    let mut precision = &cache.xtwx_first / s2
        + &cache.xtwx_follow * ((1.0 - rho) / (s2 * (1.0 + rho)));
    for k in 0..p {
        precision[(k, k)] += 1.0 / cfg.sigma2_beta;
    }
    let mut h = DVector::zeros(p);
    for t in 0..cache.n_weeks {
        for &i in &cache.first_by_week[t] {
            let c = cache.w[i] / s2 * (cache.y[i] - state.eta[t][cache.area[i]]);
            let xi = &cache.x[i * p..(i + 1) * p];
            for k in 0..p {
                h[k] += c * xi[k];
            }
        }
        for &i in &cache.follow_by_week[t] {
            let ip = cache.prev[i].unwrap();
            let resid = (cache.y[i] - state.eta[t][cache.area[i]])
                - rho * (cache.y[ip] - state.eta[t - 1][cache.area[i]]);
            let c = cache.w[i] / (s2 * (1.0 + rho)) * resid;
            let xi = &cache.x[i * p..(i + 1) * p];
            for k in 0..p {
                h[k] += c * xi[k];
            }
        }
    }
    (precision, h)
}

/// Diagonal precision and linear term of the week-t area effects.
fn eta_parts(
    cache: &Cache,
    state: &GtulmState,
    t: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = cache.n_areas;
    let tmax = cache.n_weeks - 1;
    let s2 = state.sigma2;
    let s2e = state.sigma2_eta;
    let phi = state.phi;
    let rho = state.rho;
    let omr2 = 1.0 - rho * rho;

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
    for &i in &cache.first_by_week[t] {
        let j = cache.area[i];
        q[j] += cache.w[i] / s2;
        h[j] += cache.w[i] * (cache.y[i] - cache.xdot(i, &state.beta)) / s2;
    }
    for &i in &cache.follow_by_week[t] {
        let j = cache.area[i];
        let ip = cache.prev[i].unwrap();
        q[j] += cache.w[i] / (s2 * omr2);
        let b = (cache.y[i] - cache.xdot(i, &state.beta))
            - rho * (cache.y[ip] - cache.xdot(ip, &state.beta) - state.eta[t - 1][j]);
        h[j] += cache.w[i] * b / (s2 * omr2);
    }
    if t + 1 < cache.n_weeks {
        for &i in &cache.follow_by_week[t + 1] {
            let j = cache.area[i];
            let ip = cache.prev[i].unwrap();
            q[j] += cache.w[i] * rho * rho / (s2 * omr2);
            let a = (cache.y[i] - cache.xdot(i, &state.beta) - state.eta[t + 1][j])
                - rho * (cache.y[ip] - cache.xdot(ip, &state.beta));
            h[j] -= cache.w[i] * rho * a / (s2 * omr2);
        }
    }
    (q, h)
}

/// Log full conditional of rho up to a constant: the terms of the
/// pseudo-likelihood that involve the residual autocorrelation, under a
/// flat prior on (-1, 1).
fn rho_log_conditional_cached(cache: &Cache, state: &GtulmState, rho: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let omr2 = 1.0 - rho * rho;
    let mut quad = 0.0;
    for t in 0..cache.n_weeks {
        for &i in &cache.follow_by_week[t] {
            let ip = cache.prev[i].unwrap();
            let e_now = cache.y[i] - cache.xdot(i, &state.beta) - state.eta[t][cache.area[i]];
            let e_prev =
                cache.y[ip] - cache.xdot(ip, &state.beta) - state.eta[t - 1][cache.area[i]];
            let d = e_now - rho * e_prev;
            quad += cache.w[i] * d * d;
        }
    }
    -0.5 * cache.w_follow_total * omr2.ln() - quad / (2.0 * state.sigma2 * omr2)
}

pub struct GtulmSampler {
    pub cfg: GtulmConfig,
    pub state: GtulmState,
    cache: Cache,
    rho_proposals: usize,
    rho_accepts: usize,
}

impl GtulmSampler {
    pub fn new(data: &PanelDataset, cfg: GtulmConfig) -> Result<Self> {
        cfg.validate()?;
        let cache = Cache::new(data)?;
        let state = GtulmState::init(cache.p, cache.n_weeks, cache.n_areas);
        Ok(GtulmSampler {
            cfg,
            state,
            cache,
            rho_proposals: 0,
            rho_accepts: 0,
        })
    }

    pub fn step_beta(&mut self, rng: &mut RngStream) -> Result<()> {
        let (precision, h) = beta_parts(&self.cache, &self.state, &self.cfg);
        let g = PrecisionGaussian::new(precision, h)?;
        self.state.beta = draw_mvn_precision(&g, rng)?;
        Ok(())
    }

    pub fn step_eta(&mut self, t: usize, rng: &mut RngStream) -> Result<()> {
        let (q, h) = eta_parts(&self.cache, &self.state, t);
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

    /// Random-walk Metropolis update of rho; returns whether the proposal
    /// was accepted.
    pub fn step_rho(&mut self, rng: &mut RngStream) -> bool {
        self.rho_proposals += 1;
        let cur = self.state.rho;
        let prop = cur + rng.uniform_range(-self.cfg.rho_halfwidth, self.cfg.rho_halfwidth);
        if prop.abs() >= 1.0 {
            return false;
        }
        let delta = rho_log_conditional_cached(&self.cache, &self.state, prop)
            - rho_log_conditional_cached(&self.cache, &self.state, cur);
        if delta >= 0.0 || rng.uniform().ln() < delta {
            self.state.rho = prop;
            self.rho_accepts += 1;
            true
        } else {
            false
        }
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

    pub fn step_sigma2(&mut self, rng: &mut RngStream) -> Result<()> {
        let c = &self.cache;
        let rho = self.state.rho;
        let omr2 = 1.0 - rho * rho;
        let mut quad = 0.0;
        for t in 0..c.n_weeks {
            for &i in &c.first_by_week[t] {
                let r = c.y[i] - c.xdot(i, &self.state.beta) - self.state.eta[t][c.area[i]];
                quad += c.w[i] * r * r;
            }
            for &i in &c.follow_by_week[t] {
                let ip = c.prev[i].unwrap();
                let e_now = c.y[i] - c.xdot(i, &self.state.beta) - self.state.eta[t][c.area[i]];
                let e_prev =
                    c.y[ip] - c.xdot(ip, &self.state.beta) - self.state.eta[t - 1][c.area[i]];
                let d = e_now - rho * e_prev;
                quad += c.w[i] * d * d / omr2;
            }
        }
        let shape = self.cfg.a + 0.5 * c.w_total;
        let rate = self.cfg.b + 0.5 * quad;
        self.state.sigma2 = draw_inverse_gamma(shape, rate, rng)?;
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

    pub fn sweep(&mut self, rng: &mut RngStream) -> Result<()> {
        self.step_beta(rng)?;
        for t in 0..self.cache.n_weeks {
            self.step_eta(t, rng)?;
        }
        self.step_rho(rng);
        self.step_phi(rng)?;
        self.step_sigma2(rng)?;
        self.step_sigma2_eta1(rng)?;
        self.step_sigma2_eta(rng)?;
        self.state.check_finite()
    }

    pub fn rho_accept_rate(&self) -> f64 {
        if self.rho_proposals == 0 {
            return 0.0;
        }
        self.rho_accepts as f64 / self.rho_proposals as f64
    }

    fn row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(
            self.cache.p + self.cache.n_weeks * self.cache.n_areas + 5,
        );
        row.extend(self.state.beta.iter());
        for t in 0..self.cache.n_weeks {
            row.extend(self.state.eta[t].iter());
        }
        row.push(self.state.rho);
        row.push(self.state.phi);
        row.push(self.state.sigma2);
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
                "rho".into(),
                "phi".into(),
                "sigma2".into(),
                "sigma2_eta1".into(),
                "sigma2_eta".into(),
            ],
        }
    }
}

/// Precision-form full conditional of beta at the given state.
pub fn beta_conditional(
    data: &PanelDataset,
    state: &GtulmState,
    cfg: &GtulmConfig,
) -> Result<PrecisionGaussian> {
    let cache = Cache::new(data)?;
    let (precision, h) = beta_parts(&cache, state, cfg);
    PrecisionGaussian::new(precision, h)
}

/// Precision-form full conditional of the week-t area effects.
pub fn eta_conditional(
    data: &PanelDataset,
    state: &GtulmState,
    t: usize,
) -> Result<PrecisionGaussian> {
    let cache = Cache::new(data)?;
    if t >= cache.n_weeks {
        return Err(Error::Config(format!("week {t} out of range")));
    }
    let (q, h) = eta_parts(&cache, state, t);
    PrecisionGaussian::new(
        DMatrix::from_diagonal(&DVector::from_vec(q.clone())),
        DVector::from_vec(h),
    )
}

/// Log conditional of rho up to an additive constant, from a fresh pass
/// over the data.
pub fn rho_log_conditional(data: &PanelDataset, state: &GtulmState) -> Result<f64> {
    let cache = Cache::new(data)?;
    Ok(rho_log_conditional_cached(&cache, state, state.rho))
}

fn ln_normal(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
}

fn ln_inverse_gamma(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln()
        - rate / x
}

/// Log joint density of data and parameters, written directly from the
/// model statement. Quadrature over this function is the independent
/// check of every conditional update.
pub fn gtulm_log_joint(data: &PanelDataset, state: &GtulmState, cfg: &GtulmConfig) -> Result<f64> {
    if data.mode != Mode::Gaussian {
        return Err(Error::Config("model requires gaussian-mode data".into()));
    }
    if state.rho.abs() >= 1.0 || state.phi.abs() >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if state.sigma2 <= 0.0 || state.sigma2_eta1 <= 0.0 || state.sigma2_eta <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let xdot = |i: usize| -> f64 {
        data.records[i]
            .x
            .iter()
            .zip(state.beta.iter())
            .map(|(a, b)| a * b)
            .sum()
    };
    let mut lp = 0.0;
    for i in 0..data.records.len() {
        let r = &data.records[i];
        let w = data.scaled_weight(i)?;
        let mu = xdot(i) + state.eta[r.week][r.area];
        lp += match data.prev_index[i] {
            None => w * ln_normal(r.y, mu, state.sigma2),
            Some(ip) => {
                let rp = &data.records[ip];
                let mu_prev = xdot(ip) + state.eta[rp.week][rp.area];
                let mean = mu + state.rho * (rp.y - mu_prev);
                w * ln_normal(r.y, mean, state.sigma2 * (1.0 - state.rho * state.rho))
            }
        };
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
    // rho, phi ~ U(-1, 1)
    lp += 2.0 * (0.5f64).ln();
    lp += ln_inverse_gamma(state.sigma2, cfg.a, cfg.b);
    lp += ln_inverse_gamma(state.sigma2_eta1, cfg.a, cfg.b);
    lp += ln_inverse_gamma(state.sigma2_eta, cfg.a, cfg.b);
    Ok(lp)
}

/// Log joint with one scalar coordinate replaced by `value`; as a function
/// of `value` this is the unnormalized full conditional.
pub fn gtulm_full_conditional_logdensity(
    param: GtulmParam,
    value: f64,
    state: &GtulmState,
    data: &PanelDataset,
    cfg: &GtulmConfig,
) -> Result<f64> {
    let mut s = state.clone();
    match param {
        GtulmParam::Beta(k) => s.beta[k] = value,
        GtulmParam::Eta(t, j) => s.eta[t][j] = value,
        GtulmParam::Rho => s.rho = value,
        GtulmParam::Phi => s.phi = value,
        GtulmParam::Sigma2 => s.sigma2 = value,
        GtulmParam::Sigma2Eta1 => s.sigma2_eta1 = value,
        GtulmParam::Sigma2Eta => s.sigma2_eta = value,
    }
    gtulm_log_joint(data, &s, cfg)
}

/// Runs the Gibbs sampler and returns retained draws.
pub fn run_gtulm(
    data: &PanelDataset,
    cfg: &GtulmConfig,
    rng: &mut RngStream,
) -> Result<PosteriorDraws> {
    let mut sampler = GtulmSampler::new(data, cfg.clone())?;
    let layout = sampler.layout();
    let meta = DrawsMeta {
        mode: Mode::Gaussian,
        layout,
        covariate_names: data.covariate_names.clone(),
        prev_cols: None,
        n_burn: cfg.n_burn,
        thin: cfg.thin,
        rho_accept_rate: None,
    };
    let mut draws = PosteriorDraws::new(meta);
    for iter in 0..cfg.n_iter {
        sampler.sweep(rng).map_err(|e| {
            Error::Numerical(format!("sweep {iter}: {e}"))
        })?;
        if iter >= cfg.n_burn && (iter - cfg.n_burn) % cfg.thin == 0 {
            draws.push(sampler.row())?;
        }
    }
    draws.meta.rho_accept_rate = Some(sampler.rho_accept_rate());
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{scale_weights, PrevStatus, UnitWeekRecord};
    use crate::diagnostics::GridDensity;
    use approx::assert_relative_eq;

    /// Panel generated from the model itself, unequal weights.
    fn simulate(
        seed: u64,
        n_units: usize,
        m: usize,
        t_weeks: usize,
        beta: &[f64],
        rho: f64,
        phi: f64,
        sigma2: f64,
    ) -> PanelDataset {
        let mut rng = RngStream::new(seed, 901);
        let s2e1: f64 = 0.4;
        let s2e: f64 = 0.2;
        let mut eta = vec![vec![0.0; m]; t_weeks];
        for j in 0..m {
            eta[0][j] = s2e1.sqrt() * rng.standard_normal();
        }
        for t in 1..t_weeks {
            for j in 0..m {
                eta[t][j] = phi * eta[t - 1][j] + s2e.sqrt() * rng.standard_normal();
            }
        }
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for u in 0..n_units {
            let area = u % m;
            let x1 = rng.standard_normal();
            let x = vec![1.0, x1];
            let len = 1 + (rng.uniform() * 3.0) as usize;
            let len = len.min(3).min(t_weeks);
            let start = (rng.uniform() * (t_weeks - len + 1) as f64) as usize;
            let start = start.min(t_weeks - len);
            let weight = 0.5 + 2.5 * rng.uniform();
            let mut prev_y = 0.0;
            for k in 0..len {
                let t = start + k;
                let mu = beta[0] + beta[1] * x1 + eta[t][area];
                let y = if k == 0 {
                    mu + sigma2.sqrt() * rng.standard_normal()
                } else {
                    let mu_prev = beta[0] + beta[1] * x1 + eta[t - 1][area];
                    mu + rho * (prev_y - mu_prev)
                        + (sigma2 * (1.0 - rho * rho)).sqrt() * rng.standard_normal()
                };
                prev_y = y;
                records.push(UnitWeekRecord {
                    unit: u,
                    area,
                    week: t,
                    y,
                    trials: 1,
                    weight,
                    scaled_weight: None,
                    x: x.clone(),
                    prev: PrevStatus::NotSampled,
                });
            }
            labels.push(format!("u{u}"));
        }
        let data = PanelDataset::from_records(
            Mode::Gaussian,
            records,
            m,
            t_weeks,
            vec!["intercept".into(), "x1".into()],
            labels,
            None,
        )
        .unwrap();
        scale_weights(data).unwrap()
    }

    fn mid_state(data: &PanelDataset) -> GtulmState {
        let mut s = GtulmState::init(data.p(), data.n_weeks, data.n_areas);
        s.beta[0] = 0.3;
        if s.beta.len() > 1 {
            s.beta[1] = -0.2;
        }
        for t in 0..data.n_weeks {
            for j in 0..data.n_areas {
                s.eta[t][j] = 0.1 * (t as f64) - 0.05 * (j as f64);
            }
        }
        s.rho = 0.4;
        s.phi = 0.5;
        s.sigma2 = 0.8;
        s.sigma2_eta1 = 0.5;
        s.sigma2_eta = 0.3;
        s
    }

    #[test]
    fn zero_rho_makes_followups_independent() {
        let data = simulate(11, 60, 3, 4, &[0.5, 1.0], 0.7, 0.5, 1.0);
        let mut state = mid_state(&data);
        state.rho = 0.0;
        let joint = gtulm_log_joint(&data, &state, &GtulmConfig::default()).unwrap();
        // with rho = 0 every record is an independent weighted normal
        let mut expect = 0.0;
        for (i, r) in data.records.iter().enumerate() {
            let mu: f64 = r.x.iter().zip(state.beta.iter()).map(|(a, b)| a * b).sum::<f64>()
                + state.eta[r.week][r.area];
            expect += data.scaled_weight(i).unwrap() * ln_normal(r.y, mu, state.sigma2);
        }
        let prior_only = {
            let cfg = GtulmConfig::default();
            let mut lp = 0.0;
            for k in 0..state.beta.len() {
                lp += ln_normal(state.beta[k], 0.0, cfg.sigma2_beta);
            }
            for j in 0..data.n_areas {
                lp += ln_normal(state.eta[0][j], 0.0, state.sigma2_eta1);
            }
            for t in 1..data.n_weeks {
                for j in 0..data.n_areas {
                    lp += ln_normal(
                        state.eta[t][j],
                        state.phi * state.eta[t - 1][j],
                        state.sigma2_eta,
                    );
                }
            }
            lp += 2.0 * (0.5f64).ln();
            lp += ln_inverse_gamma(state.sigma2, cfg.a, cfg.b);
            lp += ln_inverse_gamma(state.sigma2_eta1, cfg.a, cfg.b);
            lp += ln_inverse_gamma(state.sigma2_eta, cfg.a, cfg.b);
            lp
        };
        assert_relative_eq!(joint, expect + prior_only, max_relative = 1e-12);
    }

    #[test]
    fn rho_conditional_matches_log_joint_differences() {
        let data = simulate(12, 50, 3, 4, &[0.5, 1.0], 0.5, 0.5, 1.0);
        let state = mid_state(&data);
        let cfg = GtulmConfig::default();
        for &(r1, r2) in &[(0.1, 0.6), (-0.4, 0.3), (0.0, 0.85)] {
            let mut s1 = state.clone();
            s1.rho = r1;
            let mut s2 = state.clone();
            s2.rho = r2;
            let fast = rho_log_conditional(&data, &s2).unwrap()
                - rho_log_conditional(&data, &s1).unwrap();
            let full = gtulm_log_joint(&data, &s2, &cfg).unwrap()
                - gtulm_log_joint(&data, &s1, &cfg).unwrap();
            assert_relative_eq!(fast, full, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    /// Draws from a single-site updater against quadrature over the log
    /// joint on a grid.
    fn grid_check<F>(draws: &[f64], lo: f64, hi: f64, logd: F, tol: f64)
    where
        F: Fn(f64) -> f64,
    {
        let grid = GridDensity::new(lo, hi, 2001, logd).unwrap();
        let d = grid.ks_distance(draws);
        assert!(d < tol, "grid KS distance {d} >= {tol}");
    }

    #[test]
    fn sigma2_conditional_matches_grid() {
        let data = simulate(13, 40, 3, 3, &[0.5, 1.0], 0.4, 0.5, 1.0);
        let state = mid_state(&data);
        let cfg = GtulmConfig::default();
        let mut sampler = GtulmSampler::new(&data, cfg.clone()).unwrap();
        sampler.state = state.clone();
        let mut rng = RngStream::new(5150, 0);
        let draws: Vec<f64> = (0..3000)
            .map(|_| {
                sampler.state = state.clone();
                sampler.step_sigma2(&mut rng).unwrap();
                sampler.state.sigma2
            })
            .collect();
        let (lo, hi) = draws.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
        let span = hi - lo;
        grid_check(
            &draws,
            (lo - 0.5 * span).max(1e-6),
            hi + 0.5 * span,
            |v| {
                gtulm_full_conditional_logdensity(GtulmParam::Sigma2, v, &state, &data, &cfg)
                    .unwrap()
            },
            0.04,
        );
    }

    #[test]
    fn eta_coordinate_matches_grid() {
        let data = simulate(14, 40, 3, 3, &[0.5, 1.0], 0.4, 0.5, 1.0);
        let state = mid_state(&data);
        let cfg = GtulmConfig::default();
        // week 1 is interior: prior ties to both neighbors plus both
        // likelihood partitions contribute
        let g = eta_conditional(&data, &state, 1).unwrap();
        let mut sampler = GtulmSampler::new(&data, cfg.clone()).unwrap();
        let mut rng = RngStream::new(5151, 0);
        let draws: Vec<f64> = (0..3000)
            .map(|_| {
                sampler.state = state.clone();
                sampler.step_eta(1, &mut rng).unwrap();
                sampler.state.eta[1][0]
            })
            .collect();
        // diagonal precision makes the coordinate marginal equal its full
        // conditional
        let prec = g.precision()[(0, 0)];
        let mean = g.linear()[0] / prec;
        let sd = (1.0 / prec).sqrt();
        grid_check(
            &draws,
            mean - 8.0 * sd,
            mean + 8.0 * sd,
            |v| {
                gtulm_full_conditional_logdensity(GtulmParam::Eta(1, 0), v, &state, &data, &cfg)
                    .unwrap()
            },
            0.04,
        );
    }

    #[test]
    fn beta_intercept_only_matches_grid() {
        // single-covariate design so the joint redraw is the scalar
        // conditional
        let mut data = simulate(15, 40, 2, 3, &[0.5, 0.0], 0.4, 0.5, 1.0);
        for r in &mut data.records {
            r.x = vec![1.0];
        }
        let data = PanelDataset::from_records(
            Mode::Gaussian,
            data.records.clone(),
            data.n_areas,
            data.n_weeks,
            vec!["intercept".into()],
            data.unit_labels.clone(),
            None,
        )
        .unwrap();
        let data = scale_weights(data).unwrap();
        let mut state = mid_state(&data);
        state.beta = DVector::from_vec(vec![0.3]);
        let cfg = GtulmConfig::default();
        let g = beta_conditional(&data, &state, &cfg).unwrap();
        let prec = g.precision()[(0, 0)];
        let mean = g.linear()[0] / prec;
        let sd = (1.0 / prec).sqrt();
        let mut sampler = GtulmSampler::new(&data, cfg.clone()).unwrap();
        let mut rng = RngStream::new(5152, 0);
        let draws: Vec<f64> = (0..3000)
            .map(|_| {
                sampler.state = state.clone();
                sampler.step_beta(&mut rng).unwrap();
                sampler.state.beta[0]
            })
            .collect();
        grid_check(
            &draws,
            mean - 8.0 * sd,
            mean + 8.0 * sd,
            |v| {
                gtulm_full_conditional_logdensity(GtulmParam::Beta(0), v, &state, &data, &cfg)
                    .unwrap()
            },
            0.04,
        );
    }

    #[test]
    fn rho_metropolis_matches_grid() {
        let data = simulate(16, 50, 3, 4, &[0.5, 1.0], 0.5, 0.5, 1.0);
        let state = mid_state(&data);
        let cfg = GtulmConfig {
            rho_halfwidth: 0.5,
            ..GtulmConfig::default()
        };
        let mut sampler = GtulmSampler::new(&data, cfg.clone()).unwrap();
        sampler.state = state.clone();
        let mut rng = RngStream::new(5153, 0);
        // thin a pure-rho Metropolis chain to near-independence
        let mut draws = Vec::with_capacity(2000);
        for i in 0..30000 {
            sampler.step_rho(&mut rng);
            if i % 15 == 0 {
                draws.push(sampler.state.rho);
            }
        }
        assert!(sampler.rho_accept_rate() > 0.05);
        grid_check(
            &draws,
            -0.999,
            0.999,
            |v| {
                gtulm_full_conditional_logdensity(GtulmParam::Rho, v, &state, &data, &cfg).unwrap()
            },
            0.05,
        );
    }

    #[test]
    fn phi_falls_back_to_uniform_when_effects_vanish() {
        let data = simulate(17, 30, 3, 1, &[0.5, 1.0], 0.0, 0.0, 1.0);
        let cfg = GtulmConfig::default();
        let mut sampler = GtulmSampler::new(&data, cfg).unwrap();
        let mut rng = RngStream::new(5154, 0);
        let draws: Vec<f64> = (0..2000)
            .map(|_| {
                sampler.step_phi(&mut rng).unwrap();
                sampler.state.phi
            })
            .collect();
        assert!(draws.iter().all(|v| v.abs() < 1.0));
        let d = crate::diagnostics::ks_against_cdf(&draws, |x| (x + 1.0) / 2.0);
        assert!(d < 0.04, "uniform fallback KS {d}");
    }

    #[test]
    fn degenerate_all_zero_responses_run_clean() {
        let mut data = simulate(18, 40, 3, 3, &[0.0, 0.0], 0.0, 0.0, 1.0);
        for r in &mut data.records {
            r.y = 0.0;
        }
        let cfg = GtulmConfig {
            n_iter: 200,
            n_burn: 50,
            ..GtulmConfig::default()
        };
        let mut rng = RngStream::new(5155, 0);
        let draws = run_gtulm(&data, &cfg, &mut rng).unwrap();
        assert_eq!(draws.n_draws(), 150);
        for row in &draws.rows {
            assert!(row.iter().all(|v| v.is_finite()));
        }
        let b0: f64 =
            draws.rows.iter().map(|r| r[0]).sum::<f64>() / draws.n_draws() as f64;
        assert!(b0.abs() < 0.2, "intercept {b0} should shrink to zero");
    }

    #[test]
    fn recovery_smoke() {
        let data = simulate(19, 900, 5, 4, &[0.5, 1.0], 0.6, 0.8, 1.0);
        let cfg = GtulmConfig {
            n_iter: 700,
            n_burn: 200,
            rho_halfwidth: 0.1,
            ..GtulmConfig::default()
        };
        let mut rng = RngStream::new(5156, 0);
        let draws = run_gtulm(&data, &cfg, &mut rng).unwrap();
        let mean = |name: &str| {
            let c = draws.scalar_chain(name).unwrap();
            c.iter().sum::<f64>() / c.len() as f64
        };
        let beta1: f64 =
            draws.rows.iter().map(|r| r[1]).sum::<f64>() / draws.n_draws() as f64;
        assert!((beta1 - 1.0).abs() < 0.15, "beta1 {beta1}");
        assert!((mean("rho") - 0.6).abs() < 0.25, "rho {}", mean("rho"));
        assert!((mean("sigma2") - 1.0).abs() < 0.25, "sigma2 {}", mean("sigma2"));
        assert!(draws.meta.rho_accept_rate.unwrap() > 0.1);
    }

    #[test]
    fn run_requires_scaled_weights_and_gaussian_mode() {
        let mut data = simulate(20, 20, 2, 2, &[0.0, 0.0], 0.0, 0.0, 1.0);
        data.scaled = false;
        for r in &mut data.records {
            r.scaled_weight = None;
        }
        let mut rng = RngStream::new(5157, 0);
        assert!(run_gtulm(&data, &GtulmConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = GtulmConfig::default();
        cfg.n_burn = cfg.n_iter;
        assert!(cfg.validate().is_err());
        let cfg = GtulmConfig {
            thin: 0,
            ..GtulmConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = GtulmConfig {
            a: -1.0,
            ..GtulmConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
