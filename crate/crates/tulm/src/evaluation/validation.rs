//! Runtime self-checks of the sampler kernels: single-site draws are
//! compared against quadrature of the independently written log joint,
//! and the augmentation identity is checked by Monte Carlo. These mirror
//! the heavier test-suite checks at a size suitable for a command-line
//! smoke run.

use crate::btulm::{
    btulm_full_conditional_logdensity, pg_loglik_identity_check, BtulmConfig, BtulmParam,
    BtulmSampler,
};
use crate::data::{Mode, PanelDataset};
use crate::diagnostics::GridDensity;
use crate::error::Result;
use crate::evaluation::population::{build_population, informative_sample, GeneratorSpec};
use crate::gtulm::{gtulm_full_conditional_logdensity, GtulmConfig, GtulmParam, GtulmSampler};
use crate::rng::polya_gamma::{polya_gamma_mean, PolyaGamma};
use crate::rng::RngStream;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct KernelCheck {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn check(name: &str, statistic: f64, threshold: f64) -> KernelCheck {
    KernelCheck {
        name: name.into(),
        statistic,
        threshold,
        pass: statistic < threshold,
    }
}

fn small_panel(mode: Mode, seed: u64) -> Result<PanelDataset> {
    let mut spec = match mode {
        Mode::Gaussian => GeneratorSpec::default_gaussian(),
        Mode::Binary => GeneratorSpec::default_binary(),
    };
    spec.n_units = 400;
    spec.n_areas = 2;
    spec.n_weeks = 2;
    let pop = build_population(&spec, &mut RngStream::new(seed, 1))?;
    informative_sample(&pop, 0.2, &mut RngStream::new(seed, 2))
}

fn grid_ks_for(
    draws: &[f64],
    lo: f64,
    hi: f64,
    log_density: impl Fn(f64) -> f64,
) -> Result<f64> {
    let grid = GridDensity::new(lo, hi, 2001, log_density)?;
    Ok(grid.ks_distance(draws))
}

fn gaussian_checks(seed: u64, out: &mut Vec<KernelCheck>) -> Result<()> {
    let data = small_panel(Mode::Gaussian, seed)?;
    let cfg = GtulmConfig::default();
    let mut sampler = GtulmSampler::new(&data, cfg.clone())?;
    sampler.state.beta[0] = 5.8;
    for (t, eta_t) in sampler.state.eta.iter_mut().enumerate() {
        for j in 0..eta_t.len() {
            eta_t[j] = 0.3 * (t as f64 + 1.0) * if j % 2 == 0 { 1.0 } else { -0.6 };
        }
    }
    sampler.state.rho = 0.2;
    sampler.state.phi = 0.4;
    sampler.state.sigma2 = 0.8;
    sampler.state.sigma2_eta1 = 0.5;
    sampler.state.sigma2_eta = 0.3;
    let frozen = sampler.state.clone();

    // sigma2: the conditional ignores the current value, so repeated
    // steps draw independent samples
    let mut rng = RngStream::new(seed, 3);
    let mut draws = Vec::with_capacity(4000);
    for _ in 0..4000 {
        sampler.step_sigma2(&mut rng)?;
        draws.push(sampler.state.sigma2);
    }
    let (lo, hi) = draw_range(&draws);
    let ks = grid_ks_for(&draws, lo, hi, |v| {
        gtulm_full_conditional_logdensity(GtulmParam::Sigma2, v, &frozen, &data, &cfg)
            .unwrap_or(f64::NEG_INFINITY)
    })?;
    out.push(check("gaussian sigma2 conditional", ks, 0.04));
    sampler.state = frozen.clone();

    // phi: truncated-normal draw against the quadrature of the joint
    let mut draws = Vec::with_capacity(4000);
    for _ in 0..4000 {
        sampler.step_phi(&mut rng)?;
        draws.push(sampler.state.phi);
    }
    let ks = grid_ks_for(&draws, -1.0 + 1e-9, 1.0 - 1e-9, |v| {
        gtulm_full_conditional_logdensity(GtulmParam::Phi, v, &frozen, &data, &cfg)
            .unwrap_or(f64::NEG_INFINITY)
    })?;
    out.push(check("gaussian phi conditional", ks, 0.04));
    sampler.state = frozen.clone();

    // rho: random-walk chain, thinned
    let mut draws = Vec::with_capacity(2000);
    for i in 0..20_000 {
        sampler.step_rho(&mut rng);
        if i % 10 == 9 {
            draws.push(sampler.state.rho);
        }
    }
    let ks = grid_ks_for(&draws, -1.0 + 1e-9, 1.0 - 1e-9, |v| {
        gtulm_full_conditional_logdensity(GtulmParam::Rho, v, &frozen, &data, &cfg)
            .unwrap_or(f64::NEG_INFINITY)
    })?;
    out.push(check("gaussian rho metropolis", ks, 0.06));
    Ok(())
}

fn binary_checks(seed: u64, out: &mut Vec<KernelCheck>) -> Result<()> {
    let data = small_panel(Mode::Binary, seed)?;
    let cfg = BtulmConfig::default();
    let mut sampler = BtulmSampler::new(&data, cfg.clone())?;
    sampler.state.beta[0] = -0.5;
    for (t, eta_t) in sampler.state.eta.iter_mut().enumerate() {
        for j in 0..eta_t.len() {
            eta_t[j] = 0.25 * (t as f64 + 1.0) * if j % 2 == 0 { 1.0 } else { -0.8 };
        }
    }
    sampler.state.phi = 0.3;
    sampler.state.sigma2_eta1 = 0.4;
    sampler.state.sigma2_eta = 0.2;
    let frozen = sampler.state.clone();

    let mut rng = RngStream::new(seed, 4);
    let mut draws = Vec::with_capacity(4000);
    for _ in 0..4000 {
        sampler.step_phi(&mut rng)?;
        draws.push(sampler.state.phi);
    }
    let ks = grid_ks_for(&draws, -1.0 + 1e-9, 1.0 - 1e-9, |v| {
        btulm_full_conditional_logdensity(BtulmParam::Phi, v, &frozen, &data, &cfg)
            .unwrap_or(f64::NEG_INFINITY)
    })?;
    out.push(check("binomial phi conditional", ks, 0.04));

    // augmentation identity at a nontrivial weight and linear predictor
    let (lhs, rhs) =
        pg_loglik_identity_check(1.0, 1, 1.7, 0.9, 40_000, &mut RngStream::new(seed, 5))?;
    out.push(check("augmentation identity", (lhs - rhs).abs(), 0.02));

    // augmentation mean against the analytic mean
    let pg = PolyaGamma::new(2.5)?;
    let mut rng = RngStream::new(seed, 6);
    let n = 20_000;
    let mean = (0..n).map(|_| pg.draw(1.3, &mut rng)).sum::<f64>() / n as f64;
    let expect = polya_gamma_mean(2.5, 1.3);
    out.push(check(
        "augmentation mean",
        (mean - expect).abs() / expect,
        0.03,
    ));
    Ok(())
}

fn draw_range(draws: &[f64]) -> (f64, f64) {
    let lo = draws.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.25 * (hi - lo);
    ((lo - pad).max(1e-8), hi + pad)
}

/// Runs the kernel check battery and returns one row per check.
pub fn kernel_report(seed: u64) -> Result<Vec<KernelCheck>> {
    let mut out = Vec::new();
    gaussian_checks(seed, &mut out)?;
    binary_checks(seed, &mut out)?;
    Ok(out)
}
