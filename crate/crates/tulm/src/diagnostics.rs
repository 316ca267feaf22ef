//! Statistical diagnostics shared by the validation suites and the kernel
//! self-check command: Kolmogorov-Smirnov distances, rank-uniformity tests,
//! grid-normalized densities, and Monte Carlo standard errors.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// One-sample KS statistic of `samples` against a CDF.
pub fn ks_against_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// An unnormalized log density tabulated on a uniform grid, normalized by
/// trapezoidal quadrature. Serves as the reference distribution when
/// validating a sampler against the analytic full conditional.
pub struct GridDensity {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl GridDensity {
    /// Tabulates `log_density` on `n` points over [lo, hi] and normalizes.
    pub fn new(lo: f64, hi: f64, n: usize, log_density: impl Fn(f64) -> f64) -> Result<Self> {
        if !(hi > lo) || n < 16 {
            return Err(Error::Numerical(format!(
                "bad density grid [{lo}, {hi}] with {n} points"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let logs: Vec<f64> = (0..n).map(|i| log_density(lo + step * i as f64)).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(
                "log density not finite anywhere on the grid".into(),
            ));
        }
        let dens: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * step;
        }
        let total = cdf[n - 1];
        if !(total > 0.0) {
            return Err(Error::Numerical("density integrates to zero".into()));
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(GridDensity { lo, step, cdf })
    }

    /// CDF value at x, linearly interpolated between grid nodes.
    pub fn cdf(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let last = (self.cdf.len() - 1) as f64;
        if pos >= last {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i])
    }

    /// KS distance between samples and this density.
    pub fn ks_distance(&self, samples: &[f64]) -> f64 {
        ks_against_cdf(samples, |x| self.cdf(x))
    }
}

/// Chi-square goodness-of-fit p-value for observed bin counts against equal
/// expected frequencies. Used for rank-uniformity checks.
pub fn chi_square_uniform_pvalue(counts: &[usize]) -> Result<f64> {
    let k = counts.len();
    if k < 2 {
        return Err(Error::Numerical("need at least 2 bins".into()));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Numerical("empty counts".into()));
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let chi = ChiSquared::new((k - 1) as f64)
        .map_err(|e| Error::Numerical(format!("chi-square df: {e}")))?;
    Ok(1.0 - chi.cdf(stat))
}

/// Monte Carlo standard error of the mean of a (possibly autocorrelated)
/// chain, by the batch-means estimator with ~sqrt(n) batches.
pub fn batch_means_se(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let n_batches = (n as f64).sqrt().floor() as usize;
    let batch_len = n / n_batches;
    let used = n_batches * batch_len;
    let grand = chain[..used].iter().sum::<f64>() / used as f64;
    let mut var_acc = 0.0;
    for b in 0..n_batches {
        let s: f64 = chain[b * batch_len..(b + 1) * batch_len].iter().sum();
        let bm = s / batch_len as f64;
        var_acc += (bm - grand).powi(2);
    }
    let var_of_batch_means = var_acc / (n_batches - 1) as f64;
    (var_of_batch_means / n_batches as f64).sqrt()
}
