//! Truncated normal and inverse gamma draws.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand_distr::{Distribution, Gamma};
use statrs::distribution::{ContinuousCDF, Normal};

/// Draw from N(mean, var) restricted to (lo, hi).
///
/// Strategy depends on where the interval sits relative to the mode:
/// - interval containing the mode: inverse-CDF on the uniform between
///   Phi(lo) and Phi(hi), accurate because the mass is central;
/// - interval entirely in one tail: rejection sampling (uniform proposal for
///   short intervals, translated-exponential proposal otherwise), which
///   stays exact where the inverse CDF loses precision.
pub fn draw_truncated_normal(
    mean: f64,
    var: f64,
    lo: f64,
    hi: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Numerical(format!(
            "truncated normal variance must be positive and finite, got {var}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::Numerical(format!(
            "degenerate truncation interval [{lo}, {hi})"
        )));
    }
    let sd = var.sqrt();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = if a <= 0.0 && b >= 0.0 {
        draw_central(a, b, rng)
    } else if a > 0.0 {
        draw_tail(a, b, rng)
    } else {
        -draw_tail(-b, -a, rng)
    };
    Ok(mean + sd * z)
}

/// Interval straddles the mode: inverse CDF.
fn draw_central(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let fa = n.cdf(a);
    let fb = n.cdf(b);
    let u = rng.uniform_range(fa, fb);
    n.inverse_cdf(u).clamp(a, b)
}

/// Interval entirely above the mode (0 < a < b, b possibly infinite).
fn draw_tail(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a <= 2.0 / (a + (a * a + 4.0).sqrt()) {
        // Short interval: uniform proposal, bounded by the density at a.
        loop {
            let x = rng.uniform_range(a, b);
            if rng.uniform() <= ((a * a - x * x) / 2.0).exp() {
                return x;
            }
        }
    } else {
        // Translated exponential proposal with the optimal rate.
        loop {
            let x = a + rng.exponential() / lambda;
            if x >= b {
                continue;
            }
            if rng.uniform() <= (-(x - lambda) * (x - lambda) / 2.0).exp() {
                return x;
            }
        }
    }
}

/// Draw from the inverse gamma with density proportional to
/// x^(−shape−1)·exp(−rate/x); mean rate/(shape−1) for shape > 1.
///
/// The shape–rate convention matters: the conditional updates in the
/// samplers accumulate half quadratic forms onto the rate.
pub fn draw_inverse_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::Numerical(format!(
            "inverse gamma requires positive finite parameters, got shape {shape}, rate {rate}"
        )));
    }
    let g = Gamma::new(shape, 1.0)
        .map_err(|e| Error::Numerical(format!("gamma construction: {e}")))?;
    loop {
        let x: f64 = g.sample(rng);
        if x > 0.0 && x.is_finite() {
            return Ok(rate / x);
        }
    }
}
