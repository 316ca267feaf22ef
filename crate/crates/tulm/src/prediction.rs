//! Posterior-predictive domain estimates by poststratification.
//!
//! Each retained posterior draw generates one synthetic finite population
//! over the covariate cells, and the domain mean of that population is one
//! draw from the posterior predictive distribution of the domain estimand.
//! Gaussian cells aggregate in closed form (a cell total is normal);
//! binary cells walk each cohort week by week so that a unit's simulated
//! previous response feeds the next week's success probability.

use crate::data::{Mode, PopulationCells};
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::parallel::par_map_indexed;
use crate::rng::RngStream;
use rand::Rng as _;
use rand_distr::{Binomial, Hypergeometric};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSummary {
    pub point: f64,
    pub sd: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_draws: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainEstimate {
    pub area: usize,
    pub week: usize,
    pub summary: DomainSummary,
}

/// Posterior predictive draws of domain means: `values[draw][k]` belongs
/// to `domains[k]`.
#[derive(Clone, Debug)]
pub struct DomainDraws {
    pub domains: Vec<(usize, usize)>,
    pub values: Vec<Vec<f64>>,
}

/// Empirical quantile with linear interpolation at rank (n - 1) p.
/// `sorted` must be ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

/// Mean, sd, and equal-tailed (1 - alpha) interval of a set of draws.
pub fn summarize_draws(values: &[f64], alpha: f64) -> Result<DomainSummary> {
    if values.is_empty() {
        return Err(Error::Data("cannot summarize zero draws".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite draw"));
    Ok(DomainSummary {
        point: mean,
        sd,
        ci_lower: quantile(&sorted, alpha / 2.0),
        ci_upper: quantile(&sorted, 1.0 - alpha / 2.0),
        n_draws: n,
    })
}

fn check_cells(draws: &PosteriorDraws, cells: &PopulationCells, mode: Mode) -> Result<()> {
    if draws.meta.mode != mode {
        return Err(Error::Config(format!(
            "posterior draws are {:?}-mode, expected {:?}",
            draws.meta.mode, mode
        )));
    }
    let base = draws.base_covariate_names();
    if cells.covariate_names != base {
        return Err(Error::Config(format!(
            "cell covariates {:?} do not match fitted covariates {:?}",
            cells.covariate_names, base
        )));
    }
    Ok(())
}

struct CellRef {
    area: usize,
    week: usize,
    week_pos: usize,
    count: u64,
    x: Vec<f64>,
    cohort: Option<(usize, usize)>,
}

fn filter_cells(draws: &PosteriorDraws, cells: &PopulationCells) -> Result<Vec<CellRef>> {
    let refs: Vec<CellRef> = cells
        .rows
        .iter()
        .filter(|r| r.count > 0)
        .filter_map(|r| {
            draws.week_pos(r.week).map(|k| CellRef {
                area: r.area,
                week: r.week,
                week_pos: k,
                count: r.count,
                x: r.x.clone(),
                cohort: r.cohort,
            })
        })
        .collect();
    if refs.is_empty() {
        return Err(Error::Config(
            "population cells cover none of the fitted weeks".into(),
        ));
    }
    for r in &refs {
        if r.area >= draws.meta.layout.n_areas {
            return Err(Error::Config(format!(
                "cell area {} outside the fitted {} areas",
                r.area + 1,
                draws.meta.layout.n_areas
            )));
        }
    }
    Ok(refs)
}

fn domain_index(refs: &[CellRef]) -> (Vec<(usize, usize)>, Vec<usize>, Vec<f64>) {
    let mut domains: Vec<(usize, usize)> = refs.iter().map(|r| (r.area, r.week)).collect();
    domains.sort_unstable();
    domains.dedup();
    let pos = |a: usize, w: usize| domains.binary_search(&(a, w)).expect("domain indexed");
    let idx: Vec<usize> = refs.iter().map(|r| pos(r.area, r.week)).collect();
    let mut denom = vec![0.0f64; domains.len()];
    for (r, &di) in refs.iter().zip(&idx) {
        denom[di] += r.count as f64;
    }
    (domains, idx, denom)
}

/// One posterior predictive domain-mean draw per retained posterior draw,
/// for a Gaussian fit. Cell totals are drawn as N(count * mu,
/// count * sigma2) with mu = x'beta + eta. Draw d uses substream d, so the
/// result does not depend on thread count.
pub fn predict_gaussian_domain_draws(
    draws: &PosteriorDraws,
    cells: &PopulationCells,
    stream: &RngStream,
) -> Result<DomainDraws> {
    check_cells(draws, cells, Mode::Gaussian)?;
    let refs = filter_cells(draws, cells)?;
    let (domains, idx, denom) = domain_index(&refs);
    let sigma2 = draws.scalar_chain("sigma2")?;
    let values = par_map_indexed(draws.n_draws(), |d| {
        let mut rng = stream.substream(d as u64);
        let beta = draws.beta(d);
        let s2 = sigma2[d].max(0.0);
        let mut sums = vec![0.0f64; domains.len()];
        for (r, &di) in refs.iter().zip(&idx) {
            let mu: f64 = r.x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
                + draws.eta(d, r.week_pos)[r.area];
            let c = r.count as f64;
            sums[di] += c * mu + (c * s2).sqrt() * rng.standard_normal();
        }
        sums.iter().zip(&denom).map(|(s, c)| s / c).collect::<Vec<f64>>()
    });
    Ok(DomainDraws { domains, values })
}

fn inverse_logit(lambda: f64) -> f64 {
    if lambda >= 0.0 {
        1.0 / (1.0 + (-lambda).exp())
    } else {
        let e = lambda.exp();
        e / (1.0 + e)
    }
}

fn draw_binomial(n: u64, p: f64, rng: &mut RngStream) -> Result<u64> {
    if n == 0 {
        return Ok(0);
    }
    let d = Binomial::new(n, p.clamp(0.0, 1.0))
        .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?;
    Ok(rng.sample(d))
}

/// Cohort chain: cells sharing area, covariates, and cohort tag, walked in
/// week order so each week's simulated outcomes set the next week's
/// previous-response mix.
struct Chain {
    area: usize,
    x: Vec<f64>,
    steps: Vec<(usize, usize, u64, usize)>, // (week, week_pos, count, domain index)
}

fn build_chains(refs: &[CellRef], idx: &[usize]) -> Vec<Chain> {
    let mut keyed: std::collections::BTreeMap<(usize, Option<(usize, usize)>, Vec<u64>), Chain> =
        std::collections::BTreeMap::new();
    for (n, (r, &di)) in refs.iter().zip(idx).enumerate() {
        let bits: Vec<u64> = r.x.iter().map(|v| v.to_bits()).collect();
        // untagged cells never chain; give each a unique key
        let key = match r.cohort {
            Some(c) => (r.area, Some(c), bits),
            None => (r.area, Some((usize::MAX, n)), bits),
        };
        keyed
            .entry(key)
            .or_insert_with(|| Chain {
                area: r.area,
                x: r.x.clone(),
                steps: Vec::new(),
            })
            .steps
            .push((r.week, r.week_pos, r.count, di));
    }
    let mut chains: Vec<Chain> = keyed.into_values().collect();
    for c in &mut chains {
        c.steps.sort_unstable();
    }
    chains
}

/// One posterior predictive domain-proportion draw per retained posterior
/// draw, for a binomial fit. Unit counts per cohort cell are simulated as
/// binomial splits; carried units keep their simulated previous response,
/// count growth adds fresh units, count shrinkage subsamples carried units
/// hypergeometrically, and a week gap resets the cohort.
pub fn predict_binary_domain_draws(
    draws: &PosteriorDraws,
    cells: &PopulationCells,
    stream: &RngStream,
) -> Result<DomainDraws> {
    check_cells(draws, cells, Mode::Binary)?;
    let refs = filter_cells(draws, cells)?;
    let (domains, idx, denom) = domain_index(&refs);
    let chains = build_chains(&refs, &idx);
    let prev_cols = draws.meta.prev_cols;
    let base_idx: Vec<usize> = (0..draws.meta.layout.p)
        .filter(|&j| match prev_cols {
            Some((a, b)) => j != a && j != b,
            None => true,
        })
        .collect();
    let values: Vec<Result<Vec<f64>>> = par_map_indexed(draws.n_draws(), |d| {
        let mut rng = stream.substream(d as u64);
        let beta = draws.beta(d);
        let (b_no, b_yes) = match prev_cols {
            Some((a, b)) => (beta[a], beta[b]),
            None => (0.0, 0.0),
        };
        let mut yes = vec![0.0f64; domains.len()];
        for chain in &chains {
            let xb: f64 = chain
                .x
                .iter()
                .zip(&base_idx)
                .map(|(v, &j)| v * beta[j])
                .sum();
            let mut carry_yes = 0u64;
            let mut carry_no = 0u64;
            let mut prev_week: Option<usize> = None;
            for &(week, k, count, di) in &chain.steps {
                if prev_week != Some(week.wrapping_sub(1)) {
                    carry_yes = 0;
                    carry_no = 0;
                }
                let eta = draws.eta(d, k)[chain.area];
                let p_not = inverse_logit(xb + eta);
                let p_yes = inverse_logit(xb + b_yes + eta);
                let p_no = inverse_logit(xb + b_no + eta);
                let carried = carry_yes + carry_no;
                let (kept_yes, kept_no, fresh) = if count >= carried {
                    (carry_yes, carry_no, count - carried)
                } else {
                    let h = Hypergeometric::new(carried, carry_yes, count)
                        .map_err(|e| Error::Numerical(format!("hypergeometric draw: {e}")))?;
                    let ky: u64 = rng.sample(h);
                    (ky, count - ky, 0)
                };
                let s = draw_binomial(kept_yes, p_yes, &mut rng)?
                    + draw_binomial(kept_no, p_no, &mut rng)?
                    + draw_binomial(fresh, p_not, &mut rng)?;
                yes[di] += s as f64;
                carry_yes = s;
                carry_no = count - s;
                prev_week = Some(week);
            }
        }
        Ok(yes.iter().zip(&denom).map(|(s, c)| s / c).collect())
    });
    let values = values.into_iter().collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(DomainDraws { domains, values })
}

fn summarize_domain_draws(dd: &DomainDraws, alpha: f64) -> Result<Vec<DomainEstimate>> {
    let n_dom = dd.domains.len();
    let mut out = Vec::with_capacity(n_dom);
    for (k, &(area, week)) in dd.domains.iter().enumerate() {
        let col: Vec<f64> = dd.values.iter().map(|row| row[k]).collect();
        out.push(DomainEstimate {
            area,
            week,
            summary: summarize_draws(&col, alpha)?,
        });
    }
    Ok(out)
}

pub fn predict_gaussian_domains(
    draws: &PosteriorDraws,
    cells: &PopulationCells,
    alpha: f64,
    stream: &RngStream,
) -> Result<Vec<DomainEstimate>> {
    let dd = predict_gaussian_domain_draws(draws, cells, stream)?;
    summarize_domain_draws(&dd, alpha)
}

pub fn predict_binary_domains(
    draws: &PosteriorDraws,
    cells: &PopulationCells,
    alpha: f64,
    stream: &RngStream,
) -> Result<Vec<DomainEstimate>> {
    let dd = predict_binary_domain_draws(draws, cells, stream)?;
    summarize_domain_draws(&dd, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CellRow;
    use crate::draws::{DrawsMeta, ParamLayout};
    use approx::assert_relative_eq;

    fn gaussian_draws(
        p: usize,
        n_areas: usize,
        weeks: Vec<usize>,
        names: Vec<&str>,
        rows: Vec<Vec<f64>>,
    ) -> PosteriorDraws {
        let meta = DrawsMeta {
            mode: Mode::Gaussian,
            layout: ParamLayout {
                p,
                n_areas,
                weeks,
                scalars: vec!["sigma2".into()],
            },
            covariate_names: names.into_iter().map(String::from).collect(),
            prev_cols: None,
            n_burn: 0,
            thin: 1,
            rho_accept_rate: None,
        };
        let mut d = PosteriorDraws::new(meta);
        for r in rows {
            d.push(r).unwrap();
        }
        d
    }

    fn binary_draws(
        p: usize,
        n_areas: usize,
        weeks: Vec<usize>,
        names: Vec<&str>,
        prev_cols: Option<(usize, usize)>,
        rows: Vec<Vec<f64>>,
    ) -> PosteriorDraws {
        let meta = DrawsMeta {
            mode: Mode::Binary,
            layout: ParamLayout {
                p,
                n_areas,
                weeks,
                scalars: vec![],
            },
            covariate_names: names.into_iter().map(String::from).collect(),
            prev_cols,
            n_burn: 0,
            thin: 1,
            rho_accept_rate: None,
        };
        let mut d = PosteriorDraws::new(meta);
        for r in rows {
            d.push(r).unwrap();
        }
        d
    }

    fn cell(area: usize, week: usize, count: u64, x: Vec<f64>) -> CellRow {
        CellRow {
            area,
            week,
            count,
            cohort: None,
            x,
        }
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_relative_eq!(quantile(&v, 0.5), 3.0);
        assert_relative_eq!(quantile(&v, 0.1), 1.4);
        assert_relative_eq!(quantile(&v, 0.9), 4.6);
        assert_relative_eq!(quantile(&v, 0.0), 1.0);
        assert_relative_eq!(quantile(&v, 1.0), 5.0);
    }

    #[test]
    fn summary_of_known_draws() {
        let s = summarize_draws(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.2).unwrap();
        assert_relative_eq!(s.point, 3.0);
        assert_relative_eq!(s.ci_lower, 1.4);
        assert_relative_eq!(s.ci_upper, 4.6);
        assert_eq!(s.n_draws, 5);
        let c = summarize_draws(&[2.5, 2.5, 2.5], 0.05).unwrap();
        assert_relative_eq!(c.point, 2.5);
        assert_eq!(c.sd, 0.0);
        assert_relative_eq!(c.ci_lower, 2.5);
        assert!(summarize_draws(&[], 0.05).is_err());
    }

    #[test]
    fn gaussian_zero_variance_is_exact_cell_average() {
        // one week, one area, two cells: mu = 0 and mu = 1 with counts
        // 100 and 300; the domain mean must be exactly 0.75
        let draws = gaussian_draws(
            1,
            1,
            vec![0],
            vec!["slope"],
            vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
        );
        let cells = PopulationCells {
            covariate_names: vec!["slope".into()],
            n_areas: 1,
            n_weeks: 1,
            rows: vec![cell(0, 0, 100, vec![0.0]), cell(0, 0, 300, vec![1.0])],
        };
        let dd =
            predict_gaussian_domain_draws(&draws, &cells, &RngStream::new(5, 0)).unwrap();
        assert_eq!(dd.domains, vec![(0, 0)]);
        for row in &dd.values {
            assert_relative_eq!(row[0], 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_moments_match_finite_population_noise() {
        // identical posterior rows, so all variation is predictive:
        // value ~ N(mu_bar, sum(c) * sigma2 / (sum c)^2)
        let n_draws = 20_000;
        let rows = vec![vec![2.0, 0.5, 4.0]; n_draws];
        let draws = gaussian_draws(1, 1, vec![0], vec!["intercept"], rows);
        let cells = PopulationCells {
            covariate_names: vec!["intercept".into()],
            n_areas: 1,
            n_weeks: 1,
            rows: vec![cell(0, 0, 60, vec![1.0]), cell(0, 0, 40, vec![1.0])],
        };
        let dd =
            predict_gaussian_domain_draws(&draws, &cells, &RngStream::new(6, 0)).unwrap();
        let vals: Vec<f64> = dd.values.iter().map(|r| r[0]).collect();
        let mean = vals.iter().sum::<f64>() / n_draws as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_draws as f64;
        let expect_var = 100.0 * 4.0 / (100.0 * 100.0);
        assert!((mean - 2.5).abs() < 4.0 * (expect_var / n_draws as f64).sqrt() + 1e-3);
        assert!((var - expect_var).abs() < 0.1 * expect_var, "var {var} vs {expect_var}");
    }

    #[test]
    fn gaussian_rejects_mismatched_covariates_and_weeks() {
        let draws = gaussian_draws(1, 1, vec![0], vec!["intercept"], vec![vec![0.0, 0.0, 1.0]]);
        let bad_names = PopulationCells {
            covariate_names: vec!["slope".into()],
            n_areas: 1,
            n_weeks: 1,
            rows: vec![cell(0, 0, 10, vec![1.0])],
        };
        assert!(
            predict_gaussian_domain_draws(&draws, &bad_names, &RngStream::new(7, 0)).is_err()
        );
        let bad_week = PopulationCells {
            covariate_names: vec!["intercept".into()],
            n_areas: 1,
            n_weeks: 3,
            rows: vec![cell(0, 2, 10, vec![1.0])],
        };
        assert!(
            predict_gaussian_domain_draws(&draws, &bad_week, &RngStream::new(7, 0)).is_err()
        );
    }

    #[test]
    fn binary_single_cell_moments() {
        // constant posterior, lambda = 0 so p = 1/2, one cell of 100 units
        let n_draws = 20_000;
        let rows = vec![vec![0.0, 0.0]; n_draws];
        let draws = binary_draws(1, 1, vec![0], vec!["intercept"], None, rows);
        let cells = PopulationCells {
            covariate_names: vec!["intercept".into()],
            n_areas: 1,
            n_weeks: 1,
            rows: vec![cell(0, 0, 100, vec![1.0])],
        };
        let dd = predict_binary_domain_draws(&draws, &cells, &RngStream::new(8, 0)).unwrap();
        let vals: Vec<f64> = dd.values.iter().map(|r| r[0]).collect();
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        let mean = vals.iter().sum::<f64>() / n_draws as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_draws as f64;
        assert!((mean - 0.5).abs() < 4.0 * (0.0025f64 / n_draws as f64).sqrt() + 1e-3);
        assert!((var - 0.0025).abs() < 0.1 * 0.0025, "var {var}");
    }

    fn cohort_cell(
        area: usize,
        week: usize,
        count: u64,
        cohort: (usize, usize),
        x: Vec<f64>,
    ) -> CellRow {
        CellRow {
            area,
            week,
            count,
            cohort: Some(cohort),
            x,
        }
    }

    // two-week cohort with strong previous-response effects; exact
    // marginals: E[week 1] = p0, E[week 2] = p0 p_yes + (1 - p0) p_no
    fn carry_setup(counts: (u64, u64)) -> (PosteriorDraws, PopulationCells) {
        let n_draws = 30_000;
        // beta = [intercept, prev_no, prev_yes] = [-0.4, -0.8, 1.6]
        let rows = vec![vec![-0.4, -0.8, 1.6, 0.0, 0.0]; n_draws];
        let draws = binary_draws(
            3,
            1,
            vec![0, 1],
            vec!["intercept", "prev_no", "prev_yes"],
            Some((1, 2)),
            rows,
        );
        let cells = PopulationCells {
            covariate_names: vec!["intercept".into()],
            n_areas: 1,
            n_weeks: 2,
            rows: vec![
                cohort_cell(0, 0, counts.0, (0, 2), vec![1.0]),
                cohort_cell(0, 1, counts.1, (0, 2), vec![1.0]),
            ],
        };
        (draws, cells)
    }

    fn carry_expectations() -> (f64, f64) {
        let p0 = inverse_logit(-0.4);
        let p_yes = inverse_logit(-0.4 + 1.6);
        let p_no = inverse_logit(-0.4 - 0.8);
        (p0, p0 * p_yes + (1.0 - p0) * p_no)
    }

    #[test]
    fn binary_cohort_carries_previous_responses() {
        let (draws, cells) = carry_setup((40, 40));
        let dd = predict_binary_domain_draws(&draws, &cells, &RngStream::new(9, 0)).unwrap();
        assert_eq!(dd.domains, vec![(0, 0), (0, 1)]);
        let (e0, e1) = carry_expectations();
        let m0 = dd.values.iter().map(|r| r[0]).sum::<f64>() / dd.values.len() as f64;
        let m1 = dd.values.iter().map(|r| r[1]).sum::<f64>() / dd.values.len() as f64;
        assert!((m0 - e0).abs() < 0.01, "week 1 mean {m0} vs {e0}");
        assert!((m1 - e1).abs() < 0.01, "week 2 mean {m1} vs {e1}");
        // carrying responses forward makes consecutive weeks positively
        // correlated; redrawing from scratch would make them independent
        let cov = dd
            .values
            .iter()
            .map(|r| (r[0] - m0) * (r[1] - m1))
            .sum::<f64>()
            / dd.values.len() as f64;
        let s0 = dd.values.iter().map(|r| (r[0] - m0) * (r[0] - m0)).sum::<f64>()
            / dd.values.len() as f64;
        let s1 = dd.values.iter().map(|r| (r[1] - m1) * (r[1] - m1)).sum::<f64>()
            / dd.values.len() as f64;
        let corr = cov / (s0 * s1).sqrt();
        assert!(corr > 0.1, "carry correlation {corr}");
    }

    #[test]
    fn binary_cohort_shrinkage_keeps_marginal_mean() {
        // week 2 keeps 4 of 10 units; hypergeometric subsampling leaves
        // the marginal week-2 mean unchanged
        let (draws, cells) = carry_setup((10, 4));
        let dd = predict_binary_domain_draws(&draws, &cells, &RngStream::new(10, 0)).unwrap();
        let (_, e1) = carry_expectations();
        let m1 = dd.values.iter().map(|r| r[1]).sum::<f64>() / dd.values.len() as f64;
        assert!((m1 - e1).abs() < 0.015, "week 2 mean {m1} vs {e1}");
    }

    #[test]
    fn binary_cohort_growth_mixes_in_fresh_units() {
        // week 2 has 4 carried + 6 fresh units
        let (draws, cells) = carry_setup((4, 10));
        let dd = predict_binary_domain_draws(&draws, &cells, &RngStream::new(11, 0)).unwrap();
        let (e0, e_carried) = carry_expectations();
        let expect = (4.0 * e_carried + 6.0 * e0) / 10.0;
        let m1 = dd.values.iter().map(|r| r[1]).sum::<f64>() / dd.values.len() as f64;
        assert!((m1 - expect).abs() < 0.015, "week 2 mean {m1} vs {expect}");
    }

    #[test]
    fn binary_week_gap_resets_cohort() {
        // cohort rows at weeks 1 and 3: the gap resets the carry, so the
        // later week's mean matches a fresh draw, not a carried one
        let n_draws = 30_000;
        let rows = vec![vec![-0.4, -0.8, 1.6, 0.0, 0.0, 0.0]; n_draws];
        let draws = binary_draws(
            3,
            1,
            vec![0, 1, 2],
            vec!["intercept", "prev_no", "prev_yes"],
            Some((1, 2)),
            rows,
        );
        let cells = PopulationCells {
            covariate_names: vec!["intercept".into()],
            n_areas: 1,
            n_weeks: 3,
            rows: vec![
                cohort_cell(0, 0, 50, (0, 1), vec![1.0]),
                cohort_cell(0, 2, 50, (0, 1), vec![1.0]),
            ],
        };
        let dd = predict_binary_domain_draws(&draws, &cells, &RngStream::new(12, 0)).unwrap();
        let e0 = inverse_logit(-0.4);
        let m1 = dd.values.iter().map(|r| r[1]).sum::<f64>() / n_draws as f64;
        assert!((m1 - e0).abs() < 0.01, "gap week mean {m1} vs fresh {e0}");
    }

    #[test]
    fn binary_without_prev_columns_treats_all_units_alike() {
        // no prev columns (cross-sectional fit): cohort tags are inert
        let n_draws = 20_000;
        let rows = vec![vec![0.3, 0.0, 0.0]; n_draws];
        let draws = binary_draws(1, 1, vec![0, 1], vec!["intercept"], None, rows);
        let cells = PopulationCells {
            covariate_names: vec!["intercept".into()],
            n_areas: 1,
            n_weeks: 2,
            rows: vec![
                cohort_cell(0, 0, 30, (0, 2), vec![1.0]),
                cohort_cell(0, 1, 30, (0, 2), vec![1.0]),
            ],
        };
        let dd = predict_binary_domain_draws(&draws, &cells, &RngStream::new(13, 0)).unwrap();
        let p = inverse_logit(0.3);
        for k in 0..2 {
            let m = dd.values.iter().map(|r| r[k]).sum::<f64>() / n_draws as f64;
            assert!((m - p).abs() < 0.01, "week {k} mean {m} vs {p}");
        }
    }

    #[test]
    fn domain_draws_summaries_respect_bounds_and_order() {
        let (draws, cells) = carry_setup((25, 25));
        let est =
            predict_binary_domains(&draws, &cells, 0.1, &RngStream::new(14, 0)).unwrap();
        assert_eq!(est.len(), 2);
        for e in &est {
            assert!(e.summary.ci_lower <= e.summary.point);
            assert!(e.summary.point <= e.summary.ci_upper);
            assert!(e.summary.ci_lower >= 0.0 && e.summary.ci_upper <= 1.0);
            assert_eq!(e.summary.n_draws, 30_000);
        }
    }

    #[test]
    fn prediction_is_reproducible_for_equal_streams() {
        let (draws, cells) = carry_setup((12, 12));
        let a = predict_binary_domain_draws(&draws, &cells, &RngStream::new(21, 3)).unwrap();
        let b = predict_binary_domain_draws(&draws, &cells, &RngStream::new(21, 3)).unwrap();
        assert_eq!(a.values, b.values);
    }
}
