//! Posterior draw storage: a named column per parameter, one row per
//! retained iteration, with a layout describing where the regression
//! coefficients, weekly area effects, and scalar parameters live.

use crate::data::Mode;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Column layout of a draw matrix. Week indices in `weeks` are 0-based
/// dataset weeks; `eta` columns are stored week-major, area-minor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub p: usize,
    pub n_areas: usize,
    pub weeks: Vec<usize>,
    pub scalars: Vec<String>,
}

impl ParamLayout {
    pub fn beta_range(&self) -> std::ops::Range<usize> {
        0..self.p
    }

    /// Columns of the area effects for `weeks[k]`.
    pub fn eta_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.p + k * self.n_areas;
        start..start + self.n_areas
    }

    pub fn scalar_col(&self, name: &str) -> Option<usize> {
        let base = self.p + self.weeks.len() * self.n_areas;
        self.scalars.iter().position(|s| s == name).map(|i| base + i)
    }

    pub fn n_cols(&self) -> usize {
        self.p + self.weeks.len() * self.n_areas + self.scalars.len()
    }

    pub fn names(&self, covariate_names: &[String]) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_cols());
        for j in 0..self.p {
            match covariate_names.get(j) {
                Some(c) => names.push(format!("beta_{c}")),
                None => names.push(format!("beta_{j}")),
            }
        }
        for &t in &self.weeks {
            for j in 0..self.n_areas {
                names.push(format!("eta_t{}_a{}", t + 1, j + 1));
            }
        }
        names.extend(self.scalars.iter().cloned());
        names
    }
}

/// Metadata stored next to the draw matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub mode: Mode,
    pub layout: ParamLayout,
    /// Expanded covariate names matching the beta columns.
    pub covariate_names: Vec<String>,
    /// Column positions of the prev-status dummies within beta, when the
    /// fit used them.
    pub prev_cols: Option<(usize, usize)>,
    pub n_burn: usize,
    pub thin: usize,
    /// Random-walk acceptance rate for the autocorrelation parameter,
    /// when the fit had one.
    pub rho_accept_rate: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PosteriorDraws {
    pub meta: DrawsMeta,
    /// Row-major draw matrix, one row per retained iteration.
    pub rows: Vec<Vec<f64>>,
}

impl PosteriorDraws {
    pub fn new(meta: DrawsMeta) -> Self {
        PosteriorDraws { meta, rows: Vec::new() }
    }

    pub fn n_draws(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.meta.layout.n_cols() {
            return Err(Error::Data(format!(
                "draw row has {} values, layout expects {}",
                row.len(),
                self.meta.layout.n_cols()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn beta(&self, draw: usize) -> &[f64] {
        &self.rows[draw][self.meta.layout.beta_range()]
    }

    /// Area effects of the k-th stored week.
    pub fn eta(&self, draw: usize, k: usize) -> &[f64] {
        &self.rows[draw][self.meta.layout.eta_range(k)]
    }

    pub fn scalar(&self, draw: usize, name: &str) -> Result<f64> {
        let col = self
            .meta
            .layout
            .scalar_col(name)
            .ok_or_else(|| Error::Config(format!("no scalar parameter named '{name}'")))?;
        Ok(self.rows[draw][col])
    }

    /// Full chain of one scalar parameter.
    pub fn scalar_chain(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .meta
            .layout
            .scalar_col(name)
            .ok_or_else(|| Error::Config(format!("no scalar parameter named '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[col]).collect())
    }

    /// Position of dataset week `t` within the stored weeks.
    pub fn week_pos(&self, t: usize) -> Option<usize> {
        self.meta.layout.weeks.iter().position(|&w| w == t)
    }

    /// Covariate names without the prev-status dummies.
    pub fn base_covariate_names(&self) -> Vec<String> {
        match self.meta.prev_cols {
            Some((a, b)) => self
                .meta
                .covariate_names
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != a && *i != b)
                .map(|(_, n)| n.clone())
                .collect(),
            None => self.meta.covariate_names.clone(),
        }
    }

    /// Writes `draws.csv` and `fit_meta.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let meta_json = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(dir.join("fit_meta.json"), meta_json + "\n")?;
        let file = std::fs::File::create(dir.join("draws.csv"))?;
        let mut out = std::io::BufWriter::new(file);
        let names = self.meta.layout.names(&self.meta.covariate_names);
        writeln!(out, "{}", names.join(","))?;
        let mut buf = String::new();
        for row in &self.rows {
            buf.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    buf.push(',');
                }
                buf.push_str(&format!("{v}"));
            }
            writeln!(out, "{buf}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a fit directory written by [`PosteriorDraws::write_dir`].
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: DrawsMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.join("fit_meta.json"))?)?;
        let file = std::fs::File::open(dir.join("draws.csv"))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("draws.csv is empty".into()))??;
        let expected = meta.layout.names(&meta.covariate_names);
        if header.split(',').count() != expected.len() {
            return Err(Error::Data(format!(
                "draws.csv has {} columns, metadata expects {}",
                header.split(',').count(),
                expected.len()
            )));
        }
        let mut draws = PosteriorDraws::new(meta);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.parse::<f64>()).collect();
            let row = row.map_err(|e| Error::DataAtLine {
                line: (i + 2) as u64,
                msg: format!("bad draw value: {e}"),
            })?;
            draws.push(row)?;
        }
        Ok(draws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_draws() -> PosteriorDraws {
        let layout = ParamLayout {
            p: 2,
            n_areas: 3,
            weeks: vec![0, 1],
            scalars: vec!["rho".into(), "sigma2".into()],
        };
        let meta = DrawsMeta {
            mode: Mode::Gaussian,
            layout,
            covariate_names: vec!["intercept".into(), "age".into()],
            prev_cols: None,
            n_burn: 10,
            thin: 2,
            rho_accept_rate: Some(0.4),
        };
        let mut d = PosteriorDraws::new(meta);
        d.push(vec![0.5, -1.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.25, 1.5])
            .unwrap();
        d.push(vec![0.25, -0.5, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, -0.125, 2.5])
            .unwrap();
        d
    }

    #[test]
    fn layout_addressing() {
        let d = sample_draws();
        assert_eq!(d.beta(0), &[0.5, -1.0]);
        assert_eq!(d.eta(0, 1), &[0.4, 0.5, 0.6]);
        assert_eq!(d.scalar(1, "rho").unwrap(), -0.125);
        assert_eq!(d.scalar(1, "sigma2").unwrap(), 2.5);
        assert!(d.scalar(0, "phi").is_err());
        assert_eq!(d.week_pos(1), Some(1));
        assert_eq!(d.week_pos(7), None);
        assert_eq!(d.scalar_chain("rho").unwrap(), vec![0.25, -0.125]);
    }

    #[test]
    fn names_follow_convention() {
        let d = sample_draws();
        let names = d.meta.layout.names(&d.meta.covariate_names);
        assert_eq!(names[0], "beta_intercept");
        assert_eq!(names[1], "beta_age");
        assert_eq!(names[2], "eta_t1_a1");
        assert_eq!(names[7], "eta_t2_a3");
        assert_eq!(names[8], "rho");
        assert_eq!(names.len(), d.meta.layout.n_cols());
    }

    #[test]
    fn push_rejects_wrong_width() {
        let mut d = sample_draws();
        assert!(d.push(vec![0.0; 3]).is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let d = sample_draws();
        let dir = tempfile::tempdir().unwrap();
        d.write_dir(dir.path()).unwrap();
        let d2 = PosteriorDraws::read_dir(dir.path()).unwrap();
        assert_eq!(d.rows, d2.rows);
        assert_eq!(d.meta.layout, d2.meta.layout);
        assert_eq!(d2.meta.rho_accept_rate, Some(0.4));
    }

    #[test]
    fn base_names_strip_prev_dummies() {
        let layout = ParamLayout {
            p: 4,
            n_areas: 1,
            weeks: vec![0],
            scalars: vec![],
        };
        let meta = DrawsMeta {
            mode: Mode::Binary,
            layout,
            covariate_names: vec![
                "intercept".into(),
                "age".into(),
                "prev_no".into(),
                "prev_yes".into(),
            ],
            prev_cols: Some((2, 3)),
            n_burn: 0,
            thin: 1,
            rho_accept_rate: None,
        };
        let d = PosteriorDraws::new(meta);
        assert_eq!(d.base_covariate_names(), vec!["intercept", "age"]);
    }
}
