//! TOML run configurations for the command-line driver.
//!
//! Relative paths inside a config file resolve against the directory that
//! contains the file, so a config travels with its data.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tulm::btulm::BtulmConfig;
use tulm::data::{CellMapping, ColumnMapping, Mode};
use tulm::evaluation::{GeneratorSpec, StudyConfig};
use tulm::gtulm::GtulmConfig;
use tulm::{Error, Result};

/// Config for `tulm fit`: microdata in, posterior draws out.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub mode: Mode,
    pub microdata: PathBuf,
    pub columns: ColumnMapping,
    /// Sampler settings for gaussian mode; ignored in binary mode.
    #[serde(default)]
    pub gaussian: GtulmConfig,
    /// Sampler settings for binary mode; ignored in gaussian mode.
    #[serde(default)]
    pub binary: BtulmConfig,
}

/// Config for `tulm predict`: a fit directory plus population cell counts.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    /// Directory holding `draws.csv` and `fit_meta.json` from a fit run.
    pub draws: PathBuf,
    pub cells: PathBuf,
    pub cell_columns: CellMapping,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Config for `tulm direct`: design-based domain means from microdata.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectConfig {
    pub mode: Mode,
    pub microdata: PathBuf,
    pub columns: ColumnMapping,
    /// Optional cell counts; with them domains use known population sizes,
    /// without them the weighted mean normalizes by the weight sum.
    #[serde(default)]
    pub cells: Option<PathBuf>,
    #[serde(default)]
    pub cell_columns: Option<CellMapping>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Config for `tulm study`: a synthetic population plus the replication
/// settings for the repeated-sampling comparison.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFileConfig {
    pub population: GeneratorSpec,
    pub study: StudyConfig,
}

fn default_alpha() -> f64 {
    0.05
}

/// Reads and parses a TOML config, mapping both missing files and parse
/// problems to config errors.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Resolves a config-relative path against the config file's directory.
pub fn resolve(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}
