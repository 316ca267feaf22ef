//! Panel data model: unit-week microdata, population cell counts, ingest
//! with validation, survey-weight scaling, and the first-time / follow-up
//! partition the longitudinal likelihood is built on.
//!
//! Area labels are integers 1..=m and week labels integers 1..=T in all
//! external files; internally both are 0-based. A unit's appearances must be
//! consecutive weeks, at most [`MAX_CONSECUTIVE_WEEKS`] of them, mirroring
//! the rotating-panel design of the motivating survey.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Longest run of consecutive weeks a unit may appear.
pub const MAX_CONSECUTIVE_WEEKS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gaussian,
    Binary,
}

/// Response status of the same unit in the previous week (binary mode).
/// `NotSampled` is the reference level of the synthetic covariate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrevStatus {
    NotSampled,
    PrevNo,
    PrevYes,
}

#[derive(Clone, Debug)]
pub struct UnitWeekRecord {
    /// Dense unit index.
    pub unit: usize,
    /// 0-based area index.
    pub area: usize,
    /// 0-based week index.
    pub week: usize,
    /// Response: real (Gaussian mode) or 0..=trials (binary mode).
    pub y: f64,
    /// Binomial trials; 1 for unit-level microdata rows.
    pub trials: u64,
    /// Design weight w = 1/π, as supplied.
    pub weight: f64,
    /// Week-scaled weight; set by [`scale_weights`], kept alongside the
    /// original.
    pub scaled_weight: Option<f64>,
    /// Base covariate row (intercept included when configured); the
    /// prev-status dummies are never materialized here.
    pub x: Vec<f64>,
    pub prev: PrevStatus,
}

#[derive(Clone, Debug)]
pub struct PanelDataset {
    pub mode: Mode,
    /// Sorted by (unit, week).
    pub records: Vec<UnitWeekRecord>,
    pub n_units: usize,
    pub n_areas: usize,
    pub n_weeks: usize,
    pub covariate_names: Vec<String>,
    /// Original unit labels, indexed by dense unit id.
    pub unit_labels: Vec<String>,
    /// Per week: indices of records that are a unit's first response.
    pub first_time: Vec<Vec<usize>>,
    /// Per week: indices of records whose unit also responded at week−1.
    pub followup: Vec<Vec<usize>>,
    /// For each record, the index of the same unit's record one week
    /// earlier, when it exists.
    pub prev_index: Vec<Option<usize>>,
    /// Rows dropped at ingest because the response was missing.
    pub dropped_nonresponse: usize,
    /// Whether prev_status fields reflect the current responses.
    pub prev_built: bool,
    /// Whether scaled weights are present.
    pub scaled: bool,
}

impl PanelDataset {
    /// Number of base covariates.
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    /// Builds a dataset from records, sorting them and deriving the
    /// first-time / follow-up partition. All structural invariants are
    /// checked here; `lines` (parallel to `records`, pre-sort) attributes
    /// failures to file lines when ingesting.
    pub fn from_records(
        mode: Mode,
        mut records: Vec<UnitWeekRecord>,
        n_areas: usize,
        n_weeks: usize,
        covariate_names: Vec<String>,
        unit_labels: Vec<String>,
        lines: Option<Vec<u64>>,
    ) -> Result<Self> {
        if n_areas == 0 || n_weeks == 0 {
            return Err(Error::Data("need at least one area and one week".into()));
        }
        let fail = |line: Option<u64>, msg: String| match line {
            Some(line) => Error::DataAtLine { line, msg },
            None => Error::Data(msg),
        };
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by_key(|&i| (records[i].unit, records[i].week));
        let line_of = |slot: usize, order: &[usize]| lines.as_ref().map(|l| l[order[slot]]);

        let p = covariate_names.len();
        for (slot, &i) in order.iter().enumerate() {
            let r = &records[i];
            let line = line_of(slot, &order);
            if !(r.weight > 0.0) || !r.weight.is_finite() {
                return Err(fail(line, format!("design weight must be positive, got {}", r.weight)));
            }
            if r.area >= n_areas {
                return Err(fail(line, format!("area index {} out of range", r.area)));
            }
            if r.week >= n_weeks {
                return Err(fail(line, format!("week index {} out of range", r.week)));
            }
            if r.x.len() != p {
                return Err(fail(
                    line,
                    format!("covariate row has {} values, expected {p}", r.x.len()),
                ));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(fail(line, "non-finite covariate value".into()));
            }
            match mode {
                Mode::Gaussian => {
                    if !r.y.is_finite() {
                        return Err(fail(line, format!("non-finite response {}", r.y)));
                    }
                }
                Mode::Binary => {
                    if r.trials == 0 {
                        return Err(fail(line, "binary record needs trials >= 1".into()));
                    }
                    if r.y.fract() != 0.0 || r.y < 0.0 || r.y > r.trials as f64 {
                        return Err(fail(
                            line,
                            format!("binary response {} outside 0..={}", r.y, r.trials),
                        ));
                    }
                }
            }
        }

        // Panel structure: per unit, weeks must be distinct, consecutive,
        // and at most MAX_CONSECUTIVE_WEEKS long.
        for (slot, &i) in order.iter().enumerate() {
            if slot == 0 {
                continue;
            }
            let (prev, cur) = (&records[order[slot - 1]], &records[i]);
            if prev.unit != cur.unit {
                continue;
            }
            let line = line_of(slot, &order);
            if prev.week == cur.week {
                return Err(fail(
                    line,
                    format!(
                        "duplicate (unit, week) pair: unit {} week {}",
                        unit_labels.get(cur.unit).cloned().unwrap_or_else(|| cur.unit.to_string()),
                        cur.week + 1
                    ),
                ));
            }
            if cur.week != prev.week + 1 {
                return Err(fail(
                    line,
                    format!(
                        "unit {} appears at weeks {} and {} without week {}",
                        unit_labels.get(cur.unit).cloned().unwrap_or_else(|| cur.unit.to_string()),
                        prev.week + 1,
                        cur.week + 1,
                        prev.week + 2
                    ),
                ));
            }
        }
        let mut run = 1usize;
        for slot in 1..order.len() {
            let (prev, cur) = (&records[order[slot - 1]], &records[order[slot]]);
            run = if prev.unit == cur.unit { run + 1 } else { 1 };
            if run > MAX_CONSECUTIVE_WEEKS {
                return Err(fail(
                    line_of(slot, &order),
                    format!(
                        "unit {} appears in more than {MAX_CONSECUTIVE_WEEKS} consecutive weeks",
                        unit_labels
                            .get(cur.unit)
                            .cloned()
                            .unwrap_or_else(|| cur.unit.to_string())
                    ),
                ));
            }
        }

        let sorted: Vec<UnitWeekRecord> = {
            let mut out = Vec::with_capacity(records.len());
            for &i in &order {
                out.push(records[i].clone());
            }
            records.clear();
            out
        };
        let n_units = sorted.iter().map(|r| r.unit + 1).max().unwrap_or(0);

        let mut data = PanelDataset {
            mode,
            records: sorted,
            n_units,
            n_areas,
            n_weeks,
            covariate_names,
            unit_labels,
            first_time: Vec::new(),
            followup: Vec::new(),
            prev_index: Vec::new(),
            dropped_nonresponse: 0,
            prev_built: false,
            scaled: false,
        };
        data.rebuild_partitions();
        Ok(data)
    }

    /// Recomputes prev_index and the per-week first-time / follow-up
    /// partition from record adjacency.
    fn rebuild_partitions(&mut self) {
        let n = self.records.len();
        self.prev_index = vec![None; n];
        for i in 1..n {
            let (a, b) = (&self.records[i - 1], &self.records[i]);
            if a.unit == b.unit && a.week + 1 == b.week {
                self.prev_index[i] = Some(i - 1);
            }
        }
        self.first_time = vec![Vec::new(); self.n_weeks];
        self.followup = vec![Vec::new(); self.n_weeks];
        for i in 0..n {
            let t = self.records[i].week;
            match self.prev_index[i] {
                Some(_) => self.followup[t].push(i),
                None => self.first_time[t].push(i),
            }
        }
    }

    /// Scaled weight of record `i`; call [`scale_weights`] first.
    pub fn scaled_weight(&self, i: usize) -> Result<f64> {
        self.records[i]
            .scaled_weight
            .ok_or_else(|| Error::Config("weights not scaled; apply scale_weights first".into()))
    }

    /// Record count in week t.
    pub fn week_size(&self, t: usize) -> usize {
        self.first_time[t].len() + self.followup[t].len()
    }

    /// Extracts one week as a standalone single-week dataset (week index 0),
    /// carrying scaled weights through unchanged. Used by the per-week
    /// baseline fits.
    pub fn subset_week(&self, t: usize) -> Result<PanelDataset> {
        if t >= self.n_weeks {
            return Err(Error::Config(format!("week {t} out of range")));
        }
        let mut records = Vec::new();
        for r in &self.records {
            if r.week == t {
                let mut r = r.clone();
                r.week = 0;
                r.prev = PrevStatus::NotSampled;
                records.push(r);
            }
        }
        let mut sub = PanelDataset::from_records(
            self.mode,
            records,
            self.n_areas,
            1,
            self.covariate_names.clone(),
            self.unit_labels.clone(),
            None,
        )?;
        sub.scaled = self.scaled;
        Ok(sub)
    }
}

/// Scales design weights within each week to sum to that week's sample
/// size: w̃ = n_t · w / Σ w. Recomputed from the original weights, so
/// applying it twice is a no-op.
pub fn scale_weights(mut data: PanelDataset) -> Result<PanelDataset> {
    let mut totals = vec![0.0f64; data.n_weeks];
    let mut counts = vec![0usize; data.n_weeks];
    for r in &data.records {
        totals[r.week] += r.weight;
        counts[r.week] += 1;
    }
    for t in 0..data.n_weeks {
        if counts[t] > 0 && !(totals[t] > 0.0) {
            return Err(Error::Data(format!(
                "week {} has zero total weight",
                t + 1
            )));
        }
    }
    for r in &mut data.records {
        r.scaled_weight = Some(counts[r.week] as f64 * r.weight / totals[r.week]);
    }
    data.scaled = true;
    Ok(data)
}

/// Sets the previous-week response status on every record (binary mode):
/// PrevYes / PrevNo when the unit responded 1 / 0 at week t−1, NotSampled
/// otherwise. Idempotent. The two dummy columns (reference level
/// NotSampled) are appended to the design matrix by the samplers, not
/// materialized here.
pub fn build_prev_covariate(mut data: PanelDataset) -> Result<PanelDataset> {
    if data.mode != Mode::Binary {
        return Err(Error::Config(
            "prev-status covariate applies to binary mode only".into(),
        ));
    }
    if data.records.iter().any(|r| r.trials != 1) {
        return Err(Error::Config(
            "prev-status covariate requires unit-level (trials = 1) records".into(),
        ));
    }
    for i in 0..data.records.len() {
        data.records[i].prev = match data.prev_index[i] {
            None => PrevStatus::NotSampled,
            Some(j) => {
                if data.records[j].y > 0.5 {
                    PrevStatus::PrevYes
                } else {
                    PrevStatus::PrevNo
                }
            }
        };
    }
    data.prev_built = true;
    Ok(data)
}

/// Names of the expanded covariates (base plus prev-status dummies).
pub fn covariate_names_with_prev(base: &[String]) -> Vec<String> {
    let mut names = base.to_vec();
    names.push("prev_no".into());
    names.push("prev_yes".into());
    names
}

/// Column mapping for microdata files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub unit: String,
    pub area: String,
    pub week: String,
    pub weight: String,
    pub response: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Optional trials column for pre-aggregated binomial rows.
    #[serde(default)]
    pub trials: Option<String>,
    /// Prepend an intercept column (named "intercept") to the covariates.
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

struct HeaderIndex {
    by_name: BTreeMap<String, usize>,
}

impl HeaderIndex {
    fn new(headers: &csv::StringRecord) -> Self {
        let by_name = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        HeaderIndex { by_name }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::Data(format!("missing required column '{name}'")))
    }
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<T> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<T>().map_err(|_| Error::DataAtLine {
        line,
        msg: format!("cannot parse column '{name}' value '{raw}'"),
    })
}

/// Reads a delimiter-separated microdata file into a validated
/// [`PanelDataset`]. Rows with a blank response are dropped and counted
/// (item nonresponse); partitions are derived after dropping, so a
/// follow-up whose predecessor was dropped becomes first-time.
pub fn ingest_microdata(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
    mode: Mode,
) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let idx = HeaderIndex::new(&headers);
    let unit_col = idx.require(&mapping.unit)?;
    let area_col = idx.require(&mapping.area)?;
    let week_col = idx.require(&mapping.week)?;
    let weight_col = idx.require(&mapping.weight)?;
    let response_col = idx.require(&mapping.response)?;
    let cov_cols: Vec<usize> = mapping
        .covariates
        .iter()
        .map(|c| idx.require(c))
        .collect::<Result<_>>()?;
    let trials_col = match &mapping.trials {
        Some(c) => Some(idx.require(c)?),
        None => None,
    };

    let mut covariate_names = Vec::new();
    if mapping.intercept {
        covariate_names.push("intercept".to_string());
    }
    covariate_names.extend(mapping.covariates.iter().cloned());

    let mut unit_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut unit_labels: Vec<String> = Vec::new();
    let mut raw_rows: Vec<(UnitWeekRecord, u64)> = Vec::new();
    let mut dropped = 0usize;
    let mut max_area = 0i64;
    let mut min_week = i64::MAX;
    let mut max_week = i64::MIN;

    for row in reader.records() {
        let record = row?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(0);
        let response_raw = record.get(response_col).unwrap_or("").trim();
        if response_raw.is_empty() {
            dropped += 1;
            continue;
        }
        let unit_label = record.get(unit_col).unwrap_or("").trim().to_string();
        if unit_label.is_empty() {
            return Err(Error::DataAtLine {
                line,
                msg: "empty unit id".into(),
            });
        }
        let area: i64 = parse_field(&record, area_col, &mapping.area, line)?;
        let week: i64 = parse_field(&record, week_col, &mapping.week, line)?;
        if area < 1 {
            return Err(Error::DataAtLine {
                line,
                msg: format!("area label {area} must be a positive integer"),
            });
        }
        if week < 1 {
            return Err(Error::DataAtLine {
                line,
                msg: format!("week label {week} must be a positive integer"),
            });
        }
        let weight: f64 = parse_field(&record, weight_col, &mapping.weight, line)?;
        let y: f64 = parse_field(&record, response_col, &mapping.response, line)?;
        let trials: u64 = match trials_col {
            Some(c) => parse_field(&record, c, mapping.trials.as_ref().unwrap(), line)?,
            None => 1,
        };
        let mut x = Vec::with_capacity(covariate_names.len());
        if mapping.intercept {
            x.push(1.0);
        }
        for (c, name) in cov_cols.iter().zip(&mapping.covariates) {
            x.push(parse_field(&record, *c, name, line)?);
        }
        let next_id = unit_ids.len();
        let unit = *unit_ids.entry(unit_label.clone()).or_insert_with(|| {
            unit_labels.push(unit_label);
            next_id
        });
        max_area = max_area.max(area);
        min_week = min_week.min(week);
        max_week = max_week.max(week);
        raw_rows.push((
            UnitWeekRecord {
                unit,
                area: (area - 1) as usize,
                week: (week - 1) as usize,
                y,
                trials,
                weight,
                scaled_weight: None,
                x,
                prev: PrevStatus::NotSampled,
            },
            line,
        ));
    }

    if raw_rows.is_empty() {
        return Err(Error::Data("no usable rows in microdata file".into()));
    }
    if min_week != 1 {
        return Err(Error::Data(format!(
            "week labels must start at 1, found minimum {min_week}"
        )));
    }
    let (records, lines): (Vec<_>, Vec<_>) = raw_rows.into_iter().unzip();
    let mut data = PanelDataset::from_records(
        mode,
        records,
        max_area as usize,
        max_week as usize,
        covariate_names,
        unit_labels,
        Some(lines),
    )?;
    data.dropped_nonresponse = dropped;
    Ok(data)
}

/// Writes a dataset back to the microdata format read by
/// [`ingest_microdata`] with the same column mapping (original weights,
/// 1-based labels, intercept column omitted).
pub fn write_microdata(
    data: &PanelDataset,
    mapping: &ColumnMapping,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec![
        mapping.unit.clone(),
        mapping.area.clone(),
        mapping.week.clone(),
        mapping.weight.clone(),
        mapping.response.clone(),
    ];
    header.extend(mapping.covariates.iter().cloned());
    if let Some(t) = &mapping.trials {
        header.push(t.clone());
    }
    w.write_record(&header)?;
    let skip = usize::from(mapping.intercept);
    for r in &data.records {
        let mut row = vec![
            data.unit_labels[r.unit].clone(),
            (r.area + 1).to_string(),
            (r.week + 1).to_string(),
            format!("{}", r.weight),
            format!("{}", r.y),
        ];
        row.extend(r.x.iter().skip(skip).map(|v| format!("{v}")));
        if mapping.trials.is_some() {
            row.push(r.trials.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One poststratification cell: a count of population units sharing area,
/// week, and covariates. `cohort` optionally identifies the response
/// window (start week, length) the units belong to, which the binary
/// predictive chain uses to carry previous-response splits forward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub area: usize,
    pub week: usize,
    pub count: u64,
    pub cohort: Option<(usize, usize)>,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopulationCells {
    pub covariate_names: Vec<String>,
    pub n_areas: usize,
    pub n_weeks: usize,
    pub rows: Vec<CellRow>,
}

impl PopulationCells {
    /// Total population count in a domain.
    pub fn domain_count(&self, area: usize, week: usize) -> u64 {
        self.rows
            .iter()
            .filter(|r| r.area == area && r.week == week)
            .map(|r| r.count)
            .sum()
    }

    /// All (area, week) pairs present, sorted.
    pub fn domains(&self) -> Vec<(usize, usize)> {
        let mut d: Vec<(usize, usize)> = self.rows.iter().map(|r| (r.area, r.week)).collect();
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// Column mapping for population cell files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellMapping {
    pub area: String,
    pub week: String,
    pub count: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub cohort_start: Option<String>,
    #[serde(default)]
    pub cohort_len: Option<String>,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

/// Reads population cell counts (area, week, cell covariates, count).
pub fn ingest_cells(path: impl AsRef<Path>, mapping: &CellMapping) -> Result<PopulationCells> {
    if mapping.cohort_start.is_some() != mapping.cohort_len.is_some() {
        return Err(Error::Config(
            "cohort_start and cohort_len must be given together".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let idx = HeaderIndex::new(&headers);
    let area_col = idx.require(&mapping.area)?;
    let week_col = idx.require(&mapping.week)?;
    let count_col = idx.require(&mapping.count)?;
    let cov_cols: Vec<usize> = mapping
        .covariates
        .iter()
        .map(|c| idx.require(c))
        .collect::<Result<_>>()?;
    let cohort_cols = match (&mapping.cohort_start, &mapping.cohort_len) {
        (Some(s), Some(l)) => Some((idx.require(s)?, idx.require(l)?)),
        _ => None,
    };

    let mut covariate_names = Vec::new();
    if mapping.intercept {
        covariate_names.push("intercept".to_string());
    }
    covariate_names.extend(mapping.covariates.iter().cloned());

    let mut rows = Vec::new();
    let mut n_areas = 0usize;
    let mut n_weeks = 0usize;
    for row in reader.records() {
        let record = row?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let area: i64 = parse_field(&record, area_col, &mapping.area, line)?;
        let week: i64 = parse_field(&record, week_col, &mapping.week, line)?;
        let count: u64 = parse_field(&record, count_col, &mapping.count, line)?;
        if area < 1 || week < 1 {
            return Err(Error::DataAtLine {
                line,
                msg: format!("area/week labels must be positive integers, got {area}/{week}"),
            });
        }
        let cohort = match cohort_cols {
            Some((sc, lc)) => {
                let start: i64 =
                    parse_field(&record, sc, mapping.cohort_start.as_ref().unwrap(), line)?;
                let len: usize =
                    parse_field(&record, lc, mapping.cohort_len.as_ref().unwrap(), line)?;
                if start < 1 || len == 0 {
                    return Err(Error::DataAtLine {
                        line,
                        msg: format!("bad cohort ({start}, {len})"),
                    });
                }
                Some(((start - 1) as usize, len))
            }
            None => None,
        };
        let mut x = Vec::with_capacity(covariate_names.len());
        if mapping.intercept {
            x.push(1.0);
        }
        for (c, name) in cov_cols.iter().zip(&mapping.covariates) {
            x.push(parse_field(&record, *c, name, line)?);
        }
        n_areas = n_areas.max(area as usize);
        n_weeks = n_weeks.max(week as usize);
        rows.push(CellRow {
            area: (area - 1) as usize,
            week: (week - 1) as usize,
            count,
            cohort,
            x,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data("no rows in cell file".into()));
    }
    Ok(PopulationCells {
        covariate_names,
        n_areas,
        n_weeks,
        rows,
    })
}

/// Writes population cells in the format read by [`ingest_cells`].
pub fn write_cells(
    cells: &PopulationCells,
    mapping: &CellMapping,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = vec![mapping.area.clone(), mapping.week.clone(), mapping.count.clone()];
    if let (Some(s), Some(l)) = (&mapping.cohort_start, &mapping.cohort_len) {
        header.push(s.clone());
        header.push(l.clone());
    }
    header.extend(mapping.covariates.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    let skip = usize::from(mapping.intercept);
    for r in &cells.rows {
        let mut row = vec![
            (r.area + 1).to_string(),
            (r.week + 1).to_string(),
            r.count.to_string(),
        ];
        if mapping.cohort_start.is_some() {
            let (s, l) = r.cohort.ok_or_else(|| {
                Error::Config("cell mapping declares cohort columns but row lacks cohort".into())
            })?;
            row.push((s + 1).to_string());
            row.push(l.to_string());
        }
        row.extend(r.x.iter().skip(skip).map(|v| format!("{v}")));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
