//! Right-censored survival data: ingestion, validation, failure grids and
//! random train/test splits.
//!
//! A dataset is immutable once built. Subjects are kept in input order; a
//! time-sorted permutation is computed at construction so that risk-set
//! sweeps elsewhere in the crate do not have to re-sort.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Maximum number of re-draws in [`split`] before giving up.
pub const SPLIT_MAX_ATTEMPTS: usize = 100;

/// A sample `{(X_i, δ_i, Z_i)}` of right-censored observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    /// Row-major `n × p`.
    covariates: Vec<f64>,
    p: usize,
    names: Vec<String>,
    order: Vec<usize>,
}

impl SurvivalDataset {
    /// Builds a dataset from per-subject rows.
    pub fn new(times: Vec<f64>, events: Vec<bool>, rows: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        let p = names.len();
        let mut covariates = Vec::with_capacity(rows.len() * p);
        for row in &rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            covariates.extend_from_slice(row);
        }
        Self::from_flat(times, events, covariates, names)
    }

    /// Builds a dataset from a row-major covariate buffer of length `n * p`.
    pub fn from_flat(times: Vec<f64>, events: Vec<bool>, covariates: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let p = names.len();
        if p == 0 {
            return Err(Error::NoCovariates);
        }
        let n = times.len();
        if events.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: events.len(),
            });
        }
        if covariates.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: covariates.len(),
            });
        }
        if let Some((row, &value)) = times.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidTime { row, value });
        }
        if let Some(idx) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumeric {
                row: idx / p,
                column: names[idx % p].clone(),
                value: covariates[idx].to_string(),
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        Ok(Self {
            times,
            events,
            covariates,
            p,
            names,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Covariate dimension `p`.
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    /// Covariate vector `Z_i`.
    pub fn z(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    pub fn covariates_flat(&self) -> &[f64] {
        &self.covariates
    }

    /// Subject indices in non-decreasing order of observed time.
    pub fn sorted_order(&self) -> &[usize] {
        &self.order
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    /// Fraction of censored subjects.
    pub fn censoring_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        1.0 - self.event_count() as f64 / self.len() as f64
    }

    /// Largest observed failure time `t_K`, if any event exists.
    pub fn max_failure_time(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.events)
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .max_by(f64::total_cmp)
    }

    /// Subset of subjects, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut covariates = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            covariates.extend_from_slice(self.z(i));
        }
        Self::from_flat(
            indices.iter().map(|&i| self.times[i]).collect(),
            indices.iter().map(|&i| self.events[i]).collect(),
            covariates,
            self.names.clone(),
        )
        .expect("subset of a valid dataset is valid")
    }

    /// Keeps only the listed covariate columns (e.g. for nested models).
    pub fn select_covariates(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoCovariates);
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.p) {
            return Err(Error::InvalidArgument(format!(
                "covariate column {bad} out of range (p={})",
                self.p
            )));
        }
        let mut covariates = Vec::with_capacity(self.len() * columns.len());
        for i in 0..self.len() {
            let z = self.z(i);
            covariates.extend(columns.iter().map(|&c| z[c]));
        }
        Self::from_flat(
            self.times.clone(),
            self.events.clone(),
            covariates,
            columns.iter().map(|&c| self.names[c].clone()).collect(),
        )
    }

    /// Same subjects with every time multiplied by `c`.
    pub fn rescale_times(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("time scale must be positive, got {c}")));
        }
        Self::from_flat(
            self.times.iter().map(|t| t * c).collect(),
            self.events.clone(),
            self.covariates.clone(),
            self.names.clone(),
        )
    }

    /// Same subjects with covariates replaced by `f(Z_i)`.
    pub fn map_covariates<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let rows = (0..self.len()).map(|i| f(self.z(i))).collect();
        Self::new(self.times.clone(), self.events.clone(), rows, self.names.clone())
    }
}

/// Ordered distinct failure times with event and risk counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureGrid {
    /// `t_1 < … < t_K`.
    pub times: Vec<f64>,
    /// `d_l`: events at `t_l`.
    pub event_counts: Vec<usize>,
    /// `r_l = #{j : X_j ≥ t_l}`.
    pub risk_counts: Vec<usize>,
}

impl FailureGrid {
    /// Number of distinct failure times `K`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest failure time `t_K`.
    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("failure grid is never empty")
    }
}

/// Distinct event times of `ds` with `d_l` and `r_l`. Censored subjects tied
/// with an event time are counted at risk there.
pub fn failure_grid(ds: &SurvivalDataset) -> Result<FailureGrid> {
    let order = ds.sorted_order();
    let n = ds.len();
    let mut grid = FailureGrid {
        times: Vec::new(),
        event_counts: Vec::new(),
        risk_counts: Vec::new(),
    };
    let mut pos = 0;
    while pos < n {
        let t = ds.times[order[pos]];
        let mut end = pos;
        let mut deaths = 0;
        while end < n && ds.times[order[end]] == t {
            deaths += usize::from(ds.events[order[end]]);
            end += 1;
        }
        if deaths > 0 {
            grid.times.push(t);
            grid.event_counts.push(deaths);
            grid.risk_counts.push(n - pos);
        }
        pos = end;
    }
    if grid.times.is_empty() {
        return Err(Error::NoFailures);
    }
    Ok(grid)
}

/// Reads a dataset from CSV. Every column other than `time_col` and
/// `event_col` is a numeric covariate, kept in header order.
///
/// Row numbers in diagnostics are 1-based file lines (the header is line 1).
pub fn load_csv(path: impl AsRef<Path>, time_col: &str, event_col: &str) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, time_col, event_col)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, time_col: &str, event_col: &str) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::EmptyFile);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn { name: name.to_string() })
    };
    let time_idx = find(time_col)?;
    let event_idx = find(event_col)?;
    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|&c| c != time_idx && c != event_idx)
        .collect();
    if cov_idx.is_empty() {
        return Err(Error::NoCovariates);
    }
    let names: Vec<String> = cov_idx.iter().map(|&c| headers[c].to_string()).collect();

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut covariates = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: headers[c].to_string(),
                value: raw.to_string(),
            })
        };
        let t = cell(time_idx)?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidTime { row, value: t });
        }
        let raw_event = record.get(event_idx).unwrap_or("");
        let event = match raw_event.parse::<f64>() {
            Ok(0.0) => false,
            Ok(1.0) => true,
            _ => {
                return Err(Error::InvalidEvent {
                    row,
                    value: raw_event.to_string(),
                })
            }
        };
        for &c in &cov_idx {
            let v = cell(c)?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row,
                    column: headers[c].to_string(),
                    value: record.get(c).unwrap_or("").to_string(),
                });
            }
            covariates.push(v);
        }
        times.push(t);
        events.push(event);
    }
    if times.is_empty() {
        return Err(Error::EmptyFile);
    }
    SurvivalDataset::from_flat(times, events, covariates, names)
}

/// Writes `ds` as CSV such that [`read_csv`] reproduces it exactly.
pub fn write_csv<W: Write>(ds: &SurvivalDataset, writer: W, time_col: &str, event_col: &str) -> Result<()> {
    let to_err = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![time_col.to_string(), event_col.to_string()];
    header.extend(ds.names.iter().cloned());
    wtr.write_record(&header).map_err(to_err)?;
    for i in 0..ds.len() {
        let mut rec = Vec::with_capacity(ds.p + 2);
        rec.push(ds.times[i].to_string());
        rec.push(if ds.events[i] { "1" } else { "0" }.to_string());
        rec.extend(ds.z(i).iter().map(f64::to_string));
        wtr.write_record(&rec).map_err(to_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })
}

/// Writes `ds` to a file path.
pub fn save_csv(ds: &SurvivalDataset, path: impl AsRef<Path>, time_col: &str, event_col: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(ds, std::io::BufWriter::new(file), time_col, event_col)
}

/// Index partition behind [`split`]: `(train, test)`, each sorted ascending.
pub fn split_indices(ds: &SurvivalDataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0,1), got {fraction}"
        )));
    }
    let n = ds.len();
    let n_train = (n as f64 * fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::SplitFailed { attempts: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..SPLIT_MAX_ATTEMPTS {
        idx.shuffle(&mut rng);
        let (a, b) = idx.split_at(n_train);
        if a.iter().any(|&i| ds.events[i]) && b.iter().any(|&i| ds.events[i]) {
            let mut train = a.to_vec();
            let mut test = b.to_vec();
            train.sort_unstable();
            test.sort_unstable();
            return Ok((train, test));
        }
    }
    Err(Error::SplitFailed {
        attempts: SPLIT_MAX_ATTEMPTS,
    })
}

/// Random disjoint partition into `(train, test)` with `round(n·fraction)`
/// training subjects; both halves contain at least one event.
pub fn split(ds: &SurvivalDataset, fraction: f64, seed: u64) -> Result<(SurvivalDataset, SurvivalDataset)> {
    let (train, test) = split_indices(ds, fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Remission times (weeks) of the 42 leukaemia patients of the 6-MP trial.
/// Covariate `treat` is 1 for 6-MP, 0 for placebo.
pub fn freireich() -> SurvivalDataset {
    read_csv(FREIREICH_CSV.as_bytes(), "time", "status").expect("bundled dataset is valid")
}

pub const FREIREICH_CSV: &str = include_str!("../data/freireich.csv");

/// Distinct values of a column; handy for checking binary groupings.
pub(crate) fn distinct_values(ds: &SurvivalDataset, column: usize) -> BTreeSet<u64> {
    (0..ds.len()).map(|i| ds.z(i)[column].to_bits()).collect()
}
