//! Tabular data model and CSV ingestion.
//!
//! A [`Dataset`] is an immutable, column-major table of finite reals. Column
//! roles (outcome, exposure replicates, covariates) live in a separate
//! [`AnalysisSpec`] so the same table can be analysed several ways.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

/// Column roles for an analysis.
///
/// `exposure_replicates[0]` is the analysed exposure; any further entries are
/// repeated error-prone measurements used only to estimate the error variance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub outcome: String,
    pub exposure_replicates: Vec<String>,
    pub covariates: Vec<String>,
}

impl AnalysisSpec {
    pub fn new(
        outcome: impl Into<String>,
        exposure_replicates: Vec<String>,
        covariates: Vec<String>,
    ) -> Result<Self> {
        let spec = Self {
            outcome: outcome.into(),
            exposure_replicates,
            covariates,
        };
        spec.check_shape()?;
        Ok(spec)
    }

    /// The analysed (first) exposure measurement.
    pub fn exposure(&self) -> &str {
        &self.exposure_replicates[0]
    }

    pub fn n_replicates(&self) -> usize {
        self.exposure_replicates.len()
    }

    fn all_columns(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.outcome)
            .chain(self.exposure_replicates.iter())
            .chain(self.covariates.iter())
    }

    fn check_shape(&self) -> Result<()> {
        if self.exposure_replicates.is_empty() {
            return Err(Error::InvalidSpec(
                "at least one exposure column is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for name in self.all_columns() {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSpec(format!(
                    "column '{name}' is assigned more than one role"
                )));
            }
        }
        Ok(())
    }

    /// Checks role distinctness and that every named column exists.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        self.check_shape()?;
        for name in self.all_columns() {
            data.column(name)?;
        }
        Ok(())
    }
}

impl Dataset {
    /// Builds a dataset from named columns, enforcing the table invariants.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::Dimension("dataset has no columns".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return Err(Error::Dimension("dataset has no rows".into()));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Dimension(format!(
                    "column '{name}' has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::BadCell {
                    row: row + 1,
                    column: name.clone(),
                    value: col[row].to_string(),
                });
            }
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    }

    /// Writes the table as CSV with 17 significant digits, enough to reload
    /// every value bit-for-bit.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(&self.names).map_err(csv_err)?;
        let mut record = Vec::with_capacity(self.n_cols());
        for row in 0..self.n_rows {
            record.clear();
            record.extend(self.columns.iter().map(|c| format!("{:.16e}", c[row])));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Loads a headered, comma-separated numeric table and checks it against `spec`.
pub fn load_csv(path: impl AsRef<Path>, spec: &AnalysisSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let data = read_csv(file)?;
    spec.validate(&data)?;
    Ok(data)
}

/// Parses CSV from any reader. Row numbers in errors are 1-based data rows
/// (the header is row 0).
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    row: i + 1,
                    column: names[j].clone(),
                    value: cell.to_string(),
                })?;
            columns[j].push(value);
        }
    }
    Dataset::from_columns(names, columns)
}

/// Assembles `[1, exposure, covariates...]` in declared order.
pub fn design_matrix(data: &Dataset, exposure: &str, covariates: &[String]) -> Result<DMatrix<f64>> {
    let mut cols: Vec<&[f64]> = Vec::with_capacity(covariates.len() + 1);
    cols.push(data.column(exposure)?);
    for c in covariates {
        cols.push(data.column(c)?);
    }
    Ok(design_from_columns(data.n_rows(), &cols))
}

pub(crate) fn design_from_columns(n: usize, columns: &[&[f64]]) -> DMatrix<f64> {
    let p = columns.len() + 1;
    DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}
