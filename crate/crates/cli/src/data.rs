//! CSV ingestion: header row, comma separated, period decimal point.

use std::path::{Path, PathBuf};

use bsreg::model::{numerical_rank, Dataset};
use clap::Args;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, Args, Serialize)]
pub struct CsvSchema {
    /// Input CSV file with a header row.
    pub csv: PathBuf,

    /// Response column.
    #[arg(long, default_value = "y")]
    pub response: String,

    /// Covariate columns in design order (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,

    /// Prepend a column of ones.
    #[arg(long)]
    pub intercept: bool,

    /// Take logs of the response (raw lifetimes in the file).
    #[arg(long)]
    pub log_response: bool,
}

pub struct Loaded {
    pub data: Dataset,
    /// Design column names, intercept first when present.
    pub columns: Vec<String>,
}

impl Loaded {
    /// Design indices of the named columns.
    pub fn indices(&self, names: &[String]) -> CliResult<Vec<usize>> {
        names
            .iter()
            .map(|name| {
                self.columns.iter().position(|c| c == name).ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown design column '{name}' (design columns: {})",
                        self.columns.join(", ")
                    ))
                })
            })
            .collect()
    }
}

fn open(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_cell(path: &Path, record: &csv::StringRecord, line: u64, idx: usize, name: &str) -> CliResult<f64> {
    let raw = record.get(idx).unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Data(format!(
            "{}: line {line}, column '{name}': '{raw}' is not a finite number",
            path.display()
        ))),
    }
}

pub fn load(schema: &CsvSchema) -> CliResult<Loaded> {
    let path = &schema.csv;
    let mut reader = open(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!(
                "{}: column '{name}' not found (header: {})",
                path.display(),
                headers.join(", ")
            ))
        })
    };
    let response = find(&schema.response)?;
    let covariates: Vec<String> = match &schema.covariates {
        // `--covariates ""` asks for an intercept-only design
        Some(c) => c.iter().filter(|c| !c.is_empty()).cloned().collect(),
        None => headers.iter().filter(|h| **h != schema.response).cloned().collect(),
    };
    if let Some(dup) = covariates.iter().enumerate().find(|(i, c)| covariates[..*i].contains(c)) {
        return Err(CliError::Usage(format!("covariate '{}' listed twice", dup.1)));
    }
    if covariates.contains(&schema.response) {
        return Err(CliError::Usage(format!("response '{}' is also listed as a covariate", schema.response)));
    }
    let cov_idx = covariates.iter().map(|c| find(c)).collect::<CliResult<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |idx: usize| parse_cell(path, &record, line, idx, &headers[idx]);
        let mut value = cell(response)?;
        if schema.log_response {
            if value <= 0.0 {
                return Err(CliError::Data(format!(
                    "{}: line {line}, column '{}': lifetime {value} must be positive to take logs",
                    path.display(),
                    schema.response
                )));
            }
            value = value.ln();
        }
        y.push(value);
        let mut row = Vec::with_capacity(cov_idx.len() + 1);
        if schema.intercept {
            row.push(1.0);
        }
        for &j in &cov_idx {
            row.push(cell(j)?);
        }
        rows.push(row);
    }

    let mut columns = Vec::new();
    if schema.intercept {
        columns.push(INTERCEPT.to_owned());
    }
    columns.extend(covariates);
    if columns.is_empty() {
        return Err(CliError::Usage("the design has no columns; add covariates or --intercept".into()));
    }
    let n = rows.len();
    let p = columns.len();
    if n <= p {
        return Err(CliError::Data(format!(
            "{}: {n} data rows for {p} design columns; need more rows than columns",
            path.display()
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    check_rank(&x, &columns)?;
    let data = Dataset::new(DVector::from_vec(y), x)?;
    Ok(Loaded { data, columns })
}

/// Names the first column that is linearly dependent on the ones before it.
fn check_rank(x: &DMatrix<f64>, columns: &[String]) -> CliResult<()> {
    if numerical_rank(x) == x.ncols() {
        return Ok(());
    }
    for j in 0..x.ncols() {
        if numerical_rank(&x.columns(0, j + 1).into_owned()) <= j {
            let earlier = if j == 0 { "it is identically zero".to_owned() } else {
                format!("it is a linear combination of {}", columns[..j].join(", "))
            };
            return Err(CliError::Numerical(format!(
                "design matrix is rank deficient: column '{}' is redundant ({earlier})",
                columns[j]
            )));
        }
    }
    unreachable!("rank deficiency must show up in some prefix")
}

/// Design matrix from the named columns of a CSV file (no response).
pub fn load_design(path: &Path, covariates: &[String], intercept: bool) -> CliResult<(DMatrix<f64>, Vec<String>)> {
    let mut reader = open(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let idx = covariates
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| CliError::Data(format!("{}: column '{c}' not found", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = if intercept { vec![1.0] } else { Vec::new() };
        for &j in &idx {
            row.push(parse_cell(path, &record, line, j, &headers[j])?);
        }
        rows.push(row);
    }
    let mut columns = if intercept { vec![INTERCEPT.to_owned()] } else { Vec::new() };
    columns.extend(covariates.iter().cloned());
    let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][j]);
    check_rank(&x, &columns)?;
    Ok((x, columns))
}
