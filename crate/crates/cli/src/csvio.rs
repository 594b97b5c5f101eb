//! Comma-separated input and output with a required header row.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use flexts_core::SeriesTable;
use ndarray::Array2;

use crate::error::{CliError, CliResult};

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_cell(raw: &str, line: u64, column: &str) -> CliResult<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::data(format!("line {line}: column '{column}': cannot parse '{raw}' as a number")))?;
    if !v.is_finite() {
        return Err(CliError::data(format!("line {line}: column '{column}': non-finite value '{raw}'")));
    }
    Ok(v)
}

/// Reads `target` and the listed exogenous columns from a CSV file.
pub fn read_table(path: &Path, target: &str, exog: &[String]) -> CliResult<SeriesTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::data(format!("{}: header: {e}", path.display())))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data(format!("{}: no column named '{name}'", path.display())))
    };
    let target_col = find(target)?;
    let exog_cols: Vec<usize> = exog.iter().map(|c| find(c)).collect::<CliResult<_>>()?;

    let mut response = Vec::new();
    let mut exog_values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |c: usize, name: &str| parse_cell(record.get(c).unwrap_or(""), line, name);
        response.push(cell(target_col, target)?);
        for (&c, name) in exog_cols.iter().zip(exog) {
            exog_values.push(cell(c, name)?);
        }
    }
    if response.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    let n = response.len();
    let x = Array2::from_shape_vec((n, exog.len()), exog_values).expect("row-major exogenous block");
    Ok(SeriesTable::new(response, x, exog.to_vec())?)
}

/// A writer on `path`, or stdout for `None` or `-`.
pub fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).map_err(|e| CliError::data(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        _ => Ok(Box::new(io::BufWriter::new(io::stdout()))),
    }
}

pub fn write_csv(path: Option<&Path>, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().from_writer(open_output(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
