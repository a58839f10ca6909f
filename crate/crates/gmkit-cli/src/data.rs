//! CSV data files: a header row of column names, then one comma-separated record per row.

use std::path::Path;
use std::str::FromStr;

use gmkit::learning::BinaryDataset;

use crate::error::{CliError, Result};

/// Column names and parsed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<T>>,
}

impl<T: Copy> Table<T> {
    pub fn column(&self, name: &str) -> Option<Vec<T>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_table<T: FromStr>(path: &Path) -> Result<Table<T>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    parse_table(file).map_err(|e| e.context(path.display()))
}

pub fn parse_table<T: FromStr>(reader: impl std::io::Read) -> Result<Table<T>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).quoting(false).from_reader(reader);
    let bad = |e: csv::Error| CliError::Validation(e.to_string());
    let columns: Vec<String> = csv.headers().map_err(bad)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(bad)?;
        let row = record
            .iter()
            .zip(&columns)
            .map(|(field, col)| {
                field
                    .parse::<T>()
                    .map_err(|_| CliError::Validation(format!("row {}, column {col}: cannot parse {field:?}", i + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

pub fn read_binary(path: &Path) -> Result<BinaryDataset> {
    let t: Table<i64> = read_table(path)?;
    Ok(BinaryDataset::new(t.columns, t.rows).map_err(|e| CliError::from(e).context(path.display()))?)
}
