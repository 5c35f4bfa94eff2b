//! CSV tables with a `#`-prefixed metadata header.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so reading
//! a table back reproduces every value bit for bit (including NaN and ±inf).

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Bitwise equality, so NaN entries compare equal to themselves.
    pub fn same_bits(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

fn format_value(v: f64) -> String {
    format!("{v:?}")
}

fn write_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `# key: value` lines, then the header row and data.
pub fn write_csv(path: &Path, meta: &[(String, String)], table: &Table) -> Result<()> {
    let mut file = File::create(path).map_err(write_error(path))?;
    for (key, value) in meta {
        writeln!(file, "# {key}: {value}").map_err(write_error(path))?;
    }
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(&table.columns)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(|v| format_value(*v)))?;
    }
    writer.flush().map_err(write_error(path))?;
    Ok(())
}

fn parse_error(path: &Path, message: String) -> CliError {
    CliError::Csv(csv::Error::from(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("{}: {message}", path.display()),
    )))
}

/// Read a table written by [`write_csv`], returning its metadata and data.
pub fn read_csv(path: &Path) -> Result<(Vec<(String, String)>, Table)> {
    let file = File::open(path).map_err(write_error(path))?;
    let mut meta = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(write_error(path))?;
        let Some(rest) = line.strip_prefix("# ") else { break };
        if let Some((k, v)) = rest.split_once(": ") {
            meta.push((k.to_string(), v.to_string()));
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut table = Table::new(columns);
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_error(path, format!("{s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != table.columns.len() {
            return Err(parse_error(path, "ragged row".into()));
        }
        table.rows.push(row);
    }
    Ok((meta, table))
}

/// gnuplot script drawing every column against the first.
pub fn plot_script(csv_name: &str, table: &Table) -> String {
    let n = table.columns.len();
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{}'\nplot for [i=2:{n}] '{csv_name}' using 1:i with lines\npause mouse close\n",
        table.columns[0]
    )
}
