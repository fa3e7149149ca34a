//! Report and series files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;

/// Everything a run produces except wall-clock data. Re-running with the same
/// configuration and seed reproduces it byte for byte.
#[derive(Debug, Serialize)]
pub struct Payload<R: Serialize> {
    pub artifact_version: &'static str,
    pub subcommand: &'static str,
    pub seed: u64,
    pub config: Config,
    pub results: R,
    /// CSV files written next to the report.
    pub files: Vec<&'static str>,
    /// Series kept inside the report when the output format is JSON.
    pub series: Vec<Table>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub runtime_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Serialize)]
pub struct Report<R: Serialize> {
    pub payload: Payload<R>,
    pub timing: Timing,
}

/// A named numeric series written as CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub file: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Text(&'static str),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
        }
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents).map_err(io_err(path))
}

/// Writes `tables` as CSV and the report as `report.json` under `dir`.
pub fn write_outputs<R: Serialize>(
    dir: &Path,
    report: &Report<R>,
    tables: &[Table],
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for t in tables {
        write_file(&dir.join(t.file), t.to_csv().as_bytes())?;
    }
    let path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&path, json.as_bytes())?;
    Ok(path)
}
