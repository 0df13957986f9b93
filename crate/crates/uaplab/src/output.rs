//! Result documents and CSV tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

/// Floats carry 17 significant digits so a table round-trips exactly.
fn push_cell(out: &mut String, c: Cell) {
    match c {
        Cell::Int(v) => write!(out, "{v}"),
        Cell::Float(v) if v.is_finite() => write!(out, "{v:.16e}"),
        Cell::Float(v) => write!(out, "{v}"),
    }
    .expect("writing to a String cannot fail");
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_cell(&mut out, *c);
            }
            out.push('\n');
        }
        out
    }
}

/// What a command hands back before it is written out.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub outputs: Value,
    pub tables: Vec<Table>,
    /// Extra JSON files, e.g. a serialized network.
    pub artifacts: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultDoc<'a> {
    pub status: &'static str,
    pub command: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub inputs: &'a Value,
    pub outputs: &'a Value,
    pub tables: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_time_ms: u64,
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.into(), source })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.into(), source })
}

pub fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("result documents always serialize");
    bytes.push(b'\n');
    bytes
}

pub fn result_path(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{command}.result.json"))
}
