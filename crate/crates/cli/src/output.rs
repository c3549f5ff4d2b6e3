use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use shapley_core::io::{fmt_f64, to_json, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A CSV table; cells are already formatted.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().context("flushing csv")?)
    }
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

/// Where results go: a directory given by --out, or stdout.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    fn file(&self, name: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|d| d.join(name))
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
        let mut s = to_json(value)?;
        s.push('\n');
        Ok(s.into_bytes())
    }

    /// Emit `value` as <name>.json or `table` as <name>.csv per --format.
    pub fn emit<T: Serialize>(&self, name: &str, value: &T, table: Option<&Table>) -> Result<()> {
        let bytes = match (self.format, table) {
            (Format::Json, _) => Self::json_bytes(value)?,
            (Format::Csv, Some(t)) => t.to_bytes()?,
            (Format::Csv, None) => bail!("{name} has no tabular form; use --format json"),
        };
        let ext = if self.format == Format::Json { "json" } else { "csv" };
        match self.file(&format!("{name}.{ext}")) {
            Some(p) => self.write(&p, &bytes),
            None => {
                std::io::stdout().write_all(&bytes)?;
                Ok(())
            }
        }
    }

    /// Emit both forms when writing to a directory; stdout gets --format.
    pub fn emit_both<T: Serialize>(&self, name: &str, value: &T, table: &Table) -> Result<()> {
        if self.out.is_none() {
            return self.emit(name, value, Some(table));
        }
        self.write(&self.file(&format!("{name}.json")).expect("out set"), &Self::json_bytes(value)?)?;
        self.write(&self.file(&format!("{name}.csv")).expect("out set"), &table.to_bytes()?)
    }

    /// Per-trial JSON file under <out>/<dir>/, skipped without --out.
    pub fn trial<T: Serialize>(&self, dir: &str, name: &str, value: &T) -> Result<()> {
        match &self.out {
            Some(d) => self.write(&d.join(dir).join(format!("{name}.json")), &Self::json_bytes(value)?),
            None => Ok(()),
        }
    }
}
