//! Versioned line-oriented text formats.
//!
//! Every file starts with a magic line. Numbers are written with 17
//! significant digits so a write/read round trip is exact and the bytes of
//! a file depend only on its contents.

mod checkpoint;
mod dataset;
mod report;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dataset::{
    load_dataset, read_attributes, read_dataset, read_partition, write_attributes, write_dataset, write_partition,
    DatasetFile, PartitionFile, ATTRIBUTES_MAGIC, DATASET_MAGIC, PARTITION_MAGIC,
};
pub use report::{log_line, prediction_dump, report_json, GateDoc, LogRecord, ReportDoc};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gzsl_core::Matrix;

use crate::error::{GzslError, Result};

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn push_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

pub(crate) fn push_matrix(out: &mut String, m: &Matrix) {
    for i in 0..m.rows() {
        push_row(out, m.row(i));
    }
}

pub(crate) fn push_list<T: std::fmt::Display>(out: &mut String, key: &str, items: &[T]) {
    out.push_str(key);
    for it in items {
        let _ = write!(out, " {it}");
    }
    out.push('\n');
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GzslError::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| GzslError::io(path, e))
}

/// Cursor over the lines of a file with 1-based line numbers for errors.
pub(crate) struct LineReader<'a> {
    path: PathBuf,
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> LineReader<'a> {
    pub(crate) fn new(path: &Path, text: &'a str) -> Self {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        LineReader { path: path.to_path_buf(), lines, next: 0 }
    }

    /// Line number of the most recently returned line.
    pub(crate) fn line_no(&self) -> usize {
        self.next
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> GzslError {
        GzslError::malformed(&self.path, self.next.max(1), message)
    }

    pub(crate) fn next_line(&mut self) -> Result<&'a str> {
        let line = *self
            .lines
            .get(self.next)
            .ok_or_else(|| GzslError::malformed(&self.path, self.next + 1, "unexpected end of file"))?;
        self.next += 1;
        Ok(line.strip_suffix('\r').unwrap_or(line))
    }

    pub(crate) fn at_end(&self) -> bool {
        self.next >= self.lines.len()
    }

    pub(crate) fn expect_magic(&mut self, magic: &str) -> Result<()> {
        let line = self.next_line()?;
        if line.trim() != magic {
            return Err(self.error(format!("expected header {magic:?}, found {line:?}")));
        }
        Ok(())
    }

    /// Reads a line starting with `key`; returns the remaining fields.
    pub(crate) fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some(k) if k == key => Ok(fields.collect()),
            other => Err(self.error(format!("expected {key:?}, found {:?}", other.unwrap_or("")))),
        }
    }

    pub(crate) fn parse<T: FromStr>(&self, field: &str, what: &str) -> Result<T> {
        field.parse().map_err(|_| self.error(format!("invalid {what}: {field:?}")))
    }

    pub(crate) fn keyed_one<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let f = self.keyed(key)?;
        if f.len() != 1 {
            return Err(self.error(format!("{key} takes exactly one value")));
        }
        self.parse(f[0], key)
    }

    pub(crate) fn keyed_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let f = self.keyed(key)?;
        f.iter().map(|x| self.parse(x, key)).collect()
    }

    /// A row of exactly `n` finite floats.
    pub(crate) fn row(&mut self, n: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|x| self.parse::<f64>(x, "number"))
            .collect::<Result<_>>()?;
        if values.len() != n {
            return Err(self.error(format!("expected {n} values, found {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(self.error(format!("non-finite value {v}")));
        }
        Ok(values)
    }

    pub(crate) fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols)?);
        }
        Matrix::from_vec(rows, cols, data).map_err(|e| self.error(e.to_string()))
    }
}
