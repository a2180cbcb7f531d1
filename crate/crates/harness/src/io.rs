//! CSV tables of named numeric columns and JSON documents.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, so every table round-trips bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{input, Result};

/// Named equal-length columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Self {
        self.headers.push(name.to_string());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        match self.column(name) {
            Some(c) => Ok(c),
            None => input(format!("missing column {name:?}; found {:?}", self.headers)),
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        if self.columns.iter().any(|c| c.len() != self.rows()) {
            return input("table columns differ in length");
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.headers)?;
        for i in 0..self.rows() {
            out.write_record(self.columns.iter().map(|c| format_f64(c[i])))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                match field.trim().parse::<f64>() {
                    Ok(v) => columns[j].push(v),
                    Err(_) => return input(format!("row {}: {field:?} is not a number", line + 1)),
                }
            }
        }
        Ok(Self { headers, columns })
    }
}

/// Shortest round-trip decimal representation.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes to `path`, or to standard output when it is `None`.
pub fn with_output<F: FnOnce(&mut dyn Write) -> Result<()>>(path: Option<&Path>, f: F) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_table(path: Option<&Path>, table: &Table) -> Result<()> {
    with_output(path, |w| table.write(w))
}

pub fn read_table(path: &Path) -> Result<Table> {
    Table::read(File::open(path)?)
}

pub fn write_json<S: Serialize>(path: Option<&Path>, value: &S) -> Result<()> {
    with_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Sparse matrices as `matrix,row,col,value` records.
pub fn write_triplets<W: Write>(w: W, matrices: &[(&str, Vec<(usize, usize, f64)>)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["matrix", "row", "col", "value"])?;
    for (name, entries) in matrices {
        for &(i, j, v) in entries {
            out.write_record([name.to_string(), i.to_string(), j.to_string(), format_f64(v)])?;
        }
    }
    out.flush()?;
    Ok(())
}
