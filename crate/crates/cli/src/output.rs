use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::Context;
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// One CSV cell. Floats carry 17 significant digits.
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) if v.is_finite() => write!(f, "{v:.16e}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Result of a subcommand, rendered as CSV or JSON on demand.
pub struct Output {
    pub table: Option<Table>,
    pub json: serde_json::Value,
}

impl Output {
    pub fn new<S: Serialize>(result: &S, table: Option<Table>) -> anyhow::Result<Self> {
        Ok(Self { table, json: serde_json::to_value(result)? })
    }
}

fn sink(config: &RunConfig) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &config.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit(config: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let mut w = sink(config)?;
    match (config.format, &out.table) {
        (Format::Csv, Some(table)) => {
            writeln!(w, "{}", config.header()?)?;
            writeln!(w, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        _ => {
            let doc = serde_json::json!({ "config": config, "result": out.json });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
