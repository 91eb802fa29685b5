//! CSV and JSON writers with fixed column order.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::args::Format;

/// A record with a fixed CSV layout.
pub trait Row: Serialize {
    fn header(&self) -> Vec<&'static str>;
    fn record(&self) -> Vec<String>;
}

/// Shortest round-trip decimal with '.' separator; empty for non-finite
/// values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

pub fn list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

/// Non-finite floats become JSON `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_rows<R: Row>(rows: &[R], format: Format, out: Option<&Path>, empty_header: &[&'static str]) -> io::Result<()> {
    let mut w = sink(out)?;
    match format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            let header = rows.first().map_or_else(|| empty_header.to_vec(), Row::header);
            csv.write_record(header)?;
            for r in rows {
                csv.write_record(r.record())?;
            }
            csv.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    w.flush()
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> io::Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}
