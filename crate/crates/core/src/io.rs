//! Plain-text formats: CSV with LF endings and a mandatory header, and the
//! base64 line-per-record corpus file.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use crate::error::{Error, Result};

/// Writes a CSV table. Floats use Rust's shortest round-trip formatting,
/// which always uses `.` as decimal separator.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        if header.is_empty() {
            return Err(Error::Empty("csv header"));
        }
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        if fields.len() != self.columns {
            return Err(Error::Format {
                what: "csv row",
                reason: format!("expected {} fields, got {}", self.columns, fields.len()),
            });
        }
        self.out.write_all(fields.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Formats a float for CSV output.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

/// Parses a CSV with a header into (header, rows). Blank lines are rejected.
pub fn read_csv<R: BufRead>(input: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = input.lines();
    let header: Vec<String> = match lines.next() {
        Some(l) => l?.split(',').map(str::to_string).collect(),
        None => return Err(Error::Empty("csv input")),
    };
    let mut rows = Vec::new();
    for (no, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(Error::Format {
                what: "csv",
                reason: format!("line {}: expected {} fields, got {}", no + 2, header.len(), fields.len()),
            });
        }
        rows.push(fields);
    }
    Ok((header, rows))
}

pub const CORPUS_MAGIC: &str = "#corpus v1";

/// Writes `#corpus v1 k=<k>` followed by one base64 record per line.
pub fn write_corpus<W: Write>(mut out: W, k: usize, records: &[Vec<u8>]) -> Result<()> {
    writeln!(out, "{CORPUS_MAGIC} k={k}")?;
    for r in records {
        writeln!(out, "{}", STANDARD.encode(r))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a corpus file; returns the gram length and the raw records.
pub fn read_corpus<R: BufRead>(input: R) -> Result<(usize, Vec<Vec<u8>>)> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::Empty("corpus file")),
    };
    let bad = |reason: String| Error::Format { what: "corpus", reason };
    let k = header
        .strip_prefix(CORPUS_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("k="))
        .ok_or_else(|| bad(format!("bad header {header:?}")))?
        .parse::<usize>()
        .map_err(|e| bad(format!("bad k in header: {e}")))?;
    if k == 0 {
        return Err(bad("k must be at least 1".into()));
    }
    let mut records = Vec::new();
    for (no, line) in lines.enumerate() {
        let line = line?;
        let rec = STANDARD
            .decode(line.trim_end())
            .map_err(|e| bad(format!("line {}: {e}", no + 2)))?;
        records.push(rec);
    }
    Ok((k, records))
}
