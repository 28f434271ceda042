//! CSV emission and atomic file writes.
//!
//! CSV is UTF-8 with LF line endings, a header row, `.` as decimal separator
//! and floats in shortest round-trip form. Files are written to a temporary
//! sibling and renamed into place, so a failed command never leaves a
//! partial file behind.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::qlearn::Checkpoint;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("record has {got} fields, header has {expected}")]
    Arity { got: usize, expected: usize },
    #[error("cannot write '{path}': {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One CSV row.
pub trait CsvRecord {
    fn fields(&self) -> Vec<String>;
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

impl CsvRecord for Checkpoint {
    fn fields(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            format_f64(self.supnorm_error),
            self.all_match().to_string(),
        ]
    }
}

impl CsvRecord for (f64, f64) {
    fn fields(&self) -> Vec<String> {
        vec![format_f64(self.0), format_f64(self.1)]
    }
}

impl CsvRecord for Vec<String> {
    fn fields(&self) -> Vec<String> {
        self.clone()
    }
}

pub const QLEARN_HEADER: [&str; 3] = ["step", "supnorm_error", "greedy_match"];
pub const PG_HEADER: [&str; 3] = ["iter", "J", "grad_norm"];
pub const SWEEP_HEADER: [&str; 2] = ["weight", "divergence"];

/// Renders a header plus records into CSV bytes.
pub fn csv_bytes<R: CsvRecord>(records: &[R], header: &[&str]) -> Result<Vec<u8>, OutputError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header)?;
    for r in records {
        let fields = r.fields();
        if fields.len() != header.len() {
            return Err(OutputError::Arity {
                got: fields.len(),
                expected: header.len(),
            });
        }
        writer.write_record(&fields)?;
    }
    writer.into_inner().map_err(|e| OutputError::Io {
        path: "<buffer>".into(),
        source: e.into_error(),
    })
}

/// Writes `records` under `header` to `out_path`, atomically.
pub fn emit_csv<R: CsvRecord>(
    records: &[R],
    header: &[&str],
    out_path: &Path,
) -> Result<(), OutputError> {
    let bytes = csv_bytes(records, header)?;
    write_atomic(out_path, &bytes)
}

/// Writes to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io_err = |source: io::Error| OutputError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
