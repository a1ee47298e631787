//! Line-oriented CSV parsing shared by series ingestion and prediction
//! import. Blank lines and `#` comment lines are skipped; every rejected row
//! is reported with its 1-based line number.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing or malformed header: expected `{expected}`")]
    Header { expected: String },
    #[error("file contains no data rows")]
    NoRows,
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
}

/// A data row: 1-based line number plus its comma-separated fields.
pub(crate) struct Row<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

/// Reads a whole file; errors carry the path.
pub(crate) fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits text into header-checked data rows.
///
/// The first non-blank, non-comment line must equal `header` (case-insensitive,
/// whitespace-trimmed). Each remaining data row must have exactly as many
/// fields as the header.
pub(crate) fn parse_rows<'a>(text: &'a str, header: &str) -> Result<Vec<Row<'a>>, IngestError> {
    let n_fields = header.split(',').count();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !trimmed.eq_ignore_ascii_case(header) {
                return Err(IngestError::Header {
                    expected: header.to_string(),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != n_fields {
            return Err(IngestError::Row {
                line,
                reason: format!("expected {} comma-separated fields, got {}", n_fields, fields.len()),
            });
        }
        rows.push(Row { line, fields });
    }
    if !saw_header {
        return Err(IngestError::Header {
            expected: header.to_string(),
        });
    }
    if rows.is_empty() {
        return Err(IngestError::NoRows);
    }
    Ok(rows)
}

/// Parses a finite floating-point field.
pub(crate) fn parse_finite(line: usize, name: &str, field: &str) -> Result<f64, IngestError> {
    let value: f64 = field.parse().map_err(|_| IngestError::Row {
        line,
        reason: format!("cannot parse {} `{}` as a number", name, field),
    })?;
    if !value.is_finite() {
        return Err(IngestError::Row {
            line,
            reason: format!("{} `{}` is not finite", name, field),
        });
    }
    Ok(value)
}
