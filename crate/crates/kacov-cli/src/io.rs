//! File ingestion and output helpers for the `kacov` binary.

use std::fs;
use std::path::Path;

use crate::CliError;

/// Read a comma-separated numeric table. A header row is detected by
/// attempting to parse every field of the first non-empty line as `f64`;
/// if any field fails, the line is treated as a header and skipped. All
/// data rows must have the same number of fields.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {}", path.display(), e)))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first_content_line = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if first_content_line => {
                // Header row: skip it.
                first_content_line = false;
                continue;
            }
            Err(_) => {
                return Err(CliError::Input(format!(
                    "{}: line {} has a non-numeric field",
                    path.display(),
                    lineno + 1
                )));
            }
        };
        first_content_line = false;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Input(format!(
                    "{}: line {} has {} fields, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    w
                )));
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Parse a square shape spec of the form `dxd` (for example `3x3`).
pub fn parse_shape(s: &str) -> Result<usize, CliError> {
    let err = || CliError::Input(format!("invalid shape '{}': expected the form dxd, e.g. 3x3", s));
    let (a, b) = s.split_once('x').ok_or_else(err)?;
    let rows: usize = a.trim().parse().map_err(|_| err())?;
    let cols: usize = b.trim().parse().map_err(|_| err())?;
    if rows == 0 || cols == 0 {
        return Err(err());
    }
    if rows != cols {
        return Err(CliError::Input(format!(
            "invalid shape '{}': samples must be square matrices",
            s
        )));
    }
    Ok(rows)
}

/// Format a square matrix accessor as CSV with 17 significant digits, which
/// round-trips every f64 exactly.
pub fn format_square<F: Fn(usize, usize) -> f64>(n: usize, at: F) -> String {
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", at(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Write to the given path, or to stdout when no path is set.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| CliError::Input(format!("cannot write {}: {}", p.display(), e))),
        None => {
            print!("{}", content);
            Ok(())
        }
    }
}
