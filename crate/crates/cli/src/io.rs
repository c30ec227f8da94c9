use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use knockagg::Matrix64;

use crate::CliError;

/// Parses a numeric matrix. Fields are separated by commas and/or
/// whitespace; blank lines and lines starting with `#` are skipped.
pub fn parse_matrix(text: &str, source: &str) -> Result<Matrix64, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .enumerate()
        {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Validation(format!(
                    "{source}: row {}, column {}: cannot parse {field:?} as a number",
                    lineno + 1,
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Validation(format!(
                    "{source}: row {}, column {}: value {field} is not finite",
                    lineno + 1,
                    col + 1
                )));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Validation(format!(
                    "{source}: row {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{source}: no numeric rows")));
    }
    Ok(Matrix64::from_rows(&rows)?)
}

pub fn read_matrix(path: &Path) -> Result<Matrix64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, &path.display().to_string())
}

/// Reads a vector stored as one column or one row.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let m = read_matrix(path)?;
    if m.cols() == 1 {
        Ok(m.column(0))
    } else if m.rows() == 1 {
        Ok(m.row(0).to_vec())
    } else {
        Err(CliError::Validation(format!(
            "{}: expected a single row or column, got {}x{}",
            path.display(),
            m.rows(),
            m.cols()
        )))
    }
}

/// Comma-separated rows. Values print in shortest round-trip form, so
/// reading the file back gives the same bits.
pub fn format_matrix(m: &Matrix64) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}
