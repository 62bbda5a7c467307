//! Text formats for matrices and vectors.
//!
//! Native matrix files start with a `d n` header followed by `d` rows of `n`
//! whitespace-separated reals; `.csv` files hold one data point per row and are
//! transposed on load. Everything is written with 17 significant digits so a
//! save/load round trip is lossless.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use polysketch::DataMatrix;

use crate::error::CliError;

/// Loads `X ∈ R^{d×n}`, choosing the format from the extension (`.csv`) or,
/// failing that, from a comma on the first non-blank line.
pub fn load_matrix(path: &Path) -> Result<DataMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"))
        || text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| l.contains(','));
    let values = if is_csv {
        parse_csv(path, &text)?
    } else {
        parse_native(path, &text)?
    };
    DataMatrix::new(values).map_err(|e| CliError::parse(path, 1, e.to_string()))
}

fn parse_real(path: &Path, line: usize, token: &str) -> Result<f64, CliError> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("not a number: {token:?}")))?;
    if !v.is_finite() {
        return Err(CliError::parse(path, line, format!("non-finite value {token:?}")));
    }
    Ok(v)
}

fn parse_native(path: &Path, text: &str) -> Result<DMatrix<f64>, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty file, expected header `d n`"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::parse(path, 1, format!("malformed header {header:?}")))?;
    let [d, n] = dims[..] else {
        return Err(CliError::parse(path, 1, format!("header must be `d n`, got {header:?}")));
    };
    if d == 0 || n == 0 {
        return Err(CliError::parse(path, 1, "dimensions must be positive"));
    }

    let mut rows = Vec::with_capacity(d * n);
    let mut seen = 0;
    let mut last_line = 1;
    for (line, content) in lines {
        last_line = line;
        if content.trim().is_empty() {
            continue;
        }
        if seen == d {
            return Err(CliError::parse(path, line, format!("expected {d} rows, found more")));
        }
        let row = content
            .split_whitespace()
            .map(|t| parse_real(path, line, t))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != n {
            return Err(CliError::parse(
                path,
                line,
                format!("row has {} values, expected {n}", row.len()),
            ));
        }
        rows.extend(row);
        seen += 1;
    }
    if seen < d {
        return Err(CliError::parse(
            path,
            last_line + 1,
            format!("expected {d} rows, found {seen}"),
        ));
    }
    Ok(DMatrix::from_row_slice(d, n, &rows))
}

fn parse_csv(path: &Path, text: &str) -> Result<DMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(index + 1, |p| p.line() as usize);
            CliError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        // A first row with no numeric field is a header.
        if points.is_empty() && index == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let point = record
            .iter()
            .map(|f| parse_real(path, line, f))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = points.first() {
            if point.len() != first.len() {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("row has {} values, expected {}", point.len(), first.len()),
                ));
            }
        }
        points.push(point);
    }
    let Some(d) = points.first().map(Vec::len) else {
        return Err(CliError::parse(path, 1, "no data rows"));
    };
    let n = points.len();
    // Row i of the file is column i of X.
    Ok(DMatrix::from_fn(d, n, |r, c| points[c][r]))
}

fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `values` in the native `d n` format.
pub fn write_matrix<W: Write>(mut out: W, values: &DMatrix<f64>) -> std::io::Result<()> {
    writeln!(out, "{} {}", values.nrows(), values.ncols())?;
    for row in values.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn save_matrix(path: &Path, values: &DMatrix<f64>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, values).map_err(|e| CliError::io(path, e))?;
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// One value per non-blank line (whitespace-separated values are also accepted).
pub fn load_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for token in line.split(|c: char| c.is_whitespace() || c == ',') {
            if !token.is_empty() {
                out.push(parse_real(path, i + 1, token)?);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::parse(path, 1, "no values"));
    }
    Ok(out)
}

pub fn save_vector(path: &Path, values: &[f64]) -> Result<(), CliError> {
    let mut text = String::with_capacity(values.len() * 24);
    for &v in values {
        text.push_str(&format_real(v));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
