//! Dense CSV text format for matrices and vectors: one row per line,
//! comma-separated decimal numbers. Blank lines and `#` comments are skipped.

use std::fmt::Write as _;

use crate::chains::{CostFunction, StochasticMatrix};
use crate::error::{Error, Result};

/// Rows of numbers with their 1-based source line numbers.
pub fn parse_rows(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("`{field}` is not a finite decimal number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

/// Square row-stochastic matrix; validation failures carry the offending line.
pub fn parse_matrix(text: &str) -> Result<StochasticMatrix> {
    let rows = parse_rows(text)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse { line: 0, message: "no matrix rows".into() });
    }
    for (line, row) in &rows {
        if row.len() != n {
            return Err(Error::Parse {
                line: *line,
                message: format!("row has {} entries, expected {n}", row.len()),
            });
        }
        if let Some(v) = row.iter().find(|&&v| v < 0.0) {
            return Err(Error::Parse {
                line: *line,
                message: format!("negative entry {v}"),
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parse {
                line: *line,
                message: format!("row sums to {sum}, expected 1"),
            });
        }
    }
    StochasticMatrix::new(rows.into_iter().map(|(_, r)| r).collect())
}

/// Vector given either as one comma-separated line or one value per line.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let rows = parse_rows(text)?;
    match rows.as_slice() {
        [] => Err(Error::Parse { line: 0, message: "no values".into() }),
        [(_, row)] => Ok(row.clone()),
        _ => rows
            .into_iter()
            .map(|(line, row)| match row.as_slice() {
                [v] => Ok(*v),
                _ => Err(Error::Parse {
                    line,
                    message: format!("expected one value per line, found {}", row.len()),
                }),
            })
            .collect(),
    }
}

pub fn parse_cost(text: &str) -> Result<CostFunction> {
    let values = parse_vector(text)?;
    CostFunction::new(values).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
}

/// 17 significant digits, plain decimal notation unless the magnitude is
/// extreme. Re-parses to the identical `f64`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs();
    if !(1e-6..1e16).contains(&mag) {
        return format!("{x:.16e}");
    }
    let exponent = mag.log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_rows<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn write_matrix(p: &StochasticMatrix) -> String {
    write_rows(p.rows())
}

/// One value per line.
pub fn write_vector(v: &[f64]) -> String {
    write_rows(v.chunks(1))
}
