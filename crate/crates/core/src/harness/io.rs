//! Plot-ready CSV sidecars.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::linalg::{CMat, C64};
use crate::stft::{STFTField, SampledDistribution};

/// Complex entry as `re+imj`, readable by Python's `complex()`.
pub fn complex_cell(z: C64) -> String {
    if z.im.is_sign_negative() {
        format!("{}{}j", z.re, z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

fn write(path: &Path, body: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, body)?;
    Ok(())
}

/// Columns `x[,x2],re,im`.
pub fn field_csv(u: &SampledDistribution) -> String {
    let grid = u.grid();
    let xs = grid.coords();
    let np = grid.points;
    let mut out = String::new();
    if u.n() == 1 {
        out.push_str("x,re,im\n");
        for (x, v) in xs.iter().zip(u.values()) {
            let _ = writeln!(out, "{x},{},{}", v.re, v.im);
        }
    } else {
        out.push_str("x1,x2,re,im\n");
        for (idx, v) in u.values().iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", xs[idx / np], xs[idx % np], v.re, v.im);
        }
    }
    out
}

pub fn write_field(path: &Path, u: &SampledDistribution) -> Result<()> {
    write(path, field_csv(u))
}

/// `|V|` matrix: header row of frequencies, then one row per x position.
pub fn stft_magnitude_csv(field: &STFTField, x_every: usize, f_every: usize) -> String {
    let xs = field.x_positions();
    let fs = field.freqs();
    let mut out = String::from("x\\xi");
    for f in fs.iter().step_by(f_every.max(1)) {
        let _ = write!(out, ",{f}");
    }
    out.push('\n');
    for (x, row) in xs
        .iter()
        .step_by(x_every.max(1))
        .zip(field.magnitude_rows(x_every, f_every))
    {
        let _ = write!(out, "{x}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_stft_magnitude(path: &Path, field: &STFTField, x_every: usize, f_every: usize) -> Result<()> {
    write(path, stft_magnitude_csv(field, x_every, f_every))
}

pub fn complex_matrix_csv(m: &CMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| complex_cell(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_complex_matrix(path: &Path, m: &CMat) -> Result<()> {
    write(path, complex_matrix_csv(m))
}

/// Rows `k_1[,k_2],re,im` of Hermite coefficients.
pub fn hermite_coefficients_csv(indices: &[Vec<u16>], coeffs: &[C64]) -> String {
    let n = indices.first().map_or(1, Vec::len);
    let mut out = (1..=n).map(|j| format!("k{j}")).collect::<Vec<_>>().join(",");
    out.push_str(",re,im\n");
    for (k, c) in indices.iter().zip(coeffs) {
        let ks: Vec<String> = k.iter().map(u16::to_string).collect();
        let _ = writeln!(out, "{},{},{}", ks.join(","), c.re, c.im);
    }
    out
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write(path, body)
}
