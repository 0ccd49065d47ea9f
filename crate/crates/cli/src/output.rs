//! Artifact writing: atomic file replacement and number formatting.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

/// 17 significant digits, enough to round-trip an f64.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Nonzero entries as `row,col,value`.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::from("row,col,value\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                s.push_str(&format!("{i},{j},{}\n", num(v)));
            }
        }
    }
    s
}

pub fn vector_csv(v: &DVector<f64>) -> String {
    let mut s = String::from("row,col,value\n");
    for (i, x) in v.iter().enumerate() {
        if *x != 0.0 {
            s.push_str(&format!("{i},0,{}\n", num(*x)));
        }
    }
    s
}
