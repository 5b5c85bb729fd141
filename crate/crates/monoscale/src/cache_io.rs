//! CSV persistence of the homogenized-map cache.
//!
//! Columns: `x_key`, the ξ components, the `b` components. Rows end in LF.

use std::path::Path;

use monoscale_core::{CacheRow, XKey};

use crate::report::{fmt_num, write_atomic};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn header(dim: usize) -> String {
    let mut cols = vec!["x_key".to_string()];
    cols.extend((0..dim).map(|i| format!("xi_{i}")));
    cols.extend((0..dim).map(|i| format!("b_{i}")));
    cols.join(",")
}

pub fn to_csv(rows: &[CacheRow], dim: usize) -> String {
    let mut s = header(dim);
    s.push('\n');
    for r in rows {
        s.push_str(&r.key.to_string());
        for v in r.xi.iter().take(dim).chain(r.b.iter().take(dim)) {
            s.push(',');
            s.push_str(&fmt_num(*v));
        }
        s.push('\n');
    }
    s
}

/// Parses a whole file; any malformed line rejects the file.
pub fn from_csv(text: &str, dim: usize) -> Result<Vec<CacheRow>, CacheError> {
    let err = |line: usize, message: String| CacheError::Parse { line, message };
    if text.is_empty() {
        return Err(err(1, "missing header".into()));
    }
    if !text.ends_with('\n') {
        let n = text.lines().count();
        return Err(err(n, "truncated line (no trailing newline)".into()));
    }
    let mut lines = text.split('\n');
    let head = lines.next().unwrap_or_default();
    if head != header(dim) {
        return Err(err(1, format!("expected header {:?}", header(dim))));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + 2 * dim {
            return Err(err(
                n,
                format!("expected {} fields, got {}", 1 + 2 * dim, fields.len()),
            ));
        }
        let key: XKey = fields[0].parse().map_err(|m| err(n, m))?;
        let mut nums = [0.0; 4];
        for (k, f) in fields[1..].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| err(n, format!("invalid number {f:?}")))?;
            if !v.is_finite() {
                return Err(err(n, format!("non-finite number {f:?}")));
            }
            nums[k] = v;
        }
        let (mut xi, mut b) = ([0.0; 2], [0.0; 2]);
        xi[..dim].copy_from_slice(&nums[..dim]);
        b[..dim].copy_from_slice(&nums[dim..2 * dim]);
        rows.push(CacheRow { key, xi, b });
    }
    Ok(rows)
}

pub fn write_cache(path: &Path, rows: &[CacheRow], dim: usize) -> Result<(), CacheError> {
    write_atomic(path, to_csv(rows, dim).as_bytes())?;
    Ok(())
}

pub fn read_cache(path: &Path, dim: usize) -> Result<Vec<CacheRow>, CacheError> {
    from_csv(&std::fs::read_to_string(path)?, dim)
}
