//! File formats shared by the CLI and the experiment drivers.
//!
//! Matrix files are plain text: a header line `# rows=<r> cols=<c>` followed
//! by `r` lines of `c` comma-separated floats. Floats are written with the
//! shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Writes `contents` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Shortest round-trip formatting for a float.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# rows={} cols={}", m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(m.get(i, j)));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, path: &Path) -> Result<Matrix> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty file".into()))?;
    let (rows, cols) = parse_header(header).ok_or_else(|| {
        parse_err(format!(
            "expected '# rows=<r> cols=<c>' header, found {header:?}"
        ))
    })?;

    let mut entries = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines.enumerate() {
        if seen == rows {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_err(format!("more than {rows} data rows")));
        }
        let before = entries.len();
        if cols > 0 {
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("line {}: bad number {field:?}", lineno + 2)))?;
                entries.push(v);
            }
        }
        if entries.len() - before != cols {
            return Err(parse_err(format!(
                "line {}: expected {cols} values, found {}",
                lineno + 2,
                entries.len() - before
            )));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(format!(
            "expected {rows} data rows, found {seen}"
        )));
    }
    Matrix::from_row_major(rows, cols, entries).map_err(|e| parse_err(e.to_string()))
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.trim().strip_prefix('#')?.trim();
    let mut parts = rest.split_whitespace();
    let rows = parts.next()?.strip_prefix("rows=")?.parse().ok()?;
    let cols = parts.next()?.strip_prefix("cols=")?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((rows, cols))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_csv(&text, path)
}

/// One label per line.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: bad label {l:?}", i + 1),
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
