//! Matrix Market reading and writing.
//!
//! Dense matrices are written in `array` format with 17 significant digits, which
//! reproduces every `f64` exactly on reading. Both `array` and `coordinate` files
//! with `general`, `symmetric` or `skew-symmetric` storage are accepted.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Parses Matrix Market text; `path` is only used in error messages.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?
        .to_ascii_lowercase();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, "missing %%MatrixMarket matrix header"));
    }
    let dense = match tokens[2] {
        "array" => true,
        "coordinate" => false,
        f => return Err(parse_err(path, format!("unknown format '{f}'"))),
    };
    if !matches!(tokens[3], "real" | "integer" | "double") {
        return Err(parse_err(path, format!("unsupported field '{}'", tokens[3])));
    }
    let sym = match tokens[4] {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        s => return Err(parse_err(path, format!("unsupported symmetry '{s}'"))),
    };

    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body
        .next()
        .ok_or_else(|| parse_err(path, "missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, format!("bad size line '{size_line}': {e}")))?;
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| parse_err(path, format!("bad number '{s}': {e}")))
    };

    if dense {
        let [rows, cols] = sizes[..] else {
            return Err(parse_err(path, "array size line needs two entries"));
        };
        if sym != Symmetry::General && rows != cols {
            return Err(parse_err(path, "symmetric storage needs a square matrix"));
        }
        let values: Vec<f64> = body
            .flat_map(str::split_whitespace)
            .map(num)
            .collect::<Result<_>>()?;
        let mut m = Matrix::zeros(rows, cols);
        let mut it = values.into_iter();
        // column-major, lower triangle only for symmetric storage
        for j in 0..cols {
            let start = match sym {
                Symmetry::General => 0,
                Symmetry::Symmetric => j,
                Symmetry::Skew => j + 1,
            };
            for i in start..rows {
                let v = it
                    .next()
                    .ok_or_else(|| parse_err(path, "fewer entries than the size line declares"))?;
                m[(i, j)] = v;
                match sym {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j, i)] = v,
                    Symmetry::Skew => m[(j, i)] = -v,
                }
            }
        }
        if it.next().is_some() {
            return Err(parse_err(path, "more entries than the size line declares"));
        }
        Ok(m)
    } else {
        let [rows, cols, nnz] = sizes[..] else {
            return Err(parse_err(path, "coordinate size line needs three entries"));
        };
        let mut m = Matrix::zeros(rows, cols);
        let mut count = 0;
        for line in body {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(path, format!("bad coordinate entry '{line}'")));
            }
            let idx = |s: &str, max: usize| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(k) if (1..=max).contains(&k) => Ok(k - 1),
                    _ => Err(parse_err(path, format!("index '{s}' out of range"))),
                }
            };
            let (i, j, v) = (idx(f[0], rows)?, idx(f[1], cols)?, num(f[2])?);
            m[(i, j)] += v;
            if i != j {
                match sym {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j, i)] += v,
                    Symmetry::Skew => m[(j, i)] -= v,
                }
            }
            count += 1;
        }
        if count != nnz {
            return Err(parse_err(
                path,
                format!("declared {nnz} entries, found {count}"),
            ));
        }
        Ok(m)
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix_market(&text, path)
}

/// Dense `array` text of `m`.
pub fn format_matrix_market(m: &Matrix) -> String {
    let mut s = String::with_capacity(32 * m.len() + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    s.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s.push_str(&format!("{:.16e}\n", m[(i, j)]));
        }
    }
    s
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix_market(m)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
