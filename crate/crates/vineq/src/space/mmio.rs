//! Matrix Market IO for the dense payloads of problem manifests.
//!
//! The writer emits `array` form (dense, column-major) with shortest
//! round-trip float formatting, so write-then-read reproduces every `f64`
//! bit for bit.  The reader additionally accepts `coordinate` form (general
//! or symmetric), which makes hand-written and third-party files usable.

use nalgebra::{DMatrix, DVector};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Errors from Matrix Market parsing and file handling.
#[derive(Debug, Error)]
pub enum MmIoError {
    /// Underlying filesystem failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// The file is not a Matrix Market file this reader understands.
    #[error("matrix market parse error: {0}")]
    Parse(String),
}

fn parse_err(msg: impl Into<String>) -> MmIoError {
    MmIoError::Parse(msg.into())
}

/// Writes a dense matrix in `array real general` form.
pub fn write_matrix(path: &Path, a: &DMatrix<f64>) -> Result<(), MmIoError> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", a.nrows(), a.ncols()));
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out.push_str(&format!("{:e}\n", a[(i, j)]));
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes a dense matrix in `coordinate real general` form (nonzeros only).
pub fn write_matrix_coordinate(path: &Path, a: &DMatrix<f64>) -> Result<(), MmIoError> {
    let mut entries = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, a[(i, j)]));
            }
        }
    }
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), entries.len()));
    for (i, j, v) in entries {
        out.push_str(&format!("{i} {j} {v:e}\n"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes a vector as an `n x 1` array-form matrix.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<(), MmIoError> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Reads a matrix in array or coordinate form.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, MmIoError> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text)
}

/// Reads a vector; accepts `n x 1` or `1 x n` matrices.
pub fn read_vector(path: &Path) -> Result<DVector<f64>, MmIoError> {
    let a = read_matrix(path)?;
    if a.ncols() == 1 {
        Ok(DVector::from_column_slice(a.column(0).as_slice()))
    } else if a.nrows() == 1 {
        Ok(DVector::from_iterator(a.ncols(), a.row(0).iter().copied()))
    } else {
        Err(parse_err(format!(
            "expected a vector, found a {} x {} matrix",
            a.nrows(),
            a.ncols()
        )))
    }
}

fn parse_matrix(text: &str) -> Result<DMatrix<f64>, MmIoError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty file"))?;
    let head: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if head.len() < 4 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
        return Err(parse_err("missing %%MatrixMarket matrix header"));
    }
    let layout = head[2].as_str();
    let field = head[3].as_str();
    if field != "real" && field != "integer" {
        return Err(parse_err(format!("unsupported field type '{field}'")));
    }
    let symmetry = head.get(4).map(String::as_str).unwrap_or("general");
    if symmetry != "general" && symmetry != "symmetric" {
        return Err(parse_err(format!("unsupported symmetry '{symmetry}'")));
    }

    let mut body = lines.filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let size_line = body.next().ok_or_else(|| parse_err("missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(format!("bad size token '{t}'"))))
        .collect::<Result<_, _>>()?;

    match layout {
        "array" => {
            if sizes.len() != 2 {
                return Err(parse_err("array size line must be 'rows cols'"));
            }
            let (m, n) = (sizes[0], sizes[1]);
            let expected = if symmetry == "symmetric" { n * (n + 1) / 2 } else { m * n };
            let mut vals = Vec::with_capacity(expected);
            for line in body {
                for tok in line.split_whitespace() {
                    vals.push(
                        tok.parse::<f64>()
                            .map_err(|_| parse_err(format!("bad value token '{tok}'")))?,
                    );
                }
            }
            if vals.len() != expected {
                return Err(parse_err(format!(
                    "expected {expected} entries, found {}",
                    vals.len()
                )));
            }
            let mut a = DMatrix::zeros(m, n);
            if symmetry == "symmetric" {
                if m != n {
                    return Err(parse_err("symmetric matrices must be square"));
                }
                // column-major lower triangle
                let mut k = 0;
                for j in 0..n {
                    for i in j..m {
                        a[(i, j)] = vals[k];
                        a[(j, i)] = vals[k];
                        k += 1;
                    }
                }
            } else {
                let mut k = 0;
                for j in 0..n {
                    for i in 0..m {
                        a[(i, j)] = vals[k];
                        k += 1;
                    }
                }
            }
            Ok(a)
        }
        "coordinate" => {
            if sizes.len() != 3 {
                return Err(parse_err("coordinate size line must be 'rows cols nnz'"));
            }
            let (m, n, nnz) = (sizes[0], sizes[1], sizes[2]);
            let mut a = DMatrix::zeros(m, n);
            let mut count = 0;
            for line in body {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(format!("bad coordinate line '{line}'")));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|_| parse_err(format!("bad row index '{}'", toks[0])))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|_| parse_err(format!("bad col index '{}'", toks[1])))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(format!("bad value '{}'", toks[2])))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(parse_err(format!("index ({i}, {j}) out of bounds")));
                }
                a[(i - 1, j - 1)] = v;
                if symmetry == "symmetric" {
                    a[(j - 1, i - 1)] = v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(parse_err(format!("expected {nnz} entries, found {count}")));
            }
            Ok(a)
        }
        other => Err(parse_err(format!("unsupported layout '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn array_round_trip_is_bit_exact() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        // include awkward magnitudes on purpose
        let a = DMatrix::from_fn(7, 4, |i, j| {
            (r.random::<f64>() - 0.5) * 10f64.powi((i as i32 % 9) - 4) + j as f64
        });
        write_matrix(&path, &a).unwrap();
        let b = read_matrix(&path).unwrap();
        assert_eq!(a.shape(), b.shape());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert_eq!(a[(i, j)].to_bits(), b[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mtx");
        let v = DVector::from_row_slice(&[1.5, -2.25, 3e-8, 0.0]);
        write_vector(&path, &v).unwrap();
        let w = read_vector(&path).unwrap();
        assert_eq!(v.len(), w.len());
        for i in 0..v.len() {
            assert_eq!(v[i].to_bits(), w[i].to_bits());
        }
    }

    #[test]
    fn coordinate_form_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mtx");
        let mut a = DMatrix::zeros(3, 5);
        a[(0, 0)] = 1.0;
        a[(2, 4)] = -2.5;
        a[(1, 2)] = 1e-3;
        write_matrix_coordinate(&path, &a).unwrap();
        let b = read_matrix(&path).unwrap();
        assert_eq!((b - &a).norm(), 0.0);
    }

    #[test]
    fn symmetric_coordinate_mirrors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mtx");
        fs::write(
            &path,
            "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n1 1 2e0\n3 1 5e-1\n",
        )
        .unwrap();
        let a = read_matrix(&path).unwrap();
        assert_eq!(a[(0, 0)], 2.0);
        assert_eq!(a[(2, 0)], 0.5);
        assert_eq!(a[(0, 2)], 0.5);
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mtx");
        fs::write(&path, "not a matrix\n1 1\n0\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(MmIoError::Parse(_))));
        fs::write(&path, "%%MatrixMarket matrix array real general\n2 2\n1.0\n2.0\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(MmIoError::Parse(_))));
    }
}
