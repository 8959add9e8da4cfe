//! MatrixMarket coordinate reader (`real` or `integer`, `general` or
//! `symmetric`, 1-indexed).

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    /// Zero-based `(row, col, value)`; symmetric input is expanded.
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }
}

pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))?;
    let b: Vec<String> = banner.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if b.len() < 5 || b[0] != "%%matrixmarket" || b[1] != "matrix" || b[2] != "coordinate" {
        return Err(Error::Parse(format!("line 1: expected '%%MatrixMarket matrix coordinate ...', got '{banner}'")));
    }
    if b[3] != "real" && b[3] != "integer" {
        return Err(Error::Parse(format!("line 1: unsupported field '{}'", b[3])));
    }
    let symmetric = match b[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(Error::Parse(format!("line 1: unsupported symmetry '{s}'"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut out = SparseMatrix { nrows: 0, ncols: 0, triplets: vec![] };
    let mut count = 0;
    for (ln0, line) in lines {
        let ln = ln0 + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        let bad = |what: &str| Error::Parse(format!("line {ln}: invalid {what}"));
        match size {
            None => {
                if toks.len() != 3 {
                    return Err(bad("size line"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad("size line"));
                let sz = (p(toks[0])?, p(toks[1])?, p(toks[2])?);
                out.nrows = sz.0;
                out.ncols = sz.1;
                size = Some(sz);
            }
            Some((nr, nc, _)) => {
                if toks.len() != 3 {
                    return Err(bad("entry"));
                }
                count += 1;
                let i: usize = toks[0].parse().map_err(|_| bad("row index"))?;
                let j: usize = toks[1].parse().map_err(|_| bad("column index"))?;
                let v: f64 = toks[2].parse().map_err(|_| bad("value"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(Error::Parse(format!("line {ln}: entry {count} index ({i}, {j}) outside {nr}x{nc}")));
                }
                out.triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    out.triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    if count != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {count}")));
    }
    Ok(out)
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_two_triplets() {
        let m = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n").unwrap();
        assert_eq!(m.triplets.len(), 2);
    }

    #[test]
    fn symmetric_expansion() {
        let m = parse_matrix_market("%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4.0\n2 1 3.0\n").unwrap();
        assert_eq!(m.triplets.len(), 3);
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], 3.0);
        assert_eq!(d[(1, 0)], 3.0);
    }

    #[test]
    fn out_of_bounds_entry_index() {
        let e = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 1.0\n").unwrap_err();
        assert!(e.to_string().contains("entry 2"), "{e}");
    }

    #[test]
    fn banner_mismatch() {
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n").is_err());
    }
}
