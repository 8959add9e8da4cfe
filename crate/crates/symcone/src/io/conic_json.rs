//! Native conic interchange format.
//!
//! ```json
//! {"name": "p", "m": 1,
//!  "cone": [{"type": "orthant", "dim": 2}],
//!  "A": {"rows": [0, 0], "cols": [0, 1], "vals": [1.0, 1.0]},
//!  "b": [1.0], "c": [1.0, 2.0], "offset": 0.0}
//! ```
//!
//! `dim` is the orthant length, the second-order total dimension, or the
//! PSD matrix order. PSD coordinates use the scaled vectorized order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{finish, ProblemData, ProblemReader, ReadOptions};
use crate::cone::ConeSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triplets {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicFile {
    pub name: String,
    pub m: usize,
    pub cone: ConeSpec,
    #[serde(rename = "A")]
    pub a: Triplets,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl ConicFile {
    pub fn from_problem(p: &ProblemData) -> Self {
        let mut t = Triplets { rows: vec![], cols: vec![], vals: vec![] };
        for j in 0..p.a.ncols() {
            for i in 0..p.a.nrows() {
                let v = p.a[(i, j)];
                if v != 0.0 {
                    t.rows.push(i);
                    t.cols.push(j);
                    t.vals.push(v);
                }
            }
        }
        ConicFile {
            name: p.name.clone(),
            m: p.m(),
            cone: p.cone.clone(),
            a: t,
            b: p.b.iter().copied().collect(),
            c: p.c.iter().copied().collect(),
            offset: p.objective_offset,
        }
    }

    pub fn into_problem(self) -> Result<ProblemData> {
        let n = self.c.len();
        if self.b.len() != self.m {
            return Err(Error::Parse(format!("field 'b': length {} differs from m = {}", self.b.len(), self.m)));
        }
        let t = &self.a;
        if t.rows.len() != t.cols.len() || t.rows.len() != t.vals.len() {
            return Err(Error::Parse("field 'A': rows, cols and vals must have equal length".into()));
        }
        let mut a = DMatrix::zeros(self.m, n);
        for k in 0..t.rows.len() {
            let (i, j) = (t.rows[k], t.cols[k]);
            if i >= self.m || j >= n {
                return Err(Error::Parse(format!("field 'A': entry {k} at ({i}, {j}) is out of range")));
            }
            a[(i, j)] += t.vals[k];
        }
        let p = ProblemData::new(&self.name, self.cone, a, DVector::from_vec(self.b), DVector::from_vec(self.c), self.offset);
        p.validate().map_err(|e| match e {
            Error::Structural(msg) => Error::Parse(format!("field 'cone': {msg}")),
            other => other,
        })?;
        Ok(p)
    }
}

pub fn from_str(text: &str) -> Result<ProblemData> {
    let f: ConicFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    f.into_problem()
}

pub fn to_string(p: &ProblemData) -> String {
    serde_json::to_string_pretty(&ConicFile::from_problem(p)).expect("serializable")
}

pub fn read_conic_json(path: &Path) -> Result<ProblemData> {
    from_str(&std::fs::read_to_string(path)?)
}

pub fn write_conic_json(p: &ProblemData, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(p))?;
    Ok(())
}

pub struct ConicReader;

impl ProblemReader for ConicReader {
    fn name(&self) -> &'static str {
        "conic"
    }
    fn read(&self, path: &Path, opts: &ReadOptions) -> Result<ProblemData> {
        finish(read_conic_json(path)?, opts)
    }
}
