//! Problem data in standard primal form and the readers that produce it.
//!
//! Readers implement [`ProblemReader`] and are selected by name through a
//! [`ReaderRegistry`] (`mps`, `conic`, `lasso`).

pub mod conic_json;
pub mod lasso;
pub mod matrix_market;
pub mod mps;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::cone::{Cone, ConeSpec, Element};
use crate::error::{Error, Result};

/// `min <c,x> + offset  s.t.  A x = b, x in K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData {
    pub name: String,
    pub cone: ConeSpec,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: Element,
    pub objective_offset: f64,
}

impl ProblemData {
    pub fn new(name: &str, cone: ConeSpec, a: DMatrix<f64>, b: DVector<f64>, c: Element, offset: f64) -> Self {
        ProblemData { name: name.to_string(), cone, a, b, c, objective_offset: offset }
    }

    /// Builds from dense rows; validates dimensions.
    pub fn dense(name: &str, cone: ConeSpec, rows: &[&[f64]], b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let n = c.len();
        let m = rows.len();
        let mut a = DMatrix::zeros(m, n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Structural(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            for (j, v) in r.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        let p = ProblemData::new(name, cone, a, DVector::from_vec(b), DVector::from_vec(c), 0.0);
        p.validate()?;
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Checks that all dimensions agree with the cone.
    pub fn validate(&self) -> Result<Cone> {
        let cone = Cone::new(self.cone.clone())?;
        if self.a.ncols() != cone.dim() || self.c.len() != cone.dim() {
            return Err(Error::Structural(format!(
                "A has {} columns and c has {} entries but the cone has dimension {}",
                self.a.ncols(),
                self.c.len(),
                cone.dim()
            )));
        }
        if self.a.nrows() != self.b.len() {
            return Err(Error::Structural(format!("A has {} rows but b has {} entries", self.a.nrows(), self.b.len())));
        }
        if self.a.iter().chain(self.b.iter()).chain(self.c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Structural("problem data contains non-finite values".into()));
        }
        Ok(cone)
    }

    pub fn objective(&self, x: &Element) -> f64 {
        self.c.dot(x) + self.objective_offset
    }

    /// Rows that are linear combinations of earlier rows (tolerance relative
    /// to each row norm).
    pub fn dependent_rows(&self) -> Vec<usize> {
        row_basis(&self.a, &self.b, 1e-9).dependent.iter().map(|d| d.0).collect()
    }

    /// Drops dependent rows; fails if a dropped row has an inconsistent
    /// right-hand side.
    pub fn prune_dependent_rows(&mut self) -> Result<Vec<usize>> {
        let rb = row_basis(&self.a, &self.b, 1e-9);
        if rb.dependent.is_empty() {
            return Ok(vec![]);
        }
        let scale = 1.0 + self.b.amax();
        if let Some((i, r)) = rb.dependent.iter().find(|(_, r)| r.abs() > 1e-7 * scale) {
            return Err(Error::Structural(format!("row {i} is dependent but its right-hand side is inconsistent (residual {r:e})")));
        }
        let keep = &rb.independent;
        self.a = DMatrix::from_fn(keep.len(), self.a.ncols(), |i, j| self.a[(keep[i], j)]);
        self.b = DVector::from_fn(keep.len(), |i, _| self.b[keep[i]]);
        Ok(rb.dependent.iter().map(|d| d.0).collect())
    }
}

impl ProblemData {
    /// Eliminates equality rows with a single nonzero `a_ij x_j = b_i` by
    /// fixing `x_j = b_i / a_ij` (repeated until none remain). Such a row
    /// pins a coordinate, so a fix at zero leaves no strictly feasible
    /// point. Only for pure orthant cones; returns the removed rows in the
    /// original numbering.
    pub fn fix_singleton_rows(&mut self) -> Result<Vec<usize>> {
        if self.cone.blocks.iter().any(|b| b.kind != "orthant") {
            return Ok(vec![]);
        }
        let mut rows: Vec<usize> = (0..self.m()).collect();
        let mut removed = vec![];
        while let Some(i) = (0..self.m()).find(|&i| self.a.row(i).iter().filter(|v| **v != 0.0).count() == 1) {
            let j = self.a.row(i).iter().position(|v| *v != 0.0).unwrap();
            let v = self.b[i] / self.a[(i, j)];
            if v < -1e-9 * (1.0 + self.b[i].abs()) {
                return Err(Error::Structural(format!("row {} forces variable {j} to {v:e} < 0", rows[i])));
            }
            let v = v.max(0.0);
            self.b -= self.a.column(j) * v;
            self.objective_offset += self.c[j] * v;
            self.a = self.a.clone().remove_row(i).remove_column(j);
            self.b = self.b.clone().remove_row(i);
            self.c = self.c.clone().remove_row(j);
            let mut acc = 0;
            for blk in self.cone.blocks.iter_mut() {
                if j < acc + blk.dim {
                    blk.dim -= 1;
                    break;
                }
                acc += blk.dim;
            }
            self.cone.blocks.retain(|b| b.dim > 0);
            removed.push(rows.remove(i));
        }
        Ok(removed)
    }
}

struct RowBasis {
    independent: Vec<usize>,
    /// (row, right-hand side residual)
    dependent: Vec<(usize, f64)>,
}

/// Modified Gram-Schmidt over the rows of `a`, carrying `b` along.
fn row_basis(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> RowBasis {
    let n = a.ncols();
    let mut q: Vec<DVector<f64>> = vec![];
    let mut beta: Vec<f64> = vec![];
    let mut rb = RowBasis { independent: vec![], dependent: vec![] };
    for i in 0..a.nrows() {
        let mut v = DVector::from_fn(n, |j, _| a[(i, j)]);
        let nrm0 = v.norm();
        let mut bi = b[i];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let p = qk.dot(&v);
                v.axpy(-p, qk, 1.0);
                bi -= p * beta[k];
            }
        }
        let nrm = v.norm();
        if nrm <= tol * nrm0.max(f64::MIN_POSITIVE) {
            rb.dependent.push((i, bi));
        } else {
            q.push(v / nrm);
            beta.push(bi / nrm);
            rb.independent.push(i);
        }
    }
    rb
}

#[derive(Clone, Debug, Default)]
pub struct ReadOptions {
    pub prune_rows: bool,
}

pub trait ProblemReader: Send + Sync {
    fn name(&self) -> &'static str;
    fn read(&self, path: &Path, opts: &ReadOptions) -> Result<ProblemData>;
}

pub struct ReaderRegistry {
    readers: BTreeMap<&'static str, Box<dyn ProblemReader>>,
}

impl ReaderRegistry {
    pub fn empty() -> Self {
        ReaderRegistry { readers: BTreeMap::new() }
    }

    pub fn register(&mut self, r: Box<dyn ProblemReader>) {
        self.readers.insert(r.name(), r);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ProblemReader> {
        self.readers
            .get(name)
            .map(|r| r.as_ref())
            .ok_or_else(|| Error::Parameter(format!("unknown input format '{name}' (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.readers.keys().copied().collect()
    }

    /// Format inferred from a file extension.
    pub fn guess(path: &Path) -> Option<&'static str> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "mps" => Some("mps"),
            "json" => Some("conic"),
            "mtx" => Some("lasso"),
            "qps" => Some("qps"),
            _ => None,
        }
    }

    pub fn read(&self, format: &str, path: &Path, opts: &ReadOptions) -> Result<ProblemData> {
        if format == "qps" {
            return Err(Error::Parameter("QPS (quadratic) input is not supported".into()));
        }
        self.get(format)?.read(path, opts)
    }
}

impl Default for ReaderRegistry {
    fn default() -> Self {
        let mut r = ReaderRegistry::empty();
        r.register(Box::new(mps::MpsReader));
        r.register(Box::new(conic_json::ConicReader));
        r.register(Box::new(lasso::LassoReader));
        r
    }
}

/// Applies row handling shared by readers: prune when asked, otherwise
/// reject rank-deficient constraint matrices.
pub(crate) fn finish(mut p: ProblemData, opts: &ReadOptions) -> Result<ProblemData> {
    p.validate()?;
    if opts.prune_rows {
        let fixed = p.fix_singleton_rows()?;
        if !fixed.is_empty() {
            log::info!("eliminated {} singleton rows from {}", fixed.len(), p.name);
        }
        let dropped = p.prune_dependent_rows()?;
        if !dropped.is_empty() {
            log::info!("pruned {} dependent rows from {}", dropped.len(), p.name);
        }
    } else {
        let dep = p.dependent_rows();
        if !dep.is_empty() {
            let shown: Vec<String> = dep.iter().take(10).map(|i| i.to_string()).collect();
            return Err(Error::Structural(format!(
                "constraint matrix is rank deficient; redundant rows: {}{} (use row pruning)",
                shown.join(", "),
                if dep.len() > 10 { ", ..." } else { "" }
            )));
        }
    }
    Ok(p)
}
