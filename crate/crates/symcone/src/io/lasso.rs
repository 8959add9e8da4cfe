//! Square-root Lasso `min |D y - b| + varrho |y|_1` as an SOCP.
//!
//! Variables are ordered `(t, d, y+, y-)` with `(t, d)` in a second-order
//! cone of dimension `rows(D) + 1` and `y+, y-` nonnegative. Constraints are
//! `D y+ - D y- - d = b`; the objective is `t + varrho (sum y+ + sum y-)`.

use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::matrix_market::read_matrix_market;
use super::{finish, ProblemData, ProblemReader, ReadOptions};
use crate::cone::{BlockSpec, ConeSpec};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct LassoSpec {
    pub name: String,
    pub d: DMatrix<f64>,
    pub b: DVector<f64>,
    pub varrho: f64,
}

impl LassoSpec {
    /// Uses `varrho = |D^T b|_inf`.
    pub fn new(name: &str, d: DMatrix<f64>, b: DVector<f64>) -> Self {
        let varrho = if d.ncols() == 0 { 0.0 } else { (d.transpose() * &b).amax() };
        LassoSpec { name: name.to_string(), d, b, varrho }
    }

    /// All-ones right-hand side.
    pub fn with_ones(name: &str, d: DMatrix<f64>) -> Self {
        let b = DVector::from_element(d.nrows(), 1.0);
        Self::new(name, d, b)
    }

    pub fn objective(&self, y: &DVector<f64>) -> f64 {
        (&self.d * y - &self.b).norm() + self.varrho * y.lp_norm(1)
    }

    /// Recovers `y = y+ - y-` from a point of the built problem.
    pub fn recover(&self, x: &DVector<f64>) -> DVector<f64> {
        let (dr, n) = self.d.shape();
        DVector::from_fn(n, |i, _| x[1 + dr + i] - x[1 + dr + n + i])
    }

    /// Distance from zero to the subdifferential at `y`; coordinates with
    /// `|y_i| <= zero_tol` are treated as zero.
    pub fn subgradient_residual(&self, y: &DVector<f64>, zero_tol: f64) -> f64 {
        let r = &self.d * y - &self.b;
        let rn = r.norm();
        if rn == 0.0 {
            return 0.0;
        }
        let g = self.d.transpose() * r / rn;
        g.iter()
            .zip(y.iter())
            .map(|(&gi, &yi)| if yi.abs() <= zero_tol { (gi.abs() - self.varrho).max(0.0) } else { (gi + self.varrho * yi.signum()).abs() })
            .fold(0.0, f64::max)
    }
}

pub fn build_sqrt_lasso(spec: &LassoSpec) -> ProblemData {
    let (dr, n) = spec.d.shape();
    if spec.d.iter().all(|v| *v == 0.0) {
        warn!("sqrt-lasso data matrix is zero");
    }
    let nv = 1 + dr + 2 * n;
    let mut a = DMatrix::zeros(dr, nv);
    for i in 0..dr {
        a[(i, 1 + i)] = -1.0;
        for j in 0..n {
            let v = spec.d[(i, j)];
            a[(i, 1 + dr + j)] = v;
            a[(i, 1 + dr + n + j)] = -v;
        }
    }
    let mut c = DVector::zeros(nv);
    c[0] = 1.0;
    for j in 0..2 * n {
        c[1 + dr + j] = spec.varrho;
    }
    let mut blocks = vec![BlockSpec::soc(dr + 1)];
    if n > 0 {
        blocks.push(BlockSpec::orthant(2 * n));
    }
    ProblemData::new(&spec.name, ConeSpec::new(blocks), a, spec.b.clone(), c, 0.0)
}

pub struct LassoReader;

impl ProblemReader for LassoReader {
    fn name(&self) -> &'static str {
        "lasso"
    }
    fn read(&self, path: &Path, opts: &ReadOptions) -> Result<ProblemData> {
        let d = read_matrix_market(path)?.to_dense();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("lasso");
        finish(build_sqrt_lasso(&LassoSpec::with_ones(name, d)), opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_instance_layout() {
        let spec = LassoSpec::with_ones("i2", DMatrix::identity(2, 2));
        assert_eq!(spec.varrho, 1.0);
        let p = build_sqrt_lasso(&spec);
        assert_eq!(p.cone, ConeSpec::new(vec![BlockSpec::soc(3), BlockSpec::orthant(4)]));
        assert_eq!(p.m(), 2);
        assert_eq!(p.c.as_slice(), &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(p.a.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn no_columns_is_norm_problem() {
        let spec = LassoSpec::new("e", DMatrix::zeros(3, 0), DVector::from_element(3, 2.0));
        let p = build_sqrt_lasso(&spec);
        assert_eq!(p.cone.blocks.len(), 1);
        assert_eq!(p.n(), 4);
    }

    #[test]
    fn zero_is_optimal_for_identity() {
        let spec = LassoSpec::with_ones("i2", DMatrix::identity(2, 2));
        let y = DVector::zeros(2);
        assert!((spec.objective(&y) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(spec.subgradient_residual(&y, 0.0), 0.0);
    }
}
