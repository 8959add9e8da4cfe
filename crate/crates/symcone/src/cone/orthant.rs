use nalgebra::{DMatrix, DMatrixView, DVector};

use super::{BlockSpectral, ConeBlock, Element, Frame};
use crate::error::{Error, Result};

/// Nonnegative orthant: elementwise product, coordinate idempotents.
#[derive(Debug, Clone)]
pub struct Orthant {
    n: usize,
}

impl Orthant {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("orthant block needs dimension >= 1".into()));
        }
        Ok(Orthant { n })
    }

    fn perm(sp: &BlockSpectral) -> &[usize] {
        match &sp.frame {
            Frame::Diagonal { perm } => perm,
            _ => panic!("orthant block given a non-diagonal frame"),
        }
    }
}

impl ConeBlock for Orthant {
    fn kind(&self) -> &'static str {
        "orthant"
    }
    fn order(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn rank(&self) -> usize {
        self.n
    }
    fn idempotent_norm_sq(&self) -> f64 {
        1.0
    }

    fn identity(&self, out: &mut [f64]) {
        out.fill(1.0);
    }

    fn product(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = x[i] * y[i];
        }
    }

    fn spectral(&self, x: &[f64]) -> Result<BlockSpectral> {
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.sort_unstable_by(|&a, &b| x[b].total_cmp(&x[a]));
        let eigenvalues = perm.iter().map(|&i| x[i]).collect();
        Ok(BlockSpectral { eigenvalues, frame: Frame::Diagonal { perm } })
    }

    fn idempotents(&self, sp: &BlockSpectral) -> Vec<Element> {
        Self::perm(sp).iter().map(|&i| DVector::from_fn(self.n, |k, _| if k == i { 1.0 } else { 0.0 })).collect()
    }

    fn reconstruct(&self, sp: &BlockSpectral, vals: &[f64], out: &mut [f64]) {
        for (k, &i) in Self::perm(sp).iter().enumerate() {
            out[i] = vals[k];
        }
    }

    fn peirce_apply(&self, sp: &BlockSpectral, k: &dyn Fn(usize, usize) -> f64, h: &[f64], out: &mut [f64]) {
        for (r, &i) in Self::perm(sp).iter().enumerate() {
            out[i] = k(r, r) * h[i];
        }
    }

    fn hessian_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..self.n {
            if !(z[i] > 0.0) {
                return Err(Error::Domain(format!("orthant entry {} is {:e}", i, z[i])));
            }
            out[i] = h[i] / (z[i] * z[i]);
        }
        Ok(())
    }

    fn hessian_inv_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..self.n {
            if !(z[i] > 0.0) {
                return Err(Error::Domain(format!("orthant entry {} is {:e}", i, z[i])));
            }
            out[i] = z[i] * z[i] * h[i];
        }
        Ok(())
    }

    fn quad_diagonal(&self, sp: &BlockSpectral) -> Option<Vec<f64>> {
        let mut d = vec![0.0; self.n];
        self.reconstruct(sp, &sp.eigenvalues, &mut d);
        Some(d.iter().map(|v| v * v).collect())
    }

    fn quad_schur_add(&self, a: DMatrixView<f64>, sp: &BlockSpectral, scale: f64, m: &mut DMatrix<f64>) {
        let mut d = vec![0.0; self.n];
        self.reconstruct(sp, &sp.eigenvalues, &mut d);
        let mut ad = a.clone_owned();
        for (j, mut col) in ad.column_iter_mut().enumerate() {
            col *= scale * d[j] * d[j];
        }
        m.gemm(1.0, &ad, &a.transpose(), 1.0);
    }
}
