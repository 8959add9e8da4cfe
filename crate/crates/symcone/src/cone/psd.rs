use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen};

use super::svec::{self, smat, svec_into};
use super::{BlockSpectral, ConeBlock, Element, Frame};
use crate::error::{Error, Result};

/// Cone of `n x n` positive semidefinite matrices in scaled vectorized form.
#[derive(Debug, Clone)]
pub struct Psd {
    n: usize,
}

impl Psd {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("psd block needs order >= 1".into()));
        }
        Ok(Psd { n })
    }

    fn q(sp: &BlockSpectral) -> &DMatrix<f64> {
        match &sp.frame {
            Frame::Eigen { q } => q,
            _ => panic!("psd block given a non-eigen frame"),
        }
    }

    fn eig(&self, z: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let m = smat(z, self.n);
        let se = SymmetricEigen::try_new(m, f64::EPSILON, 10_000).ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let q = DMatrix::from_fn(self.n, self.n, |r, c| se.eigenvectors[(r, idx[c])]);
        Ok((vals, q))
    }

    fn interior_eig(&self, z: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let (l, q) = self.eig(z)?;
        if let Some(&bad) = l.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Domain(format!("psd point has eigenvalue {bad:e}")));
        }
        Ok((l, q))
    }

    fn from_eig(q: &DMatrix<f64>, vals: &[f64]) -> DMatrix<f64> {
        let mut qd = q.clone();
        for (j, mut col) in qd.column_iter_mut().enumerate() {
            col *= vals[j];
        }
        &qd * q.transpose()
    }
}

impl ConeBlock for Psd {
    fn kind(&self) -> &'static str {
        "psd"
    }
    fn order(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        svec::len(self.n)
    }
    fn rank(&self) -> usize {
        self.n
    }
    fn idempotent_norm_sq(&self) -> f64 {
        1.0
    }

    fn identity(&self, out: &mut [f64]) {
        out.fill(0.0);
        for j in 0..self.n {
            out[svec::index(self.n, j, j)] = 1.0;
        }
    }

    fn product(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let xm = smat(x, self.n);
        let ym = smat(y, self.n);
        let p = (&xm * &ym + &ym * &xm) * 0.5;
        svec_into(&p, out);
    }

    fn spectral(&self, x: &[f64]) -> Result<BlockSpectral> {
        let (eigenvalues, q) = self.eig(x)?;
        Ok(BlockSpectral { eigenvalues, frame: Frame::Eigen { q } })
    }

    fn idempotents(&self, sp: &BlockSpectral) -> Vec<Element> {
        let q = Self::q(sp);
        (0..self.n)
            .map(|i| {
                let c = q.column(i);
                DVector::from_vec(svec::svec(&(c * c.transpose())))
            })
            .collect()
    }

    fn reconstruct(&self, sp: &BlockSpectral, vals: &[f64], out: &mut [f64]) {
        svec_into(&Self::from_eig(Self::q(sp), vals), out);
    }

    fn peirce_apply(&self, sp: &BlockSpectral, k: &dyn Fn(usize, usize) -> f64, h: &[f64], out: &mut [f64]) {
        let q = Self::q(sp);
        let mut t = q.transpose() * smat(h, self.n) * q;
        for j in 0..self.n {
            for i in 0..self.n {
                t[(i, j)] *= k(i, j);
            }
        }
        svec_into(&(q * t * q.transpose()), out);
    }

    fn hessian_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        let (l, q) = self.interior_eig(z)?;
        let inv: Vec<f64> = l.iter().map(|v| 1.0 / v).collect();
        let zi = Self::from_eig(&q, &inv);
        svec_into(&(&zi * smat(h, self.n) * &zi), out);
        Ok(())
    }

    fn hessian_inv_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        self.interior_eig(z)?;
        let zm = smat(z, self.n);
        svec_into(&(&zm * smat(h, self.n) * &zm), out);
        Ok(())
    }

    fn quad_schur_add(&self, a: DMatrixView<f64>, sp: &BlockSpectral, scale: f64, m: &mut DMatrix<f64>) {
        // rows of A_b are svec(A_i); entry (i, j) gains tr(A_i Z A_j Z)
        let zm = Self::from_eig(Self::q(sp), &sp.eigenvalues);
        let rows = a.nrows();
        let dim = self.dim();
        let mut y = DMatrix::zeros(rows, dim);
        let mut buf = vec![0.0; dim];
        for i in 0..rows {
            let ai: Vec<f64> = a.row(i).iter().copied().collect();
            if ai.iter().all(|v| *v == 0.0) {
                continue;
            }
            svec_into(&(&zm * smat(&ai, self.n) * &zm), &mut buf);
            for (k, v) in buf.iter().enumerate() {
                y[(i, k)] = *v;
            }
        }
        m.gemm(scale, &a, &y.transpose(), 1.0);
    }
}
