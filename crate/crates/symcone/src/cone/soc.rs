use nalgebra::{DMatrix, DMatrixView, DVector};

use super::{BlockSpectral, ConeBlock, Element, Frame};
use crate::error::{Error, Result};

/// Second-order cone `{(x0, xb) : x0 >= |xb|}` of total dimension `d`.
///
/// Jordan product is the arrow product; eigenvalues are `x0 +- |xb|` with
/// idempotents `(1, +-u)/2`, `u = xb/|xb|`, falling back to the first
/// coordinate vector when `xb = 0`.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    d: usize,
}

impl SecondOrder {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Structural(format!("second-order block needs dimension >= 2, got {d}")));
        }
        Ok(SecondOrder { d })
    }

    fn u(sp: &BlockSpectral) -> &DVector<f64> {
        match &sp.frame {
            Frame::Arrow { u } => u,
            _ => panic!("second-order block given a non-arrow frame"),
        }
    }

    fn det(z: &[f64]) -> f64 {
        let nb: f64 = z[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        (z[0] - nb) * (z[0] + nb)
    }

    fn check_interior(z: &[f64]) -> Result<f64> {
        let nb: f64 = z[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(z[0] - nb > 0.0) {
            return Err(Error::Domain(format!("second-order point has eigenvalue {:e}", z[0] - nb)));
        }
        Ok(Self::det(z))
    }
}

impl ConeBlock for SecondOrder {
    fn kind(&self) -> &'static str {
        "soc"
    }
    fn order(&self) -> usize {
        self.d
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn rank(&self) -> usize {
        2
    }
    fn idempotent_norm_sq(&self) -> f64 {
        0.5
    }

    fn identity(&self, out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
    }

    fn product(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = x.iter().zip(y).map(|(a, b)| a * b).sum();
        for i in 1..self.d {
            out[i] = x[0] * y[i] + y[0] * x[i];
        }
    }

    fn spectral(&self, x: &[f64]) -> Result<BlockSpectral> {
        let xb = DVector::from_column_slice(&x[1..]);
        let nb = xb.norm();
        let u = if nb > 0.0 {
            xb / nb
        } else {
            let mut e = DVector::zeros(self.d - 1);
            e[0] = 1.0;
            e
        };
        Ok(BlockSpectral { eigenvalues: vec![x[0] + nb, x[0] - nb], frame: Frame::Arrow { u } })
    }

    fn idempotents(&self, sp: &BlockSpectral) -> Vec<Element> {
        let u = Self::u(sp);
        [1.0, -1.0].iter().map(|&sg| DVector::from_fn(self.d, |i, _| if i == 0 { 0.5 } else { 0.5 * sg * u[i - 1] })).collect()
    }

    fn reconstruct(&self, sp: &BlockSpectral, vals: &[f64], out: &mut [f64]) {
        let u = Self::u(sp);
        out[0] = 0.5 * (vals[0] + vals[1]);
        let c = 0.5 * (vals[0] - vals[1]);
        for i in 1..self.d {
            out[i] = c * u[i - 1];
        }
    }

    fn peirce_apply(&self, sp: &BlockSpectral, k: &dyn Fn(usize, usize) -> f64, h: &[f64], out: &mut [f64]) {
        let u = Self::u(sp);
        let a: f64 = u.iter().zip(&h[1..]).map(|(p, q)| p * q).sum();
        let p1 = 0.5 * (h[0] + a) * k(0, 0);
        let p2 = 0.5 * (h[0] - a) * k(1, 1);
        let k12 = k(0, 1);
        out[0] = p1 + p2;
        for i in 1..self.d {
            let ui = u[i - 1];
            out[i] = (p1 - p2) * ui + k12 * (h[i] - a * ui);
        }
    }

    fn hessian_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        let d = Self::check_interior(z)?;
        // D2 phi[h] = (4/d^2) Jz <Jz,h> - (2/d) Jh
        let jzh = z[0] * h[0] - z[1..].iter().zip(&h[1..]).map(|(a, b)| a * b).sum::<f64>();
        let c = 4.0 * jzh / (d * d);
        out[0] = c * z[0] - 2.0 * h[0] / d;
        for i in 1..self.d {
            out[i] = -c * z[i] + 2.0 * h[i] / d;
        }
        Ok(())
    }

    fn hessian_inv_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        let d = Self::check_interior(z)?;
        // z <z,h> - (d/2) Jh
        let zh: f64 = z.iter().zip(h).map(|(a, b)| a * b).sum();
        out[0] = zh * z[0] - 0.5 * d * h[0];
        for i in 1..self.d {
            out[i] = zh * z[i] + 0.5 * d * h[i];
        }
        Ok(())
    }

    fn quad_schur_add(&self, a: DMatrixView<f64>, sp: &BlockSpectral, scale: f64, m: &mut DMatrix<f64>) {
        // P(z) = 2 z z^T + det(z) I - 2 det(z) e e^T
        let mut z = vec![0.0; self.d];
        self.reconstruct(sp, &sp.eigenvalues, &mut z);
        let det = sp.eigenvalues[0] * sp.eigenvalues[1];
        let az = a * DVector::from_column_slice(&z);
        let ae = a.column(0).clone_owned();
        m.gemm(scale * det, &a, &a.transpose(), 1.0);
        m.ger(2.0 * scale, &az, &az, 1.0);
        m.ger(-2.0 * scale * det, &ae, &ae, 1.0);
    }
}
