//! Smoothing proximal map `z(x, s; mu)`, its adjoint `y`, the CHKS residual
//! and the operators `W = (mu/rho) P(z)^{-1}`, `H = I + W`.
//!
//! `z` is the minimizer of `mu phi(z) + <s, z> + (rho/2)|z - x|^2` where
//! `phi` is the barrier whose Euclidean gradient is `-z^{-1}`, so that
//! `rho z - mu z^{-1} = rho x - s`. It shares the Jordan frame of
//! `w = rho x - s` and has eigenvalues `(l + sqrt(l^2 + 4 rho mu)) / (2 rho)`.

use std::sync::Arc;

use log::warn;

use crate::cone::{BlockSpectral, Cone, Element};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SmoothingState {
    cone: Arc<Cone>,
    pub x: Element,
    pub s: Element,
    pub mu: f64,
    pub rho: f64,
    pub z: Element,
    pub y: Element,
    /// Per-block determinants of `z`.
    pub det_z: Vec<f64>,
    frames: Vec<BlockSpectral>,
    /// `z o z / (mu/rho)` when every block has diagonal Peirce structure.
    pdiag: Option<Element>,
}

/// Eigenvalue map of the smoothing, written to avoid cancellation for `l < 0`.
pub fn smooth_eigenvalue(l: f64, mu: f64, rho: f64) -> f64 {
    let r = (l * l + 4.0 * rho * mu).sqrt();
    if l >= 0.0 {
        (l + r) / (2.0 * rho)
    } else {
        2.0 * mu / (r - l)
    }
}

pub fn compute_smoothing(cone: &Arc<Cone>, x: &Element, s: &Element, mu: f64, rho: f64) -> Result<SmoothingState> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Parameter(format!("mu must be positive, got {mu}")));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::Parameter(format!("rho must be >= 1, got {rho}")));
    }
    cone.check(x)?;
    cone.check(s)?;
    let w = x * rho - s;
    let mut frames = cone.spectral_decompose(&w)?;
    let floor = 1e-14 * (rho * mu).sqrt();
    for sp in frames.iter_mut() {
        for l in sp.eigenvalues.iter_mut() {
            *l = smooth_eigenvalue(*l, mu, rho);
            if *l < floor {
                warn!("smoothing eigenvalue {:e} below {:e}", *l, floor);
            }
        }
    }
    let vals: Vec<Vec<f64>> = frames.iter().map(|sp| sp.eigenvalues.clone()).collect();
    let z = cone.reconstruct(&frames, &vals);
    let y = s + (&z - x) * rho;
    let det_z = frames.iter().map(|sp| sp.eigenvalues.iter().product()).collect();
    let pdiag = diagonal_peirce(cone, &frames).map(|q| q / (mu / rho));
    Ok(SmoothingState { cone: cone.clone(), x: x.clone(), s: s.clone(), mu, rho, z, y, det_z, frames, pdiag })
}

fn diagonal_peirce(cone: &Cone, frames: &[BlockSpectral]) -> Option<Element> {
    let mut out = cone.zeros();
    for (bi, (off, b)) in cone.iter().enumerate() {
        let q = b.quad_diagonal(&frames[bi])?;
        out.as_mut_slice()[off..off + q.len()].copy_from_slice(&q);
    }
    Some(out)
}

impl SmoothingState {
    pub fn cone(&self) -> &Arc<Cone> {
        &self.cone
    }

    /// Spectral data of `z`.
    pub fn frames(&self) -> &[BlockSpectral] {
        &self.frames
    }

    /// CHKS residual `2(x - z)`.
    pub fn chks_residual(&self) -> Element {
        (&self.x - &self.z) * 2.0
    }

    /// `z - x`.
    pub fn gap(&self) -> Element {
        &self.z - &self.x
    }

    pub fn min_eig_z(&self) -> f64 {
        self.frames.iter().flat_map(|sp| sp.eigenvalues.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    fn kernel(&self, h: &Element, f: impl Fn(f64) -> f64) -> Element {
        // f receives l_i l_j / (mu/rho), the inverse of W's Peirce eigenvalue
        if let Some(p) = &self.pdiag {
            return p.zip_map(h, |p, v| f(p) * v);
        }
        let c = self.mu / self.rho;
        self.cone.peirce_apply(&self.frames, &|_, a, b| f(a * b / c), h)
    }

    pub fn apply_w(&self, h: &Element) -> Element {
        self.kernel(h, |p| 1.0 / p)
    }

    pub fn apply_h(&self, h: &Element) -> Element {
        self.kernel(h, |p| 1.0 + 1.0 / p)
    }

    pub fn apply_winv(&self, h: &Element) -> Element {
        self.kernel(h, |p| p)
    }

    pub fn apply_hinv(&self, h: &Element) -> Element {
        self.kernel(h, |p| p / (p + 1.0))
    }

    /// `H^{-1} W h`.
    pub fn apply_hinv_w(&self, h: &Element) -> Element {
        self.kernel(h, |p| 1.0 / (p + 1.0))
    }

    /// `W^{-1} H h`.
    pub fn apply_winv_h(&self, h: &Element) -> Element {
        self.kernel(h, |p| p + 1.0)
    }

    /// `-z^{-1}`, the gradient of the smoothing barrier at `z`.
    pub fn grad_phi_z(&self) -> Element {
        let vals: Vec<Vec<f64>> = self.frames.iter().map(|sp| sp.eigenvalues.iter().map(|l| -1.0 / l).collect()).collect();
        self.cone.reconstruct(&self.frames, &vals)
    }

    /// Smoothing barrier value `-sum_i |c_i|^2 ln l_i(z)`.
    pub fn phi_z(&self) -> f64 {
        -self
            .cone
            .iter()
            .zip(&self.frames)
            .map(|((_, b), sp)| b.idempotent_norm_sq() * sp.eigenvalues.iter().map(|l| l.ln()).sum::<f64>())
            .sum::<f64>()
    }

    /// Stationarity residual `mu grad phi(z) + s + rho (z - x)`.
    pub fn stationarity_residual(&self) -> Element {
        self.grad_phi_z() * self.mu + &self.s + (&self.z - &self.x) * self.rho
    }
}

/// Maximum relative errors between central finite differences and the
/// closed-form derivatives of `z` and `y`.
#[derive(Clone, Debug, Default)]
pub struct DerivativeReport {
    pub dz_dx: f64,
    pub dz_ds: f64,
    pub dy_dx: f64,
    pub dy_ds: f64,
    pub dz_dmu: f64,
    pub dy_dmu: f64,
}

impl DerivativeReport {
    pub fn max(&self) -> f64 {
        [self.dz_dx, self.dz_ds, self.dy_dx, self.dy_ds, self.dz_dmu, self.dy_dmu].into_iter().fold(0.0, f64::max)
    }
}

fn rel_err(fd: &[Element], cf: &[Element]) -> f64 {
    let num: f64 = fd.iter().zip(cf).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
    let den: f64 = cf.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Checks `D_x z = H^{-1}`, `D_s z = -H^{-1}/rho`, `D_x y = -rho H^{-1} W`,
/// `D_s y = H^{-1} W`, `z' = -H^{-1} grad phi(z) / rho`,
/// `y' = -H^{-1} grad phi(z)` against central differences along every
/// coordinate direction.
pub fn derivative_checks(st: &SmoothingState) -> Result<DerivativeReport> {
    let cone = st.cone.clone();
    let n = cone.dim();
    let hx = 1e-6 * (1.0 + st.x.norm());
    let hs = 1e-6 * (1.0 + st.s.norm());
    let (mut fzx, mut fzs, mut fyx, mut fys) = (vec![], vec![], vec![], vec![]);
    let (mut czx, mut czs, mut cyx, mut cys) = (vec![], vec![], vec![], vec![]);
    for k in 0..n {
        let mut e = cone.zeros();
        e[k] = 1.0;
        let p = compute_smoothing(&cone, &(&st.x + &e * hx), &st.s, st.mu, st.rho)?;
        let m = compute_smoothing(&cone, &(&st.x - &e * hx), &st.s, st.mu, st.rho)?;
        fzx.push((&p.z - &m.z) / (2.0 * hx));
        fyx.push((&p.y - &m.y) / (2.0 * hx));
        let p = compute_smoothing(&cone, &st.x, &(&st.s + &e * hs), st.mu, st.rho)?;
        let m = compute_smoothing(&cone, &st.x, &(&st.s - &e * hs), st.mu, st.rho)?;
        fzs.push((&p.z - &m.z) / (2.0 * hs));
        fys.push((&p.y - &m.y) / (2.0 * hs));
        czx.push(st.apply_hinv(&e));
        czs.push(st.apply_hinv(&e) * (-1.0 / st.rho));
        cyx.push(st.apply_hinv_w(&e) * (-st.rho));
        cys.push(st.apply_hinv_w(&e));
    }
    let hm = 1e-6 * st.mu;
    let p = compute_smoothing(&cone, &st.x, &st.s, st.mu + hm, st.rho)?;
    let m = compute_smoothing(&cone, &st.x, &st.s, st.mu - hm, st.rho)?;
    let hg = st.apply_hinv(&st.grad_phi_z());
    Ok(DerivativeReport {
        dz_dx: rel_err(&fzx, &czx),
        dz_ds: rel_err(&fzs, &czs),
        dy_dx: rel_err(&fyx, &cyx),
        dy_ds: rel_err(&fys, &cys),
        dz_dmu: rel_err(&[(&p.z - &m.z) / (2.0 * hm)], &[&hg * (-1.0 / st.rho)]),
        dy_dmu: rel_err(&[(&p.y - &m.y) / (2.0 * hm)], &[-&hg]),
    })
}
