//! Reduced augmented-Lagrangian value, gradients and the merit functions
//! `delta` (local norm of the Newton step) and `xi` (dual local norm of the
//! gradient).

use log::warn;

use crate::cone::Element;
use crate::error::{Error, Result};
use crate::kkt::{factor_spd, s_norm, KktSystem, NewtonDirection, SchurHandle};
use crate::smoothing::{compute_smoothing, SmoothingState};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeritReport {
    pub delta_x: f64,
    pub delta_s: f64,
    pub delta: f64,
    pub xi_x: f64,
    pub xi_s: f64,
    pub xi: f64,
    pub eta_value: f64,
}

/// Square root of a quadratic form. Roundoff below zero (relative to
/// `scale`) clamps to 0; anything more negative is a logic error.
pub fn checked_sqrt(v: f64, scale: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        return Ok(v.sqrt());
    }
    if v >= -1e-14 * scale.max(1.0) {
        return Ok(0.0);
    }
    Err(Error::Numerical(format!("{what}: negative radicand {v:e}")))
}

/// `<c,x> + mu phi(z) + <s, z - x> + (rho/2)|z - x|^2`.
pub fn eta_value(sys: &KktSystem, st: &SmoothingState) -> f64 {
    let res = sys.primal_residual(&st.x).norm();
    if res > 1e-9 * (1.0 + sys.b.norm()) {
        warn!("eta evaluated off the primal affine set (residual {res:e})");
    }
    let g = st.gap();
    sys.c.dot(&st.x) + st.mu * st.phi_z() + st.s.dot(&g) + 0.5 * st.rho * g.norm_squared()
}

/// Ambient gradients `(c - y, z - x)`; the reduced x-gradient is the
/// projection of the first onto `ker A`.
pub fn gradients(sys: &KktSystem, st: &SmoothingState) -> (Element, Element) {
    (&sys.c - &st.y, st.gap())
}

pub fn merit_delta(st: &SmoothingState, dx: &Element, ds: &Element) -> Result<(f64, f64, f64)> {
    let qx = st.rho / st.mu * dx.dot(&st.apply_hinv_w(dx));
    let qs = ds.dot(&st.apply_hinv(ds)) / (st.rho * st.mu);
    let scx = st.rho / st.mu * dx.norm_squared();
    let scs = ds.norm_squared() / (st.rho * st.mu);
    let (a, b) = (checked_sqrt(qx, scx, "delta_x")?, checked_sqrt(qs, scs, "delta_s")?);
    Ok((a, b, (a * a + b * b).sqrt()))
}

/// `xi_s = sqrt((rho/mu) <z-x, H(z-x)>)` and
/// `xi_x = sqrt(<g, u>/mu)` where `u in ker A` solves
/// `rho H^{-1} W u + A^T nu = g`, reduced through
/// `(A W^{-1} A^T + A A^T) nu = A (W^{-1} g + g)`.
pub fn merit_xi(sys: &KktSystem, st: &SmoothingState, schur: &SchurHandle) -> Result<(f64, f64, f64)> {
    let r = st.gap();
    let qs = st.rho / st.mu * r.dot(&st.apply_h(&r));
    let xi_s = checked_sqrt(qs, st.rho / st.mu * r.norm_squared(), "xi_s")?;

    let g = sys.project_kernel(&(&sys.c - &st.y));
    let xi_x = if sys.m() == 0 {
        let u = st.apply_winv_h(&g) / st.rho;
        let q = g.dot(&u) / st.mu;
        checked_sqrt(q, g.norm() * u.norm() / st.mu, "xi_x")?
    } else {
        let aux = &schur.matrix + &sys.aat;
        let (chol, _) = factor_spd(&aux).map_err(|e| Error::Numerical(format!("projected Hessian for xi_x: {e}")))?;
        let rhs = sys.apply(&(st.apply_winv(&g) + &g));
        let nu = chol.solve(&rhs);
        let u = st.apply_winv_h(&(&g - sys.adjoint(&nu))) / st.rho;
        let q = g.dot(&u) / st.mu;
        checked_sqrt(q, g.norm() * u.norm() / st.mu, "xi_x")?
    };
    Ok((xi_x, xi_s, (xi_x * xi_x + xi_s * xi_s).sqrt()))
}

/// Full report for a state and its Newton direction.
pub fn merit_report(sys: &KktSystem, st: &SmoothingState, dir: &NewtonDirection, schur: &SchurHandle) -> Result<MeritReport> {
    let (delta_x, delta_s, delta) = merit_delta(st, &dir.dx, &dir.ds)?;
    let (xi_x, xi_s, xi) = merit_xi(sys, st, schur)?;
    Ok(MeritReport { delta_x, delta_s, delta, xi_x, xi_s, xi, eta_value: eta_value(sys, st) })
}

/// Both sides of the mu-sensitivity bounds for one direction `h`
/// (`h_x` in `ker A`):
/// `|<h, grad eta'>| <= sqrt(2 nu / mu) sqrt(S[h,h])` and
/// `|S'[h,h]| <= rho (1 + 2 sqrt nu) / mu * S[h,h]`,
/// with `S[h,h] = rho <h_x, H^{-1} W h_x> + <h_s, H^{-1} h_s> / rho`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SensitivityReport {
    pub s_hh: f64,
    pub grad_lhs: f64,
    pub grad_lhs_fd: f64,
    pub grad_rhs: f64,
    pub s_prime: f64,
    pub s_prime_rhs: f64,
}

impl SensitivityReport {
    pub fn grad_slack(&self) -> f64 {
        self.grad_rhs - self.grad_lhs
    }

    pub fn s_prime_slack(&self) -> f64 {
        self.s_prime_rhs - self.s_prime.abs()
    }
}

fn s_form(st: &SmoothingState, hx: &Element, hs: &Element) -> f64 {
    st.rho * hx.dot(&st.apply_hinv_w(hx)) + hs.dot(&st.apply_hinv(hs)) / st.rho
}

/// `nu` is the barrier parameter of the smoothing barrier
/// ([`crate::cone::Cone::smoothing_parameter`]).
pub fn mu_sensitivity_checks(sys: &KktSystem, st: &SmoothingState, hx: &Element, hs: &Element) -> Result<SensitivityReport> {
    let nu = st.cone().smoothing_parameter();
    let (mu, rho) = (st.mu, st.rho);
    let s_hh = s_form(st, hx, hs);
    debug_assert!((s_norm(st, hx, hs).powi(2) * mu - s_hh).abs() <= 1e-9 * (1.0 + s_hh));

    // d/dmu of eta is phi(z); its w-gradient is (H^{-1} grad phi, -H^{-1} grad phi / rho)
    let hg = st.apply_hinv(&st.grad_phi_z());
    let grad_lhs = (hx.dot(&hg) - hs.dot(&hg) / rho).abs();

    let h = 1e-5 * mu;
    let p = compute_smoothing(st.cone(), &st.x, &st.s, mu + h, rho)?;
    let m = compute_smoothing(st.cone(), &st.x, &st.s, mu - h, rho)?;
    // FD of <h, grad_w eta> in mu
    let (gp, gm) = (gradients(sys, &p), gradients(sys, &m));
    let gl = |g: &(Element, Element)| hx.dot(&g.0) + hs.dot(&g.1);
    let grad_lhs_fd = ((gl(&gp) - gl(&gm)) / (2.0 * h)).abs();
    let s_prime = (s_form(&p, hx, hs) - s_form(&m, hx, hs)) / (2.0 * h);
    Ok(SensitivityReport {
        s_hh,
        grad_lhs,
        grad_lhs_fd,
        grad_rhs: (2.0 * nu / mu).sqrt() * s_hh.max(0.0).sqrt(),
        s_prime,
        s_prime_rhs: rho * (1.0 + 2.0 * nu.sqrt()) / mu * s_hh,
    })
}
