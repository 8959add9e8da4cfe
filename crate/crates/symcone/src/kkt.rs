//! Schur complement `A W^{-1} A^T` with per-cone closed forms, the Newton
//! step and the generic saddle solve.
//!
//! `W^{-1} = (rho/mu) P(z)`; each block adds `(rho/mu) A_b P(z_b) A_b^T`:
//! `A diag(z)^2 A^T` on orthants, `2 (Az)(Az)^T + det(z) A A^T - 2 det(z) (Ae)(Ae)^T`
//! on second-order blocks and `A (Z (x)_s Z) A^T` on PSD blocks.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::cone::{Cone, Element};
use crate::error::{Error, Result};
use crate::io::ProblemData;
use crate::smoothing::SmoothingState;

/// Problem data prepared for the linear algebra: shared cone, `A A^T` and
/// its factorization (the surjectivity certificate).
#[derive(Clone)]
pub struct KktSystem {
    pub cone: Arc<Cone>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: Element,
    pub aat: DMatrix<f64>,
    aat_chol: Llt,
    /// Compressed columns of `A`, kept when it is sparse enough to pay off.
    sparse: Option<SparseColumns>,
}

/// Column-compressed nonzeros of a dense matrix.
#[derive(Clone, Debug)]
struct SparseColumns {
    start: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl SparseColumns {
    /// `None` when at least a quarter of the entries are nonzero.
    fn from_dense(a: &DMatrix<f64>) -> Option<Self> {
        let mut start = Vec::with_capacity(a.ncols() + 1);
        let mut entries = vec![];
        for col in a.column_iter() {
            start.push(entries.len());
            entries.extend(col.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)));
        }
        start.push(entries.len());
        (entries.len() * 4 < a.len()).then_some(SparseColumns { start, entries })
    }

    fn col(&self, j: usize) -> &[(usize, f64)] {
        &self.entries[self.start[j]..self.start[j + 1]]
    }
}

impl std::fmt::Debug for KktSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KktSystem").field("m", &self.m()).field("n", &self.a.ncols()).finish()
    }
}

impl KktSystem {
    pub fn new(p: &ProblemData) -> Result<Self> {
        let cone = Arc::new(p.validate()?);
        let aat = &p.a * p.a.transpose();
        let aat_chol = Llt::new(&aat, 0.0).ok_or_else(|| {
            let dep = p.dependent_rows();
            Error::Structural(format!("A A^T is not positive definite; dependent rows: {dep:?}"))
        })?;
        let sparse = SparseColumns::from_dense(&p.a);
        Ok(KktSystem { cone, a: p.a.clone(), b: p.b.clone(), c: p.c.clone(), aat, aat_chol, sparse })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn apply(&self, x: &Element) -> DVector<f64> {
        match &self.sparse {
            Some(sp) => {
                let mut out = DVector::zeros(self.m());
                let o = out.as_mut_slice();
                for (j, &xj) in x.as_slice().iter().enumerate() {
                    if xj != 0.0 {
                        for &(i, v) in sp.col(j) {
                            o[i] += v * xj;
                        }
                    }
                }
                out
            }
            None => &self.a * x,
        }
    }

    pub fn adjoint(&self, v: &DVector<f64>) -> Element {
        match &self.sparse {
            Some(sp) => {
                let vs = v.as_slice();
                Element::from_fn(self.a.ncols(), |j, _| sp.col(j).iter().map(|&(i, a)| a * vs[i]).sum())
            }
            None => self.a.tr_mul(v),
        }
    }

    /// `(A A^T)^{-1} v`.
    pub fn aat_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.aat_chol.solve(v)
    }

    /// Orthogonal projection onto `ker A`.
    pub fn project_kernel(&self, g: &Element) -> Element {
        let mut out = g - self.adjoint(&self.aat_solve(&self.apply(g)));
        // one refinement sweep
        let corr = self.adjoint(&self.aat_solve(&self.apply(&out)));
        out -= corr;
        out
    }

    pub fn primal_residual(&self, x: &Element) -> DVector<f64> {
        self.apply(x) - &self.b
    }

    pub fn dual_residual(&self, lambda: &DVector<f64>, s: &Element) -> Element {
        self.adjoint(lambda) + s - &self.c
    }
}

/// Dense Cholesky factor `L L^T` stored column-major. Both the
/// factorization and the triangular solves run over contiguous column
/// slices, which matters for the many small systems of a solve.
#[derive(Clone, Debug)]
pub struct Llt {
    n: usize,
    l: Vec<f64>,
}

impl Llt {
    /// Factors `m + shift I`, reading only the lower triangle of `m`.
    pub fn new(m: &DMatrix<f64>, shift: f64) -> Option<Self> {
        let n = m.nrows();
        let mut l = m.as_slice().to_vec();
        for j in 0..n {
            let (done, rest) = l.split_at_mut(j * n);
            let cj = &mut rest[j..n];
            cj[0] += shift;
            for k in 0..j {
                let ck = &done[k * n + j..k * n + n];
                let f = ck[0];
                if f != 0.0 {
                    for (a, b) in cj.iter_mut().zip(ck) {
                        *a -= f * b;
                    }
                }
            }
            let d = cj[0];
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            for a in cj.iter_mut() {
                *a /= d;
            }
        }
        Some(Llt { n, l })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = b.clone();
        let xs = x.as_mut_slice();
        for j in 0..n {
            let c = &self.l[j * n + j..j * n + n];
            xs[j] /= c[0];
            let v = xs[j];
            for (a, l) in xs[j + 1..].iter_mut().zip(&c[1..]) {
                *a -= l * v;
            }
        }
        for j in (0..n).rev() {
            let c = &self.l[j * n + j..j * n + n];
            let dot: f64 = c[1..].iter().zip(&xs[j + 1..]).map(|(l, v)| l * v).sum();
            xs[j] = (xs[j] - dot) / c[0];
        }
        x
    }

    /// The lower-triangular factor.
    pub fn l(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if i >= j { self.l[j * self.n + i] } else { 0.0 })
    }
}

/// Factorized `M = A W^{-1} A^T`.
#[derive(Clone)]
pub struct SchurHandle {
    pub matrix: DMatrix<f64>,
    chol: Llt,
    pub regularization: f64,
}

impl SchurHandle {
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Cholesky with an escalating diagonal shift `{0, 1e-14, 1e-12, 1e-10} * |M|`.
pub fn factor_spd(m: &DMatrix<f64>) -> Result<(Llt, f64)> {
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    for reg in [0.0, 1e-14, 1e-12, 1e-10] {
        if let Some(ch) = Llt::new(m, reg * scale) {
            if reg > 0.0 {
                warn!("Schur factorization needed regularization {reg:e}");
            }
            return Ok((ch, reg * scale));
        }
    }
    let min_diag = m.diagonal().min();
    Err(Error::Numerical(format!("Cholesky failed after maximal regularization (min diagonal {min_diag:e})")))
}

/// `M = A W^{-1} A^T` from the per-block closed forms.
pub fn schur_matrix(sys: &KktSystem, st: &SmoothingState) -> DMatrix<f64> {
    let m = sys.m();
    let mut mat = DMatrix::zeros(m, m);
    let scale = st.rho / st.mu;
    for (bi, (off, b)) in sys.cone.iter().enumerate() {
        let sp = &st.frames()[bi];
        match (&sys.sparse, b.quad_diagonal(sp)) {
            (Some(cols), Some(q)) => {
                // sum_j scale q_j a_j a_j^T over the nonzeros of each column
                let rows = m;
                let ms = mat.as_mut_slice();
                for (k, qk) in q.iter().enumerate() {
                    let col = cols.col(off + k);
                    let w = scale * qk;
                    for &(c, vc) in col {
                        let f = w * vc;
                        for &(r, vr) in col {
                            ms[c * rows + r] += f * vr;
                        }
                    }
                }
            }
            _ => b.quad_schur_add(sys.a.columns(off, b.dim()), sp, scale, &mut mat),
        }
    }
    // symmetrize roundoff
    let t = mat.transpose();
    (mat + t) * 0.5
}

pub fn assemble_schur(sys: &KktSystem, st: &SmoothingState) -> Result<SchurHandle> {
    let matrix = schur_matrix(sys, st);
    let (chol, regularization) = factor_spd(&matrix)?;
    Ok(SchurHandle { matrix, chol, regularization })
}

/// Dense reference: `A W^{-1} A^T` by applying `W^{-1}` to unit vectors.
pub fn schur_dense_oracle(sys: &KktSystem, st: &SmoothingState) -> DMatrix<f64> {
    let n = sys.cone.dim();
    let mut winv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = sys.cone.zeros();
        e[j] = 1.0;
        winv.set_column(j, &st.apply_winv(&e));
    }
    &sys.a * winv * sys.a.transpose()
}

#[derive(Clone, Debug)]
pub struct NewtonDirection {
    pub dx: Element,
    pub ds: Element,
    pub dlambda: DVector<f64>,
}

/// Solves
/// `A dx = -rp`, `ds + A^T dl = -rd`, `H^{-1} W dx + H^{-1} ds / rho = r`
/// through `M dl = -rho rp - rho A W^{-1} H r - A W^{-1} rd`,
/// `ds = -rd - A^T dl`, `dx = W^{-1} (H r - ds / rho)`.
/// With zero residuals this is the reduced system of the method.
pub fn newton_step(
    sys: &KktSystem,
    st: &SmoothingState,
    r: &Element,
    rp: Option<&DVector<f64>>,
    rd: Option<&Element>,
    schur: &SchurHandle,
) -> NewtonDirection {
    let rho = st.rho;
    let mut rhs = sys.apply(&st.apply_winv_h(r)) * (-rho);
    if let Some(rp) = rp {
        rhs -= rp * rho;
    }
    if let Some(rd) = rd {
        rhs -= sys.apply(&st.apply_winv(rd));
    }
    let mut dlambda = schur.solve(&rhs);
    let mut ds = -sys.adjoint(&dlambda);
    if let Some(rd) = rd {
        ds -= rd;
    }
    let mut dx = st.apply_winv(&(st.apply_h(r) - &ds / rho));
    // M is ill-conditioned near the boundary; one refinement step against
    // A itself keeps A dx = -rp from drifting
    let mut e = sys.apply(&dx);
    if let Some(rp) = rp {
        e += rp;
    }
    if e.amax() > 1e-13 * (1.0 + sys.b.amax()) {
        let fix = schur.solve(&e) * (-rho);
        let back = sys.adjoint(&fix);
        dx += st.apply_winv(&back) / rho;
        ds -= back;
        dlambda += fix;
    }
    NewtonDirection { dx, ds, dlambda }
}

/// Residual norms of the three block equations solved by [`newton_step`].
pub fn newton_residual(
    sys: &KktSystem,
    st: &SmoothingState,
    r: &Element,
    rp: Option<&DVector<f64>>,
    rd: Option<&Element>,
    d: &NewtonDirection,
) -> [f64; 3] {
    let zero_m = DVector::zeros(sys.m());
    let zero_n = sys.cone.zeros();
    let rp = rp.unwrap_or(&zero_m);
    let rd = rd.unwrap_or(&zero_n);
    let r1 = (sys.apply(&d.dx) + rp).norm();
    let r2 = (&d.ds + sys.adjoint(&d.dlambda) + rd).norm();
    let r3 = (st.apply_hinv_w(&d.dx) + st.apply_hinv(&d.ds) / st.rho - r).norm();
    [r1, r2, r3]
}

/// Solves the saddle system with Hessian blocks
/// `[rho H^{-1} W, -H^{-1} W; -H^{-1} W, -H^{-1}/rho]` restricted to
/// `ker A` in the first argument, for right-hand side `(g_x, g_s)` with
/// `g_x` taken modulo `range A^T`:
/// `M nu = A W^{-1} g_x - rho A g_s`, `dx = W^{-1}(g_x - A^T nu)/rho - g_s`,
/// `ds = -rho W dx - rho H g_s`.
/// For `g = -grad eta` at a dual-feasible point this is the Newton step
/// with `nu = -dlambda`.
pub fn saddle_solve(sys: &KktSystem, st: &SmoothingState, gx: &Element, gs: &Element, schur: &SchurHandle) -> (Element, Element) {
    let rho = st.rho;
    let rhs = sys.apply(&st.apply_winv(gx)) - sys.apply(gs) * rho;
    let nu = schur.solve(&rhs);
    let dx = st.apply_winv(&(gx - sys.adjoint(&nu))) / rho - gs;
    let ds = (st.apply_w(&dx) + st.apply_h(gs)) * (-rho);
    (dx, ds)
}

/// `sqrt((rho <dx, H^{-1} W dx> + <ds, H^{-1} ds> / rho) / mu)`.
pub fn s_norm(st: &SmoothingState, dx: &Element, ds: &Element) -> f64 {
    let qx = dx.dot(&st.apply_hinv_w(dx));
    let qs = ds.dot(&st.apply_hinv(ds));
    ((st.rho * qx + qs / st.rho) / st.mu).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{BlockSpec, ConeSpec};
    use crate::random;
    use crate::smoothing::compute_smoothing;

    fn lp() -> ProblemData {
        ProblemData::dense("lp", ConeSpec::new(vec![BlockSpec::orthant(2)]), &[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn llt_matches_dense_solve() {
        let mut rng = random::rng(5);
        let g = DMatrix::from_fn(7, 7, |_, _| random::normal(&mut rng));
        let m = &g * g.transpose() + DMatrix::identity(7, 7);
        let ch = Llt::new(&m, 0.0).unwrap();
        let l = ch.l();
        assert!((&l * l.transpose() - &m).norm() < 1e-12 * m.norm());
        let b = random::normal_vec(&mut rng, 7);
        assert!((&m * ch.solve(&b) - &b).norm() < 1e-12 * b.norm());
        assert!(Llt::new(&-m, 0.0).is_none());
    }

    #[test]
    fn orthant_schur_example() {
        let sys = KktSystem::new(&lp()).unwrap();
        // z = (1, 2) with mu = rho = 1: w = z - 1/z
        let x = Element::from_column_slice(&[0.0, 1.5]);
        let st = compute_smoothing(&sys.cone, &x, &Element::zeros(2), 1.0, 1.0).unwrap();
        assert!((st.z[0] - 1.0).abs() < 1e-15 && (st.z[1] - 2.0).abs() < 1e-15);
        let h = assemble_schur(&sys, &st).unwrap();
        assert!((h.matrix[(0, 0)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn identity_point_schur() {
        let mut rng = random::rng(3);
        let spec = ConeSpec::new(vec![BlockSpec::orthant(2), BlockSpec::soc(3), BlockSpec::psd(2)]);
        let p = random::feasible_problem("t", spec, 3, &mut rng);
        let sys = KktSystem::new(&p).unwrap();
        let e = sys.cone.identity();
        let st = compute_smoothing(&sys.cone, &e, &e, 1.0, 1.0).unwrap();
        let m = schur_matrix(&sys, &st);
        // at z = e, P(e) = I
        assert!((&m - &sys.aat).norm() < 1e-12 * sys.aat.norm());
    }

    #[test]
    fn zero_rhs_gives_zero_step() {
        let sys = KktSystem::new(&lp()).unwrap();
        let x = Element::from_column_slice(&[0.5, 0.5]);
        let st = compute_smoothing(&sys.cone, &x, &Element::from_column_slice(&[0.3, 0.9]), 1.0, 1.0).unwrap();
        let h = assemble_schur(&sys, &st).unwrap();
        let d = newton_step(&sys, &st, &Element::zeros(2), None, None, &h);
        assert_eq!(d.dx.norm() + d.ds.norm() + d.dlambda.norm(), 0.0);
        let (dx, ds) = saddle_solve(&sys, &st, &Element::zeros(2), &Element::zeros(2), &h);
        assert_eq!(dx.norm() + ds.norm(), 0.0);
        assert_eq!(s_norm(&st, &dx, &ds), 0.0);
    }

    #[test]
    fn sparse_columns_match_dense_products() {
        let mut rng = random::rng(11);
        let spec = ConeSpec::new(vec![BlockSpec::orthant(30), BlockSpec::soc(4)]);
        let mut p = random::feasible_problem("sp", spec, 6, &mut rng);
        // sparsify, keeping a diagonal so rows stay independent
        for ((i, j), v) in p.a.clone().iter().enumerate().map(|(k, v)| ((k % 6, k / 6), v)) {
            if i != j && (i + 2 * j) % 7 != 0 {
                p.a[(i, j)] = 0.0;
            } else {
                p.a[(i, j)] = *v;
            }
        }
        let sys = KktSystem::new(&p).unwrap();
        assert!(sys.sparse.is_some());
        let x = random::element(&sys.cone, &mut rng);
        let v = random::normal_vec(&mut rng, 6);
        assert!((sys.apply(&x) - &p.a * &x).norm() < 1e-12);
        assert!((sys.adjoint(&v) - p.a.tr_mul(&v)).norm() < 1e-12);
        let st = compute_smoothing(&sys.cone, &x, &random::element(&sys.cone, &mut rng), 0.3, 2.0).unwrap();
        let m = schur_matrix(&sys, &st);
        let oracle = schur_dense_oracle(&sys, &st);
        assert!((&m - &oracle).norm() <= 1e-11 * oracle.norm());
    }
}
