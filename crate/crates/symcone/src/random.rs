//! Seeded generators for random elements and strictly feasible instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cone::{svec, BlockSpec, Cone, ConeSpec, Element};
use crate::io::ProblemData;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Standard normal entries in every coordinate.
pub fn element<R: Rng>(cone: &Cone, rng: &mut R) -> Element {
    normal_vec(rng, cone.dim())
}

/// A point whose eigenvalues lie in `[lo, hi]` on every block.
pub fn interior<R: Rng>(cone: &Cone, rng: &mut R, lo: f64, hi: f64) -> Element {
    let mut out = cone.zeros();
    for (off, b) in cone.iter() {
        let slot = &mut out.as_mut_slice()[off..off + b.dim()];
        match b.kind() {
            "soc" => {
                let l1 = rng.random_range(lo..hi);
                let l2 = rng.random_range(lo..hi);
                let mut u = normal_vec(rng, b.dim() - 1);
                let nu = u.norm();
                if nu > 0.0 {
                    u /= nu;
                }
                slot[0] = 0.5 * (l1 + l2);
                for i in 1..b.dim() {
                    slot[i] = 0.5 * (l1 - l2) * u[i - 1];
                }
            }
            "psd" => {
                let n = b.order();
                let g = DMatrix::from_fn(n, n, |_, _| normal(rng));
                let q = g.qr().q();
                let vals: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
                let mut qd = q.clone();
                for (j, mut c) in qd.column_iter_mut().enumerate() {
                    c *= vals[j];
                }
                svec::svec_into(&(&qd * q.transpose()), slot);
            }
            _ => {
                for v in slot.iter_mut() {
                    *v = rng.random_range(lo..hi);
                }
            }
        }
    }
    out
}

/// Random product cone with block sizes up to `max_dim`.
pub fn cone_spec<R: Rng>(rng: &mut R, blocks: usize, max_dim: usize) -> ConeSpec {
    let max_dim = max_dim.max(2);
    ConeSpec::new(
        (0..blocks)
            .map(|_| match rng.random_range(0..3) {
                0 => BlockSpec::orthant(rng.random_range(1..=max_dim)),
                1 => BlockSpec::soc(rng.random_range(2..=max_dim)),
                _ => BlockSpec::psd(rng.random_range(1..=max_dim.min(4))),
            })
            .collect(),
    )
}

/// Strictly feasible instance over `spec` with `m` Gaussian rows:
/// `b = A x*`, `c = A^T l* + s*` for interior `x*`, `s*`.
pub fn feasible_problem<R: Rng>(name: &str, spec: ConeSpec, m: usize, rng: &mut R) -> ProblemData {
    let cone = Cone::new(spec.clone()).expect("valid spec");
    let n = cone.dim();
    let a = DMatrix::from_fn(m, n, |_, _| normal(rng));
    let xs = interior(&cone, rng, 0.5, 1.5);
    let ss = interior(&cone, rng, 0.5, 1.5);
    let ls = normal_vec(rng, m);
    let b = &a * &xs;
    let c = a.transpose() * ls + ss;
    ProblemData::new(name, spec, a, b, c, 0.0)
}

/// Strictly feasible LP with `n` nonnegative variables and `m` rows.
pub fn feasible_lp<R: Rng>(n: usize, m: usize, rng: &mut R) -> ProblemData {
    feasible_problem(&format!("lp_n{n}_m{m}"), ConeSpec::new(vec![BlockSpec::orthant(n)]), m, rng)
}

/// Strictly feasible SOCP made of `k` second-order blocks of dimension 3..=5.
pub fn feasible_socp<R: Rng>(k: usize, m: usize, rng: &mut R) -> ProblemData {
    let spec = ConeSpec::new((0..k).map(|_| BlockSpec::soc(rng.random_range(3..=5))).collect());
    feasible_problem(&format!("socp_k{k}_m{m}"), spec, m, rng)
}
