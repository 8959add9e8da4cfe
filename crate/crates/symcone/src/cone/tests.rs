use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;

use super::*;
use crate::random;

fn v(x: &[f64]) -> Element {
    Element::from_column_slice(x)
}

fn cone(blocks: Vec<BlockSpec>) -> Cone {
    Cone::new(ConeSpec::new(blocks)).unwrap()
}

fn close(a: &Element, b: &Element, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn products() {
    let o = cone(vec![BlockSpec::orthant(2)]);
    assert_eq!(o.jordan_product(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 8.0]));
    let q = cone(vec![BlockSpec::soc(2)]);
    assert_eq!(q.jordan_product(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), v(&[0.0, 1.0]));
    let k = cone(vec![BlockSpec::orthant(2), BlockSpec::soc(3), BlockSpec::psd(3)]);
    let x = random::element(&k, &mut random::rng(1));
    assert!(close(&k.jordan_product(&x, &k.identity()).unwrap(), &x, 1e-15));
}

#[test]
fn spectral_examples() {
    let q = cone(vec![BlockSpec::soc(3)]);
    let sp = q.spectral_decompose(&v(&[3.0, 4.0, 0.0])).unwrap();
    assert_eq!(sp[0].eigenvalues, vec![7.0, -1.0]);
    let c = q.block(0).idempotents(&sp[0]);
    assert!(close(&c[0], &v(&[0.5, 0.5, 0.0]), 1e-15));
    assert!(close(&c[1], &v(&[0.5, -0.5, 0.0]), 1e-15));

    let o = cone(vec![BlockSpec::orthant(2)]);
    let sp = o.spectral_decompose(&v(&[5.0, -2.0])).unwrap();
    assert_eq!(sp[0].eigenvalues, vec![5.0, -2.0]);

    let p = cone(vec![BlockSpec::psd(2)]);
    // diag(2, 3) in svec order (Z11, sqrt2 Z21, Z22)
    let sp = p.spectral_decompose(&v(&[2.0, 0.0, 3.0])).unwrap();
    assert!((sp[0].eigenvalues[0] - 3.0).abs() < 1e-14 && (sp[0].eigenvalues[1] - 2.0).abs() < 1e-14);
    let c = p.block(0).idempotents(&sp[0]);
    assert!(close(&c[0], &v(&[0.0, 0.0, 1.0]), 1e-14));
    assert!(close(&c[1], &v(&[1.0, 0.0, 0.0]), 1e-14));
}

#[test]
fn degenerate_soc_frame_is_first_axis() {
    let q = cone(vec![BlockSpec::soc(4)]);
    let sp = q.spectral_decompose(&v(&[2.0, 0.0, 0.0, 0.0])).unwrap();
    match &sp[0].frame {
        Frame::Arrow { u } => assert_eq!(u.as_slice(), &[1.0, 0.0, 0.0]),
        f => panic!("{f:?}"),
    }
}

#[test]
fn scalar_calculus_examples() {
    let o = cone(vec![BlockSpec::orthant(2)]);
    assert!(close(&o.scalar_calculus(ScalarFn::Sqrt, &v(&[4.0, 9.0])).unwrap(), &v(&[2.0, 3.0]), 1e-15));
    let q = cone(vec![BlockSpec::soc(3)]);
    let inv = q.scalar_calculus(ScalarFn::Inv, &v(&[3.0, 4.0, 0.0])).unwrap();
    assert!(close(&inv, &v(&[-3.0 / 7.0, 4.0 / 7.0, 0.0]), 1e-15));
    let p = cone(vec![BlockSpec::psd(3)]);
    assert!(p.scalar_calculus(ScalarFn::Log, &p.identity()).unwrap().norm() < 1e-15);
    assert!(matches!(o.scalar_calculus(ScalarFn::Sqrt, &v(&[-1.0, 1.0])), Err(Error::Domain(_))));
    assert!(matches!(o.scalar_calculus(ScalarFn::Inv, &v(&[0.0, 1.0])), Err(Error::Domain(_))));
}

#[test]
fn det_and_interior() {
    let q = cone(vec![BlockSpec::soc(3)]);
    assert_eq!(q.det(&v(&[3.0, 4.0, 0.0])).unwrap().1, -7.0);
    let k = cone(vec![BlockSpec::orthant(2), BlockSpec::soc(3), BlockSpec::psd(2)]);
    let (dets, tot) = k.det(&k.identity()).unwrap();
    assert!(dets.iter().all(|&d| (d - 1.0).abs() < 1e-15) && (tot - 1.0).abs() < 1e-15);
    assert_eq!(cone(vec![BlockSpec::orthant(2)]).det(&v(&[2.0, 5.0])).unwrap().1, 10.0);
    assert!(k.in_interior(&k.identity()));
    assert!(!q.in_interior(&v(&[1.0, 1.0, 0.0])));
    assert!(cone(vec![BlockSpec::orthant(2)]).in_interior(&v(&[1e-300, 1.0])));
}

#[test]
fn barrier_examples() {
    let o = cone(vec![BlockSpec::orthant(2)]);
    let x = v(&[2.0, 4.0]);
    assert!((o.barrier_value(&x).unwrap() + 8f64.ln()).abs() < 1e-15);
    assert!(close(&o.barrier_gradient(&x).unwrap(), &v(&[-0.5, -0.25]), 1e-15));
    let k = cone(vec![BlockSpec::orthant(2), BlockSpec::psd(2)]);
    assert_eq!(k.barrier_value(&k.identity()).unwrap(), 0.0);
    assert!(close(&k.barrier_gradient(&k.identity()).unwrap(), &(-k.identity()), 1e-15));
    let p = cone(vec![BlockSpec::psd(2)]);
    assert!((p.barrier_value(&v(&[1.0, 0.0, std::f64::consts::E])).unwrap() + 1.0).abs() < 1e-15);
    assert!(matches!(o.barrier_value(&v(&[1.0, 0.0])), Err(Error::Domain(_))));
}

#[test]
fn hessian_examples() {
    let o = cone(vec![BlockSpec::orthant(2)]);
    let z = v(&[1.0, 2.0]);
    let h = o.hessian_apply(&z, &v(&[1.0, 1.0])).unwrap();
    assert!(close(&h, &v(&[1.0, 0.25]), 1e-15));
    assert!(close(&o.hessian_inv_apply(&z, &h).unwrap(), &v(&[1.0, 1.0]), 1e-15));
}

/// Dense Hessian of `-ln(z0^2 - |zb|^2)` from its closed form
/// `(2/det^2)(2 Jz (Jz)^T) - (2/det) J`, written out entrywise.
fn soc_dense_hessian(z: &[f64]) -> DMatrix<f64> {
    let d = z.len();
    let det = z[0] * z[0] - z[1..].iter().map(|t| t * t).sum::<f64>();
    let jz: Vec<f64> = (0..d).map(|i| if i == 0 { z[0] } else { -z[i] }).collect();
    DMatrix::from_fn(d, d, |i, j| {
        let jij = if i == j {
            if i == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        };
        4.0 * jz[i] * jz[j] / (det * det) - 2.0 * jij / det
    })
}

#[test]
fn soc_hessian_matches_dense_oracle() {
    let q = cone(vec![BlockSpec::soc(3)]);
    let z = v(&[2.0, 1.0, 0.0]);
    let hd = soc_dense_hessian(z.as_slice());
    let mut rng = random::rng(7);
    for _ in 0..20 {
        let h = random::normal_vec(&mut rng, 3);
        let a = q.hessian_apply(&z, &h).unwrap();
        assert!(close(&a, &(&hd * &h), 1e-13));
        let b = q.hessian_inv_apply(&z, &a).unwrap();
        assert!(close(&b, &h, 1e-12));
        let inv = hd.clone().try_inverse().unwrap();
        assert!(close(&q.hessian_inv_apply(&z, &h).unwrap(), &(&inv * &h), 1e-12));
    }
}

#[test]
fn rank_identity_inner() {
    let k = cone(vec![BlockSpec::orthant(3), BlockSpec::soc(4)]);
    assert_eq!(k.rank(), 5);
    assert_eq!(cone(vec![BlockSpec::soc(3)]).identity(), v(&[1.0, 0.0, 0.0]));
    let k = cone(vec![BlockSpec::orthant(2), BlockSpec::psd(2)]);
    assert_eq!(k.inner(&k.identity(), &k.identity()), 4.0);
    assert_eq!(k.dim(), 5);
}

#[test]
fn spec_validation() {
    assert!(Cone::new(ConeSpec::new(vec![])).is_err());
    assert!(Cone::new(ConeSpec::new(vec![BlockSpec::soc(1)])).is_err());
    assert!(Cone::new(ConeSpec::new(vec![BlockSpec::orthant(0)])).is_err());
    assert!(Cone::new(ConeSpec::new(vec![BlockSpec::new("exp", 3)])).is_err());
    let k = cone(vec![BlockSpec::orthant(2)]);
    assert!(matches!(k.jordan_product(&v(&[1.0]), &v(&[1.0, 2.0])), Err(Error::Structural(_))));
}

#[test]
fn custom_registry() {
    let mut reg = BlockRegistry::empty();
    reg.register("nonneg", |n| BlockRegistry::default().build(&BlockSpec::orthant(n)));
    let c = Cone::with_registry(ConeSpec::new(vec![BlockSpec::new("nonneg", 3)]), &reg).unwrap();
    assert_eq!(c.rank(), 3);
    assert!(Cone::with_registry(ConeSpec::new(vec![BlockSpec::soc(3)]), &reg).is_err());
    assert_eq!(BlockRegistry::default().names(), vec!["orthant", "psd", "soc"]);
}

#[test]
fn quad_and_hessian_relation() {
    // hessian of -ln det equals P(z)^{-1} / |c|^2 blockwise
    let k = cone(vec![BlockSpec::orthant(2), BlockSpec::soc(3), BlockSpec::psd(3)]);
    let mut rng = random::rng(11);
    let z = random::interior(&k, &mut rng, 0.5, 3.0);
    let h = random::element(&k, &mut rng);
    let a = k.hessian_apply(&z, &h).unwrap();
    let b = k.quad_inv_apply(&z, &h).unwrap();
    for (off, blk) in k.iter() {
        let r = off..off + blk.dim();
        let w = 1.0 / blk.idempotent_norm_sq();
        for i in r {
            assert!((a[i] - w * b[i]).abs() <= 1e-11 * (1.0 + a.norm()));
        }
    }
    let pz = k.quad_apply(&z, &b).unwrap();
    assert!(close(&pz, &h, 1e-11));
}

fn families() -> Vec<ConeSpec> {
    vec![
        ConeSpec::new(vec![BlockSpec::orthant(4)]),
        ConeSpec::new(vec![BlockSpec::soc(5)]),
        ConeSpec::new(vec![BlockSpec::psd(3)]),
        ConeSpec::new(vec![BlockSpec::orthant(2), BlockSpec::soc(3), BlockSpec::psd(2)]),
    ]
}

fn any_case() -> impl Strategy<Value = (usize, u64)> {
    (0usize..4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_and_frame((f, seed) in any_case()) {
        let k = Cone::new(families()[f].clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = random::element(&k, &mut rng);
        let sps = k.spectral_decompose(&x).unwrap();
        let vals: Vec<Vec<f64>> = sps.iter().map(|s| s.eigenvalues.clone()).collect();
        prop_assert!((k.reconstruct(&sps, &vals) - &x).norm() <= 1e-12 * (1.0 + x.norm()));
        for (bi, (_, b)) in k.iter().enumerate() {
            let c = b.idempotents(&sps[bi]);
            let mut e = vec![0.0; b.dim()];
            b.identity(&mut e);
            let sum = c.iter().fold(Element::zeros(b.dim()), |a, ci| a + ci);
            prop_assert!((sum - Element::from_vec(e)).norm() <= 1e-12);
            for i in 0..c.len() {
                for j in 0..c.len() {
                    let mut p = vec![0.0; b.dim()];
                    b.product(c[i].as_slice(), c[j].as_slice(), &mut p);
                    let p = Element::from_vec(p);
                    let target = if i == j { c[i].clone() } else { Element::zeros(b.dim()) };
                    prop_assert!((p - target).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn jordan_inner_compatibility((f, seed) in any_case()) {
        let k = Cone::new(families()[f].clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (x, y, w) = (random::element(&k, &mut rng), random::element(&k, &mut rng), random::element(&k, &mut rng));
        let a = k.inner(&k.jordan_product(&x, &y).unwrap(), &w);
        let b = k.inner(&y, &k.jordan_product(&x, &w).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + x.norm() * y.norm() * w.norm()));
    }

    #[test]
    fn barrier_identities((f, seed) in any_case()) {
        let k = Cone::new(families()[f].clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = random::interior(&k, &mut rng, 0.2, 5.0);
        let g = k.barrier_gradient(&z).unwrap();
        let nu = k.inner(&g, &k.hessian_inv_apply(&z, &g).unwrap());
        prop_assert!((nu - k.rank() as f64).abs() <= 1e-10 * k.rank() as f64, "{} vs {}", nu, k.rank());

        let h1 = random::element(&k, &mut rng);
        let h2 = random::element(&k, &mut rng);
        let a = k.inner(&h1, &k.hessian_apply(&z, &h2).unwrap());
        let b = k.inner(&h2, &k.hessian_apply(&z, &h1).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));

        let back = k.hessian_inv_apply(&z, &k.hessian_apply(&z, &h1).unwrap()).unwrap();
        prop_assert!((back - &h1).norm() <= 1e-12 * (1.0 + h1.norm()) * 10.0);
    }

    #[test]
    fn barrier_finite_differences((f, seed) in any_case()) {
        let k = Cone::new(families()[f].clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = random::interior(&k, &mut rng, 0.5, 3.0);
        let h = random::element(&k, &mut rng);
        let t = 1e-5 / (1.0 + h.norm());
        let fd = (k.barrier_value(&(&z + &h * t)).unwrap() - k.barrier_value(&(&z - &h * t)).unwrap()) / (2.0 * t);
        let cf = k.inner(&k.barrier_gradient(&z).unwrap(), &h);
        prop_assert!((fd - cf).abs() <= 1e-6 * (1.0 + cf.abs()));
        let gd = (k.barrier_gradient(&(&z + &h * t)).unwrap() - k.barrier_gradient(&(&z - &h * t)).unwrap()) / (2.0 * t);
        let hh = k.hessian_apply(&z, &h).unwrap();
        prop_assert!((gd - &hh).norm() <= 1e-5 * (1.0 + hh.norm()));
    }

    #[test]
    fn orthant_self_concordance(seed in any::<u64>()) {
        let k = Cone::new(ConeSpec::new(vec![BlockSpec::orthant(6)])).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = random::interior(&k, &mut rng, 0.01, 10.0);
        let h = random::element(&k, &mut rng);
        let d3: f64 = -2.0 * z.iter().zip(h.iter()).map(|(zi, hi)| hi.powi(3) / zi.powi(3)).sum::<f64>();
        let d2 = k.inner(&h, &k.hessian_apply(&z, &h).unwrap());
        prop_assert!(d3.abs() <= 2.0 * d2.powf(1.5) * (1.0 + 1e-12));
    }
}
