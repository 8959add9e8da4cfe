use proptest::prelude::*;

use symcone::bench::{run_suite, scaling_study, InstanceSource};
use symcone::prelude::*;
use symcone::random;
use symcone::solver::predicted_outer_iterations;

fn lp(rows: &[&[f64]], b: Vec<f64>, c: Vec<f64>) -> ProblemData {
    let n = c.len();
    ProblemData::dense("lp", ConeSpec::new(vec![BlockSpec::orthant(n)]), rows, b, c).unwrap()
}

#[test]
fn one_dimensional_lp() {
    // min x s.t. x = 1: the only feasible point
    let r = solve(&lp(&[&[1.0]], vec![1.0], vec![1.0]), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert!(r.phase1_steps <= 50, "{}", r.phase1_steps);
    assert!((r.x[0] - 1.0).abs() < 1e-12);
    assert_eq!(r.outer_iters, predicted_outer_iterations(1.0, 1e-8, r.sigma));
}

#[test]
fn unbounded_lp_is_flagged() {
    // min -x1 s.t. x1 - x2 = 0, x >= 0 has no finite optimum
    let p = lp(&[&[1.0, -1.0]], vec![0.0], vec![-1.0, 0.0]);
    let cfg = SolverConfig { sigma: SigmaMode::Fixed(0.2), max_phase1: 100_000, ..Default::default() };
    let r = solve(&p, &cfg).unwrap();
    assert_ne!(r.status, Status::Optimal);
    assert!(r.diverging, "{:?} {:?}", r.status, r.message);
}

#[test]
fn iteration_cap_reports_limit() {
    let p = lp(&[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]);
    let r = solve(&p, &SolverConfig { max_outer: 1, ..Default::default() }).unwrap();
    assert_eq!(r.status, Status::IterationLimit);
    assert_eq!(r.status.exit_code(), 4);
}

#[test]
fn bad_config_is_rejected_before_solving() {
    let p = lp(&[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]);
    for cfg in [
        SolverConfig { rho: 0.5, ..Default::default() },
        SolverConfig { mu0: 0.0, ..Default::default() },
        SolverConfig { sigma: SigmaMode::Fixed(1.5), ..Default::default() },
        SolverConfig { eps: -1.0, ..Default::default() },
    ] {
        assert!(matches!(solve(&p, &cfg), Err(Error::Parameter(_))));
    }
}

#[test]
fn solves_are_deterministic() {
    let mut rng = random::rng(17);
    let p = random::feasible_socp(3, 4, &mut rng);
    let cfg = SolverConfig { sigma: SigmaMode::Fixed(0.3), ..Default::default() };
    let (a, b) = (solve(&p, &cfg).unwrap(), solve(&p, &cfg).unwrap());
    assert_eq!(a.x, b.x);
    assert_eq!(a.s, b.s);
    assert_eq!(a.total_newton_steps, b.total_newton_steps);
}

#[test]
fn mixed_cone_problem_solves() {
    let mut rng = random::rng(3);
    let spec = ConeSpec::new(vec![BlockSpec::orthant(3), BlockSpec::soc(4), BlockSpec::psd(3)]);
    let p = random::feasible_problem("mixed", spec, 5, &mut rng);
    let r = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert!(r.gap <= 2.0 * r.nu * 1e-8);
    assert!(r.inner_counts.iter().skip(1).all(|&k| k == 1));
}

#[test]
fn trace_csv_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let r = solve(&lp(&[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]), &SolverConfig::default()).unwrap();
    r.write_trace(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,j,mu,delta,xi,primal_res,dual_res,phi_norm,time_s");
    assert_eq!(text.lines().count(), r.total_newton_steps + 1);
}

#[test]
fn suite_of_tiny_lps() {
    let probs = [
        lp(&[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]),
        lp(&[&[1.0, 2.0, 1.0]], vec![4.0], vec![1.0, 1.0, 3.0]),
        lp(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]], vec![1.0, 2.0], vec![2.0, 1.0, 1.0]),
    ];
    let src: Vec<InstanceSource> = probs.into_iter().map(InstanceSource::Inline).collect();
    let recs = run_suite(&src, "certified", &SolverConfig::default(), 1000.0, 1).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r.status == "Optimal" && r.time_s >= 0.0));
    assert!(run_suite(&[], "x", &SolverConfig::default(), 1000.0, 1).unwrap().is_empty());
}

#[test]
fn forced_cutoff_is_recorded() {
    let src = [InstanceSource::Inline(lp(&[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]))];
    let cfg = SolverConfig { max_outer: 1, ..Default::default() };
    let recs = run_suite(&src, "capped", &cfg, 1000.0, 1).unwrap();
    assert_eq!(recs[0].status, "IterationLimit");
    assert!(!recs[0].solved());
}

#[test]
fn small_scaling_study() {
    let rep = scaling_study(&[4, 16], 2, 3, &SolverConfig::default(), 5, 1).unwrap();
    assert_eq!(rep.points.len(), 4);
    for p in &rep.points {
        assert_eq!(p.status, "Optimal");
        assert_eq!(p.outer_iters, p.predicted_outer);
        assert_eq!(p.max_inner_after_first, 1);
    }
    assert!(rep.r2 >= 0.9, "{}", rep.r2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certified_mode_takes_one_step_per_reduction(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = random::rng(seed);
        let m = 1 + (seed as usize) % (n - 1);
        let p = random::feasible_lp(n, m, &mut rng);
        let cfg = SolverConfig { eps: 1e-6, ..Default::default() };
        let r = solve(&p, &cfg).unwrap();
        prop_assert_eq!(r.status, Status::Optimal);
        prop_assert_eq!(r.outer_iters, predicted_outer_iterations(1.0, 1e-6, r.sigma));
        prop_assert!(r.inner_counts.iter().skip(1).all(|&k| k == 1));
        for t in &r.trace {
            prop_assert!(t.xi >= t.delta - 1e-9);
        }
    }

    #[test]
    fn optimal_points_are_interior_and_feasible(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let p = random::feasible_socp(2, 3, &mut rng);
        let r = solve(&p, &SolverConfig { sigma: SigmaMode::Fixed(0.2), ..Default::default() }).unwrap();
        prop_assert_eq!(r.status, Status::Optimal);
        let cone = Cone::new(p.cone.clone()).unwrap();
        prop_assert!(cone.in_interior(&r.x) && cone.in_interior(&r.s));
        let scale = 1.0 + p.a.norm() + p.b.norm() + p.c.norm();
        prop_assert!(r.primal_res <= 1e-8 * scale && r.dual_res <= 1e-8 * scale);
    }
}
