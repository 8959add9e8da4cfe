//! Two-phase path-following smoothing Newton driver.
//!
//! Phase 1 moves the least-squares starting triple into the neighborhood
//! `xi <= kappa` at `mu0` using a homotopy on the frozen initial gradient.
//! Phase 2 takes unit Newton steps until `xi <= kappa`, then shrinks
//! `mu <- sigma mu`, until `mu <= eps`.

pub mod sigma;
pub mod trace;

use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone::Element;
use crate::error::{Error, Result};
use crate::io::ProblemData;
use crate::kkt::{assemble_schur, newton_step, s_norm, saddle_solve, KktSystem, NewtonDirection, SchurHandle};
use crate::merit::{merit_delta, merit_xi};
use crate::smoothing::{compute_smoothing, SmoothingState};

pub use sigma::{certified_sigma, SigmaMode, SigmaSchedule};
pub use trace::TraceRecord;

/// Neighborhood radius; fixed.
pub const KAPPA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rho: f64,
    pub kappa: f64,
    pub mu0: f64,
    pub eps: f64,
    pub sigma: SigmaMode,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_phase1: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Use `max(1, <x00, s00+>/nu)` instead of `mu0`.
    pub mu0_heuristic: bool,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            kappa: KAPPA,
            mu0: 1.0,
            eps: 1e-8,
            sigma: SigmaMode::Certified,
            max_outer: 100_000,
            max_inner: 50,
            max_phase1: 1000,
            time_limit: None,
            mu0_heuristic: false,
            record_trace: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(Error::Parameter(format!("rho must be >= 1, got {}", self.rho)));
        }
        if self.kappa != KAPPA {
            return Err(Error::Parameter(format!("kappa is fixed at {KAPPA}, got {}", self.kappa)));
        }
        if !(self.mu0 > 0.0) || !self.mu0.is_finite() {
            return Err(Error::Parameter(format!("mu0 must be positive, got {}", self.mu0)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Parameter(format!("eps must be positive, got {}", self.eps)));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::Parameter(format!("time limit must be positive, got {t}")));
            }
        }
        self.sigma.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    IterationLimit,
    NumericalError,
    InfeasibleSuspect,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Optimal => 0,
            Status::NumericalError => 3,
            Status::IterationLimit | Status::InfeasibleSuspect => 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub status: Status,
    pub message: Option<String>,
    #[serde(skip)]
    pub x: Element,
    #[serde(skip)]
    pub s: Element,
    #[serde(skip)]
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub mu_final: f64,
    pub xi_final: f64,
    pub sigma: f64,
    pub nu: f64,
    /// Number of `mu` reductions performed.
    pub outer_iters: usize,
    pub total_newton_steps: usize,
    pub phase1_steps: usize,
    /// Newton steps taken at each `mu` (index 0 is `mu0`).
    pub inner_counts: Vec<usize>,
    pub primal_res: f64,
    pub dual_res: f64,
    pub phi_norm: f64,
    pub gap: f64,
    pub diverging: bool,
    pub solve_time: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

impl SolveResult {
    /// `2 sqrt(eps/rho) kappa (1 + |x|)`.
    pub fn certificate_bound(&self, cfg: &SolverConfig) -> f64 {
        2.0 * (cfg.eps / cfg.rho).sqrt() * cfg.kappa * (1.0 + self.x.norm())
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        trace::write_csv(&self.trace, path)
    }
}

/// Minimum-norm primal point and least-squares dual pair:
/// `x = A^T (A A^T)^{-1} b`, `lambda = (A A^T)^{-1} A c`, `s = c - A^T lambda`.
pub fn initialize(sys: &KktSystem) -> (Element, Element, DVector<f64>) {
    if sys.m() == 0 {
        return (sys.cone.zeros(), sys.c.clone(), DVector::zeros(0));
    }
    let x = sys.adjoint(&sys.aat_solve(&sys.b));
    let lambda = sys.aat_solve(&sys.apply(&sys.c));
    let s = &sys.c - sys.adjoint(&lambda);
    (x, s, lambda)
}

/// `max(1, <x, s+>/nu)` with `s+` the spectral positive part.
pub fn heuristic_mu0(sys: &KktSystem, x: &Element, s: &Element) -> Result<f64> {
    let sps = sys.cone.spectral_decompose(s)?;
    let vals: Vec<Vec<f64>> = sps.iter().map(|sp| sp.eigenvalues.iter().map(|l| l.max(0.0)).collect()).collect();
    let sp = sys.cone.reconstruct(&sps, &vals);
    Ok((x.dot(&sp) / sys.cone.rank() as f64).max(1.0))
}

/// Smoothing state, factorized Schur matrix and `xi` at one point.
struct Eval {
    st: SmoothingState,
    schur: SchurHandle,
    xi: f64,
}

struct Iterate {
    x: Element,
    s: Element,
    lambda: DVector<f64>,
}

struct Run<'a> {
    sys: &'a KktSystem,
    cfg: &'a SolverConfig,
    start: Instant,
    trace: Vec<TraceRecord>,
    steps: usize,
    phase1_steps: usize,
    x0_scale: f64,
}

enum Stop {
    Status(Status, String),
    Diverging(Status, String),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Status(Status::NumericalError, e.to_string())
    }
}

impl<'a> Run<'a> {
    fn eval(&self, it: &Iterate, mu: f64) -> Result<Eval> {
        self.eval_with(it, mu, true)
    }

    /// Phase 1 only needs `xi` for the trace; skipping it saves a
    /// factorization per step.
    fn eval_with(&self, it: &Iterate, mu: f64, need_xi: bool) -> Result<Eval> {
        let st = compute_smoothing(&self.sys.cone, &it.x, &it.s, mu, self.cfg.rho)?;
        let schur = assemble_schur(self.sys, &st)?;
        let xi = if need_xi { merit_xi(self.sys, &st, &schur)?.2 } else { f64::NAN };
        Ok(Eval { st, schur, xi })
    }

    fn residuals(&self, it: &Iterate) -> (DVector<f64>, Element) {
        (self.sys.primal_residual(&it.x), self.sys.dual_residual(&it.lambda, &it.s))
    }

    fn direction(&self, ev: &Eval, it: &Iterate, r: &Element) -> NewtonDirection {
        let (rp, rd) = self.residuals(it);
        newton_step(self.sys, &ev.st, r, Some(&rp), Some(&rd), &ev.schur)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(&mut self, k: i64, j: usize, ev: &Eval, it: &Iterate, delta: f64, plain: bool) -> Option<usize> {
        self.steps += 1;
        if k < 0 {
            self.phase1_steps += 1;
        }
        if !self.cfg.record_trace {
            return None;
        }
        let (rp, rd) = self.residuals(it);
        self.trace.push(TraceRecord {
            k,
            j,
            mu: ev.st.mu,
            delta,
            xi: ev.xi,
            xi_after: f64::NAN,
            plain,
            primal_res: rp.norm(),
            dual_res: rd.norm(),
            phi_norm: ev.st.chks_residual().norm(),
            time_s: self.start.elapsed().as_secs_f64(),
        });
        Some(self.trace.len() - 1)
    }

    fn set_xi_after(&mut self, idx: Option<usize>, xi: f64) {
        if let Some(i) = idx {
            self.trace[i].xi_after = xi;
        }
    }

    fn guard(&self, it: &Iterate) -> std::result::Result<(), Stop> {
        if let Some(t) = self.cfg.time_limit {
            if self.start.elapsed().as_secs_f64() > t {
                return Err(Stop::Status(Status::IterationLimit, format!("time limit of {t} s reached")));
            }
        }
        let big = 1e10 * self.x0_scale;
        if !it.x.iter().all(|v| v.is_finite()) || !it.s.iter().all(|v| v.is_finite()) {
            return Err(Stop::Status(Status::NumericalError, "non-finite iterate".into()));
        }
        if it.x.norm() > big {
            return Err(Stop::Diverging(Status::IterationLimit, format!("primal iterate diverging (|x| = {:e})", it.x.norm())));
        }
        if it.s.norm() > big {
            return Err(Stop::Diverging(Status::InfeasibleSuspect, format!("dual iterate diverging (|s| = {:e})", it.s.norm())));
        }
        Ok(())
    }

    fn step(it: &mut Iterate, d: &NewtonDirection) {
        it.x += &d.dx;
        it.s += &d.ds;
        it.lambda += &d.dlambda;
    }

    /// Returns the number of steps taken.
    fn phase1(&mut self, it: &mut Iterate, mu0: f64) -> std::result::Result<usize, Stop> {
        let kappa = self.cfg.kappa;
        let need_xi = self.cfg.record_trace;
        let ev00 = self.eval_with(it, mu0, need_xi)?;
        let z00_x00 = ev00.st.gap();
        let (gx, gs) = (&self.sys.c - &ev00.st.y, z00_x00.clone());
        let d00 = self.direction(&ev00, it, &ev00.st.gap());
        let (_, _, delta00) = merit_delta(&ev00.st, &d00.dx, &d00.ds)?;
        let mut t = if delta00 > 0.0 { (1.0 - kappa / (2.0 * delta00)).max(0.0) } else { 0.0 };
        debug!("phase 1: delta00 = {delta00:.3e}, t0 = {t:.6}");
        let mut ev = ev00;
        let mut dir = d00;
        let mut delta = delta00;
        for j in 0.. {
            if delta <= kappa {
                let idx = self.record(-1, j, &ev, it, delta, true);
                Self::step(it, &dir);
                let next = self.eval(it, mu0)?;
                self.set_xi_after(idx, next.xi);
                return Ok(j + 1);
            }
            if j >= self.cfg.max_phase1 {
                return Err(Stop::Status(Status::IterationLimit, format!("phase 1 did not reach the neighborhood in {j} steps")));
            }
            let (fx, fs) = saddle_solve(self.sys, &ev.st, &gx, &gs, &ev.schur);
            let sn = s_norm(&ev.st, &fx, &fs);
            let alpha = if t > 0.0 && sn > 0.0 { (kappa / (4.0 * t * sn)).min(1.0) } else { 1.0 };
            t *= 1.0 - alpha;
            let r = ev.st.gap() - &z00_x00 * t;
            let shifted = self.direction(&ev, it, &r);
            self.record(-1, j, &ev, it, delta, false);
            Self::step(it, &shifted);
            self.guard(it)?;
            ev = self.eval_with(it, mu0, need_xi)?;
            dir = self.direction(&ev, it, &ev.st.gap());
            delta = merit_delta(&ev.st, &dir.dx, &dir.ds)?.2;
        }
        unreachable!()
    }

    fn phase2(&mut self, it: &mut Iterate, mu0: f64, sigma: f64, inner_counts: &mut Vec<usize>, last_xi: &mut f64) -> std::result::Result<(), Stop> {
        let (kappa, eps) = (self.cfg.kappa, self.cfg.eps);
        for k in 0usize.. {
            let mu = mu0 * sigma.powi(k as i32);
            let mut ev = self.eval(it, mu)?;
            let mut j = 0;
            loop {
                let dir = self.direction(&ev, it, &ev.st.gap());
                let delta = merit_delta(&ev.st, &dir.dx, &dir.ds)?.2;
                let idx = self.record(k as i64, j, &ev, it, delta, true);
                Self::step(it, &dir);
                j += 1;
                self.guard(it)?;
                ev = self.eval(it, mu)?;
                self.set_xi_after(idx, ev.xi);
                if ev.xi <= kappa {
                    break;
                }
                if j >= self.cfg.max_inner {
                    inner_counts.push(j);
                    return Err(Stop::Status(Status::NumericalError, format!("{j} Newton steps at mu = {mu:e} did not restore xi <= kappa")));
                }
            }
            inner_counts.push(j);
            *last_xi = ev.xi;
            if mu <= eps {
                return Ok(());
            }
            if k + 1 > self.cfg.max_outer {
                return Err(Stop::Status(Status::IterationLimit, format!("{} outer iterations", self.cfg.max_outer)));
            }
        }
        unreachable!()
    }
}

/// `ceil(ln(mu0/eps) / ln(1/sigma))`: number of reductions until `mu <= eps`.
pub fn predicted_outer_iterations(mu0: f64, eps: f64, sigma: f64) -> usize {
    if mu0 <= eps {
        return 0;
    }
    (((mu0 / eps).ln() / (1.0 / sigma).ln()).ceil()) as usize
}

pub fn solve(p: &ProblemData, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let sys = KktSystem::new(p)?;
    solve_system(&sys, p.objective_offset, cfg)
}

pub fn solve_system(sys: &KktSystem, offset: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let start = Instant::now();
    let (x, s, lambda) = initialize(sys);
    let mut it = Iterate { x, s, lambda };
    let mu0 = if cfg.mu0_heuristic { heuristic_mu0(sys, &it.x, &it.s)? } else { cfg.mu0 };
    let nu = sys.cone.rank() as f64;
    let schedule = cfg.sigma.schedule()?;
    let sigma = schedule.sigma(nu, cfg.rho, cfg.kappa);
    info!("n = {}, m = {}, nu = {nu}, sigma = {sigma:.6} ({})", sys.cone.dim(), sys.m(), schedule.name());

    let mut run = Run { sys, cfg, start, trace: vec![], steps: 0, phase1_steps: 0, x0_scale: 1.0 + it.x.norm() + it.s.norm() };
    let mut inner_counts = vec![];
    let mut xi_final = f64::NAN;
    let mut phase1_steps = 0;
    let outcome = run.phase1(&mut it, mu0).and_then(|n| {
        phase1_steps = n;
        run.phase2(&mut it, mu0, sigma, &mut inner_counts, &mut xi_final)
    });
    let (status, message, diverging) = match outcome {
        Ok(()) => (Status::Optimal, None, false),
        Err(Stop::Status(s, m)) => (s, Some(m), false),
        Err(Stop::Diverging(s, m)) => (s, Some(m), true),
    };
    if phase1_steps == 0 {
        phase1_steps = run.phase1_steps;
    }
    let outer_iters = inner_counts.len().saturating_sub(1);
    let mu_final = mu0 * sigma.powi(outer_iters as i32);
    let (rp, rd) = run.residuals(&it);
    let phi_norm = match compute_smoothing(&sys.cone, &it.x, &it.s, mu_final, cfg.rho) {
        Ok(st) => st.chks_residual().norm(),
        Err(_) => f64::NAN,
    };
    let total_newton_steps = run.steps;
    Ok(SolveResult {
        status,
        message,
        objective: sys.c.dot(&it.x) + offset,
        mu_final,
        xi_final,
        sigma,
        nu,
        outer_iters,
        total_newton_steps,
        phase1_steps,
        inner_counts,
        primal_res: rp.norm(),
        dual_res: rd.norm(),
        phi_norm,
        gap: it.x.dot(&it.s),
        diverging,
        solve_time: start.elapsed().as_secs_f64(),
        trace: run.trace,
        x: it.x,
        s: it.s,
        lambda: it.lambda,
    })
}
