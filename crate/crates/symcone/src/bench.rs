//! Batch runs, shifted geometric means, performance profiles and the
//! iteration-scaling study.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ProblemData, ReadOptions, ReaderRegistry};
use crate::random;
use crate::solver::trace::csv_err;
use crate::solver::{predicted_outer_iterations, solve, SolverConfig};

#[derive(Clone, Debug)]
pub enum InstanceSource {
    File { path: PathBuf, format: String, opts: ReadOptions },
    Inline(ProblemData),
}

impl InstanceSource {
    pub fn name(&self) -> String {
        match self {
            InstanceSource::File { path, .. } => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            InstanceSource::Inline(p) => p.name.clone(),
        }
    }

    pub fn load(&self) -> Result<ProblemData> {
        match self {
            InstanceSource::File { path, format, opts } => ReaderRegistry::default().read(format, path, opts),
            InstanceSource::Inline(p) => Ok(p.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub config: String,
    pub status: String,
    pub time_s: f64,
    pub outer_iters: usize,
    pub total_newton_steps: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub phi_norm: f64,
    pub gap: f64,
    pub objective: f64,
}

impl BenchRecord {
    pub fn solved(&self) -> bool {
        self.status == "Optimal"
    }
}

fn run_one(src: &InstanceSource, label: &str, cfg: &SolverConfig) -> BenchRecord {
    let t0 = Instant::now();
    let mut rec = BenchRecord {
        instance: src.name(),
        config: label.to_string(),
        status: String::new(),
        time_s: 0.0,
        outer_iters: 0,
        total_newton_steps: 0,
        primal_res: f64::NAN,
        dual_res: f64::NAN,
        phi_norm: f64::NAN,
        gap: f64::NAN,
        objective: f64::NAN,
    };
    match src.load().and_then(|p| solve(&p, cfg)) {
        Ok(r) => {
            rec.status = format!("{:?}", r.status);
            rec.outer_iters = r.outer_iters;
            rec.total_newton_steps = r.total_newton_steps;
            rec.primal_res = r.primal_res;
            rec.dual_res = r.dual_res;
            rec.phi_norm = r.phi_norm;
            rec.gap = r.gap;
            rec.objective = r.objective;
        }
        Err(Error::Parse(_)) => rec.status = "ParseError".into(),
        Err(e) => {
            log::warn!("{}: {e}", rec.instance);
            rec.status = "Error".into();
        }
    }
    rec.time_s = t0.elapsed().as_secs_f64();
    rec
}

/// Solves every instance with `time_limit_s` on a pool of `jobs` threads
/// (`0` = rayon default). Output order follows the input order.
pub fn run_suite(instances: &[InstanceSource], label: &str, cfg: &SolverConfig, time_limit_s: f64, jobs: usize) -> Result<Vec<BenchRecord>> {
    let cfg = SolverConfig { time_limit: Some(time_limit_s), record_trace: false, ..cfg.clone() };
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| instances.par_iter().map(|s| run_one(s, label, &cfg)).collect()))
}

/// `exp(mean ln max(1, t + offset)) - offset`, unsolved entries counted at
/// `time_limit`.
pub fn shifted_geometric_mean(times: &[f64], solved: &[bool], time_limit: f64, offset: f64) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Parameter("shifted geometric mean of an empty list is undefined".into()));
    }
    if times.len() != solved.len() {
        return Err(Error::Parameter("times and solved flags differ in length".into()));
    }
    let s: f64 = times
        .iter()
        .zip(solved)
        .map(|(&t, &ok)| {
            let t = if ok { t } else { time_limit };
            (t + offset).max(1.0).ln()
        })
        .sum();
    Ok((s / times.len() as f64).exp() - offset)
}

/// `r[p][s] = t[p][s] / min_s' t[p][s']`; failures (`None`) give infinity.
pub fn performance_ratios(times: &[Vec<Option<f64>>]) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|row| {
            let best = row.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            row.iter()
                .map(|t| match t {
                    Some(t) if best > 0.0 => t / best,
                    Some(_) => 1.0,
                    None => f64::INFINITY,
                })
                .collect()
        })
        .collect()
}

/// Fraction of instances with ratio `<= tau` for configuration `s`.
pub fn profile_value(ratios: &[Vec<f64>], s: usize, tau: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|r| r[s] <= tau).count() as f64 / ratios.len() as f64
}

/// `n` geometrically spaced points from 1 to `tau_max`.
pub fn tau_grid(n: usize, tau_max: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| if i + 1 == n { tau_max } else { tau_max.powf(i as f64 / (n - 1) as f64) }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileSample {
    pub tau: f64,
    pub config: String,
    pub rho: f64,
}

/// Profile samples on the 200-point grid up to 100.
pub fn performance_profile(times: &[Vec<Option<f64>>], configs: &[String]) -> Vec<ProfileSample> {
    let ratios = performance_ratios(times);
    let grid = tau_grid(200, 100.0);
    let mut out = vec![];
    for (s, name) in configs.iter().enumerate() {
        for &tau in &grid {
            out.push(ProfileSample { tau, config: name.clone(), rho: profile_value(&ratios, s, tau) });
        }
    }
    out
}

/// Times matrix (instance x config) from records of several labelled runs.
pub fn times_matrix(records: &[BenchRecord], configs: &[String]) -> Vec<Vec<Option<f64>>> {
    let mut names: Vec<String> = vec![];
    for r in records {
        if !names.contains(&r.instance) {
            names.push(r.instance.clone());
        }
    }
    names
        .iter()
        .map(|n| {
            configs.iter().map(|c| records.iter().find(|r| &r.instance == n && &r.config == c).filter(|r| r.solved()).map(|r| r.time_s)).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub nu: usize,
    pub instance: usize,
    pub status: String,
    /// `sqrt(nu) ln(mu0/eps)`.
    pub predictor: f64,
    pub total_newton_steps: usize,
    pub outer_iters: usize,
    pub predicted_outer: usize,
    /// Largest inner count after the first `mu`.
    pub max_inner_after_first: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    /// Centered coefficient of determination of the through-origin fit.
    pub r2: f64,
}

/// Least squares `y = a x` through the origin; returns `(a, R^2)` with the
/// usual mean-centered `R^2`.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, r2)
}

/// Random strictly feasible LPs with `nu` variables and `m = min(m, nu)`
/// rows, solved in the given configuration.
pub fn scaling_study(nu_list: &[usize], per_nu: usize, m: usize, cfg: &SolverConfig, seed: u64, jobs: usize) -> Result<ScalingReport> {
    cfg.validate()?;
    let cfg = SolverConfig { record_trace: false, ..cfg.clone() };
    let mut tasks = vec![];
    for (a, &nu) in nu_list.iter().enumerate() {
        for i in 0..per_nu {
            tasks.push((nu, i, seed.wrapping_add(1000 * a as u64 + i as u64)));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let points: Result<Vec<ScalingPoint>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(nu, i, sd)| {
                let mut rng = random::rng(sd);
                let p = random::feasible_lp(nu, m.min(nu), &mut rng);
                let r = solve(&p, &cfg)?;
                Ok(ScalingPoint {
                    nu,
                    instance: i,
                    status: format!("{:?}", r.status),
                    predictor: (nu as f64).sqrt() * (cfg.mu0 / cfg.eps).ln(),
                    total_newton_steps: r.total_newton_steps,
                    outer_iters: r.outer_iters,
                    predicted_outer: predicted_outer_iterations(cfg.mu0, cfg.eps, r.sigma),
                    max_inner_after_first: r.inner_counts.iter().skip(1).copied().max().unwrap_or(0),
                    time_s: r.solve_time,
                })
            })
            .collect()
    });
    let points = points?;
    let xs: Vec<f64> = points.iter().map(|p| p.predictor).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.total_newton_steps as f64).collect();
    let (slope, r2) = fit_through_origin(&xs, &ys);
    Ok(ScalingReport { points, slope, r2 })
}

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let mut wr = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        wr.write_record(header).map_err(csv_err)?;
    }
    for r in rows {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub const RECORD_COLUMNS: [&str; 11] =
    ["instance", "config", "status", "time_s", "outer_iters", "total_newton_steps", "primal_res", "dual_res", "phi_norm", "gap", "objective"];

pub fn write_records_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    write_rows(records, &RECORD_COLUMNS, path)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    rd.deserialize().enumerate().map(|(i, r)| r.map_err(|e| Error::Parse(format!("{}: record {}: {e}", path.display(), i + 1)))).collect()
}

pub fn write_profile_csv(samples: &[ProfileSample], path: &Path) -> Result<()> {
    write_rows(samples, &["tau", "config", "rho"], path)
}

pub fn write_scaling_csv(report: &ScalingReport, path: &Path) -> Result<()> {
    write_rows(
        &report.points,
        &["nu", "instance", "status", "predictor", "total_newton_steps", "outer_iters", "predicted_outer", "max_inner_after_first", "time_s"],
        path,
    )
}
