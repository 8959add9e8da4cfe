//! `symcone` command line: solve, convert, check, bench, profile, scaling.
//!
//! Every run ends with one line on stdout of the form
//! `status=<Status> exit=<code> ...` so scripts can grep a single line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use symcone::bench::{self, InstanceSource};
use symcone::io::{conic_json, ReadOptions, ReaderRegistry};
use symcone::prelude::*;

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "symcone", version, about = "Symmetric cone solver (smoothing Newton, path following)")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and report the result.
    Solve {
        input: PathBuf,
        #[command(flatten)]
        input_opts: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Result JSON path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration trace CSV path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Convert any supported input into conic JSON.
    Convert {
        input: PathBuf,
        #[command(flatten)]
        input_opts: InputArgs,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report KKT residuals of a candidate `(x, s, lambda)` for a problem.
    Check {
        input: PathBuf,
        /// JSON with `x`, `s`, `lambda` arrays (a `solve --out` file works).
        candidate: PathBuf,
        #[command(flatten)]
        input_opts: InputArgs,
        /// Target for `|x o s - mu e|`; defaults to `<x,s>/rank`.
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Solve a suite of instances and write one CSV row per instance.
    Bench {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        input_opts: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Configuration label stored in the records.
        #[arg(long)]
        label: Option<String>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Performance profile over bench record CSVs.
    Profile {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Newton steps against sqrt(nu) ln(mu0/eps) on random LPs.
    Scaling {
        #[arg(long, value_delimiter = ',', default_value = "8,32,128,512")]
        nu: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        per_nu: usize,
        /// Constraint rows per instance (capped at nu).
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// mps, conic or lasso; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Eliminate singleton rows and drop linearly dependent rows.
    #[arg(long)]
    prune_rows: bool,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    mu0: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// `certified` or a fixed reduction factor in (0, 1).
    #[arg(long)]
    sigma: Option<String>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_phase1: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Start from max(1, <x, s+>/nu) instead of --mu0.
    #[arg(long)]
    mu0_heuristic: bool,
}

/// Failure before or outside the solver, with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "UsageError", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Parameter(_) => (1, "UsageError"),
            Error::Parse(_) | Error::Io(_) | Error::Structural(_) => (2, "ParseError"),
            Error::Domain(_) | Error::Numerical(_) => (3, "NumericalError"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

impl SolverArgs {
    fn config(&self, default_sigma: SigmaMode) -> CliResult<SolverConfig> {
        let sigma = match &self.sigma {
            Some(s) => SigmaMode::from_str(s).map_err(|e| Failure::usage(format!("invalid --sigma: {e}")))?,
            None => default_sigma,
        };
        if !(self.rho >= 1.0) {
            return Err(Failure::usage(format!("invalid --rho: must be >= 1, got {}", self.rho)));
        }
        if !(self.mu0 > 0.0) || !self.mu0.is_finite() {
            return Err(Failure::usage(format!("invalid --mu0: must be positive, got {}", self.mu0)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Failure::usage(format!("invalid --eps: must be positive, got {}", self.eps)));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Failure::usage(format!("invalid --time-limit: must be positive, got {t}")));
            }
        }
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            rho: self.rho,
            mu0: self.mu0,
            eps: self.eps,
            sigma,
            time_limit: self.time_limit,
            max_phase1: self.max_phase1.unwrap_or(d.max_phase1),
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            mu0_heuristic: self.mu0_heuristic,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl InputArgs {
    fn format_for(&self, path: &Path) -> CliResult<String> {
        match &self.format {
            Some(f) => Ok(f.clone()),
            None => ReaderRegistry::guess(path)
                .map(str::to_string)
                .ok_or_else(|| Failure::usage(format!("cannot infer the format of {}; pass --format", path.display()))),
        }
    }

    /// Format check only; runs before any file is opened.
    fn validate(&self, paths: &[&Path]) -> CliResult<()> {
        let reg = ReaderRegistry::default();
        for p in paths {
            let f = self.format_for(p)?;
            if f == "qps" {
                return Err(Failure::usage("QPS (quadratic) input is not supported"));
            }
            reg.get(&f).map_err(|e| Failure::usage(format!("invalid --format: {e}")))?;
        }
        Ok(())
    }

    fn read(&self, path: &Path) -> CliResult<ProblemData> {
        let f = self.format_for(path)?;
        ReaderRegistry::default().read(&f, path, &ReadOptions { prune_rows: self.prune_rows }).map_err(|e| match e {
            Error::Io(io) => Failure { code: 2, kind: "ParseError", message: format!("{}: {io}", path.display()) },
            e => e.into(),
        })
    }
}

/// What `solve --out` writes. Wall-clock time is left out so identical
/// invocations give identical bytes.
#[derive(Serialize)]
struct ResultFile<'a> {
    problem: &'a str,
    status: Status,
    message: Option<&'a str>,
    objective: f64,
    primal_res: f64,
    dual_res: f64,
    gap: f64,
    phi_norm: f64,
    mu_final: f64,
    sigma: f64,
    nu: f64,
    outer_iters: usize,
    phase1_steps: usize,
    total_newton_steps: usize,
    inner_counts: &'a [usize],
    diverging: bool,
    config: &'a SolverConfig,
    x: &'a [f64],
    s: &'a [f64],
    lambda: &'a [f64],
}

#[derive(Deserialize)]
struct Candidate {
    x: Vec<f64>,
    s: Vec<f64>,
    lambda: Vec<f64>,
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::from(Error::Io(e))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn status_line(kind: &str, code: u8, fields: &[(&str, String)]) {
    let mut line = format!("status={kind} exit={code}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    println!("{line}");
}

fn cmd_solve(input: &Path, io: &InputArgs, solver: &SolverArgs, out: Option<&Path>, trace: Option<&Path>) -> CliResult<u8> {
    let mut cfg = solver.config(SigmaMode::Certified)?;
    io.validate(&[input])?;
    cfg.record_trace = trace.is_some();
    let p = io.read(input)?;
    let r = solve(&p, &cfg)?;
    if let Some(t) = trace {
        r.write_trace(t)?;
    }
    if let Some(o) = out {
        let file = ResultFile {
            problem: &p.name,
            status: r.status,
            message: r.message.as_deref(),
            objective: r.objective,
            primal_res: r.primal_res,
            dual_res: r.dual_res,
            gap: r.gap,
            phi_norm: r.phi_norm,
            mu_final: r.mu_final,
            sigma: r.sigma,
            nu: r.nu,
            outer_iters: r.outer_iters,
            phase1_steps: r.phase1_steps,
            total_newton_steps: r.total_newton_steps,
            inner_counts: &r.inner_counts,
            diverging: r.diverging,
            config: &cfg,
            x: r.x.as_slice(),
            s: r.s.as_slice(),
            lambda: r.lambda.as_slice(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Failure::usage(e.to_string()))?;
        write_or_print(Some(o), &text)?;
    }
    let code = r.status.exit_code() as u8;
    let mut fields = vec![
        ("objective", format!("{:.12e}", r.objective)),
        ("outer", r.outer_iters.to_string()),
        ("newton", r.total_newton_steps.to_string()),
        ("primal_res", format!("{:.3e}", r.primal_res)),
        ("dual_res", format!("{:.3e}", r.dual_res)),
        ("time", format!("{:.3}", r.solve_time)),
    ];
    if let Some(m) = &r.message {
        fields.push(("message", format!("{m:?}")));
    }
    status_line(&format!("{:?}", r.status), code, &fields);
    Ok(code)
}

fn cmd_convert(input: &Path, io: &InputArgs, out: Option<&Path>) -> CliResult<u8> {
    io.validate(&[input])?;
    let p = io.read(input)?;
    let text = conic_json::to_string(&p);
    write_or_print(out, &text)?;
    if out.is_some() {
        status_line("Converted", 0, &[("m", p.m().to_string()), ("n", p.n().to_string())]);
    }
    Ok(0)
}

fn cmd_check(input: &Path, candidate: &Path, io: &InputArgs, mu: Option<f64>) -> CliResult<u8> {
    if let Some(m) = mu {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Failure::usage(format!("invalid --mu: must be nonnegative, got {m}")));
        }
    }
    io.validate(&[input])?;
    let p = io.read(input)?;
    let text = std::fs::read_to_string(candidate).map_err(Error::Io)?;
    let c: Candidate = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", candidate.display())))?;
    let sys = KktSystem::new(&p)?;
    if c.x.len() != p.n() || c.s.len() != p.n() || c.lambda.len() != p.m() {
        return Err(Error::Parse(format!(
            "candidate sizes x {} s {} lambda {} do not match n = {}, m = {}",
            c.x.len(),
            c.s.len(),
            c.lambda.len(),
            p.n(),
            p.m()
        ))
        .into());
    }
    let (x, s) = (Element::from_vec(c.x), Element::from_vec(c.s));
    let lambda = Element::from_vec(c.lambda);
    let rp = sys.primal_residual(&x).norm();
    let rd = sys.dual_residual(&lambda, &s).norm();
    let gap = x.dot(&s);
    let rank = sys.cone.rank() as f64;
    let mu = mu.unwrap_or(gap / rank);
    let comp = (sys.cone.jordan_product(&x, &s)? - sys.cone.identity() * mu).norm();
    let fields = [
        ("primal_res", format!("{rp:.6e}")),
        ("dual_res", format!("{rd:.6e}")),
        ("gap", format!("{gap:.6e}")),
        ("mu", format!("{mu:.6e}")),
        ("complementarity", format!("{comp:.6e}")),
        ("x_interior", sys.cone.in_interior(&x).to_string()),
        ("s_interior", sys.cone.in_interior(&s).to_string()),
    ];
    status_line("Checked", 0, &fields);
    Ok(0)
}

fn cmd_bench(inputs: &[PathBuf], io: &InputArgs, solver: &SolverArgs, label: Option<&str>, jobs: usize, out: Option<&Path>) -> CliResult<u8> {
    let cfg = solver.config(SigmaMode::Fixed(0.2))?;
    let paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    io.validate(&paths)?;
    let limit = cfg.time_limit.unwrap_or(1000.0);
    let sources: Vec<InstanceSource> = inputs
        .iter()
        .map(|p| Ok(InstanceSource::File { path: p.clone(), format: io.format_for(p)?, opts: ReadOptions { prune_rows: io.prune_rows } }))
        .collect::<CliResult<_>>()?;
    let label = label.map(str::to_string).unwrap_or_else(|| cfg.sigma.to_string());
    let records = bench::run_suite(&sources, &label, &cfg, limit, jobs)?;
    if let Some(o) = out {
        bench::write_records_csv(&records, o)?;
    } else {
        for r in &records {
            println!("{} {} {:.3}s outer {} objective {:.10e}", r.instance, r.status, r.time_s, r.outer_iters, r.objective);
        }
    }
    let times: Vec<f64> = records.iter().map(|r| r.time_s).collect();
    let solved: Vec<bool> = records.iter().map(|r| r.solved()).collect();
    let sgm = bench::shifted_geometric_mean(&times, &solved, limit, 1.0)?;
    let n_solved = solved.iter().filter(|&&s| s).count();
    status_line("Benchmarked", 0, &[("instances", records.len().to_string()), ("solved", n_solved.to_string()), ("sgm", format!("{sgm:.6}"))]);
    Ok(0)
}

fn cmd_profile(files: &[PathBuf], out: Option<&Path>) -> CliResult<u8> {
    let mut records = vec![];
    for f in files {
        records.extend(bench::read_records_csv(f)?);
    }
    let mut configs: Vec<String> = vec![];
    for r in &records {
        if !configs.contains(&r.config) {
            configs.push(r.config.clone());
        }
    }
    let times = bench::times_matrix(&records, &configs);
    let profile = bench::performance_profile(&times, &configs);
    match out {
        Some(o) => bench::write_profile_csv(&profile, o)?,
        None => {
            for p in &profile {
                println!("{},{},{}", p.tau, p.config, p.rho);
            }
        }
    }
    status_line("Profiled", 0, &[("instances", times.len().to_string()), ("configs", configs.len().to_string())]);
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_scaling(nu: &[usize], per_nu: usize, rows: usize, seed: u64, jobs: usize, solver: &SolverArgs, out: Option<&Path>) -> CliResult<u8> {
    let cfg = solver.config(SigmaMode::Certified)?;
    if nu.iter().any(|&n| n < 2) {
        return Err(Failure::usage("invalid --nu: every size must be at least 2"));
    }
    if per_nu == 0 || rows == 0 {
        return Err(Failure::usage("--per-nu and --rows must be positive"));
    }
    let report = bench::scaling_study(nu, per_nu, rows, &cfg, seed, jobs)?;
    if let Some(o) = out {
        bench::write_scaling_csv(&report, o)?;
    }
    let bad = report.points.iter().filter(|p| p.status != "Optimal").count();
    status_line(
        "Scaled",
        0,
        &[
            ("points", report.points.len().to_string()),
            ("failed", bad.to_string()),
            ("slope", format!("{:.6}", report.slope)),
            ("r2", format!("{:.6}", report.r2)),
        ],
    );
    Ok(0)
}

fn run(cli: Cli) -> CliResult<u8> {
    match &cli.cmd {
        Command::Solve { input, input_opts, solver, out, trace } => cmd_solve(input, input_opts, solver, out.as_deref(), trace.as_deref()),
        Command::Convert { input, input_opts, out } => cmd_convert(input, input_opts, out.as_deref()),
        Command::Check { input, candidate, input_opts, mu } => cmd_check(input, candidate, input_opts, *mu),
        Command::Bench { inputs, input_opts, solver, label, jobs, out } => {
            cmd_bench(inputs, input_opts, solver, label.as_deref(), *jobs, out.as_deref())
        }
        Command::Profile { records, out } => cmd_profile(records, out.as_deref()),
        Command::Scaling { nu, per_nu, rows, seed, jobs, solver, out } => cmd_scaling(nu, *per_nu, *rows, *seed, *jobs, solver, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            eprint!("{msg}");
            status_line("UsageError", 1, &[("message", format!("{:?}", msg.lines().next().unwrap_or("").trim()))]);
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            status_line(f.kind, f.code, &[("message", format!("{:?}", f.message))]);
            ExitCode::from(f.code)
        }
    }
}
