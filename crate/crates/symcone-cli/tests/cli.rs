use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symcone"))
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../symcone/tests/data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn status_line(o: &Output) -> String {
    let out = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = out.lines().filter(|l| l.starts_with("status=")).collect();
    assert_eq!(lines.len(), 1, "stdout: {out}");
    lines[0].to_string()
}

fn field(line: &str, key: &str) -> String {
    line.split_whitespace().find_map(|t| t.strip_prefix(&format!("{key}="))).unwrap_or_else(|| panic!("{key} missing in {line}")).to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn solve_tiny_mps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["solve", p(&data("mps/tiny.mps")), "--eps", "1e-12", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let line = status_line(&o);
    assert!(line.starts_with("status=Optimal exit=0"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["objective"].as_f64().unwrap() - 1.0).abs() <= 1e-8);
    assert_eq!(v["status"], "Optimal");
    assert_eq!(v["config"]["eps"].as_f64(), Some(1e-12));
    assert_eq!(v["config"]["rho"].as_f64(), Some(1.0));
    assert_eq!(v["config"]["sigma"], "certified");
}

#[test]
fn sigma_out_of_range_is_a_usage_error() {
    let o = run(&["solve", p(&data("mps/tiny.mps")), "--sigma", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let line = status_line(&o);
    assert!(line.contains("--sigma"), "{line}");
}

#[test]
fn flags_are_checked_before_reading() {
    // the input does not exist; the bad flag must win
    let o = run(&["solve", "/nonexistent/file.mps", "--rho", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(status_line(&o).contains("--rho"));
}

#[test]
fn unknown_flag_and_missing_file() {
    let o = run(&["solve", p(&data("mps/tiny.mps")), "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    status_line(&o);
    let o = run(&["solve", "/nonexistent/file.mps"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(status_line(&o).contains("/nonexistent/file.mps"));
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mps");
    std::fs::write(&bad, "NAME bad\nROWS\n Q  R1\nENDATA\n").unwrap();
    let o = run(&["solve", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(status_line(&o).starts_with("status=ParseError"));
}

#[test]
fn qps_is_rejected() {
    let o = run(&["solve", "model.qps"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(status_line(&o).contains("QPS"));
}

#[test]
fn iteration_limit_exits_four() {
    let o = run(&["solve", p(&data("mps/tiny.mps")), "--max-outer", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(status_line(&o).starts_with("status=IterationLimit"));
}

#[test]
fn result_json_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = run(&["solve", p(&data("mps/ranges.mps")), "--sigma", "0.2", "--out", p(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn trace_csv_written() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let o = run(&["solve", p(&data("mps/bounds.mps")), "--sigma", "0.2", "--trace", p(&t)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&t).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,j,mu,delta,xi,primal_res,dual_res,phi_norm,time_s");
    let newton: usize = field(&status_line(&o), "newton").parse().unwrap();
    assert_eq!(text.lines().count(), newton + 1);
}

#[test]
fn convert_then_solve_json() {
    let dir = tempfile::tempdir().unwrap();
    let j = dir.path().join("ineq.json");
    let o = run(&["convert", p(&data("mps/ineq.mps")), "--out", p(&j)]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["solve", p(&j), "--eps", "1e-12"]);
    assert_eq!(o.status.code(), Some(0));
    let obj: f64 = field(&status_line(&o), "objective").parse().unwrap();
    assert!((obj + 10.75).abs() <= 1e-8, "{obj}");
}

#[test]
fn check_central_point() {
    // x = (1, 1), s = (mu, mu) is central for min mu<1,x> s.t. x1 - x2 = 0
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("p.json");
    std::fs::write(
        &prob,
        r#"{"name":"c","m":1,"cone":[{"type":"orthant","dim":2}],"A":{"rows":[0,0],"cols":[0,1],"vals":[1.0,-1.0]},"b":[0.0],"c":[0.25,0.25],"offset":0.0}"#,
    )
    .unwrap();
    let cand = dir.path().join("x.json");
    std::fs::write(&cand, r#"{"x":[1.0,1.0],"s":[0.25,0.25],"lambda":[0.0]}"#).unwrap();
    let o = run(&["check", p(&prob), p(&cand), "--mu", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let line = status_line(&o);
    assert!(field(&line, "complementarity").parse::<f64>().unwrap() <= 1e-9);
    assert!(field(&line, "dual_res").parse::<f64>().unwrap() <= 1e-15);
    assert_eq!(field(&line, "gap").parse::<f64>().unwrap(), 0.5);
}

#[test]
fn check_accepts_solve_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    run(&["solve", p(&data("mps/maxim.mps")), "--sigma", "0.2", "--out", p(&out)]);
    let o = run(&["check", p(&data("mps/maxim.mps")), p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let line = status_line(&o);
    assert!(field(&line, "primal_res").parse::<f64>().unwrap() < 1e-8);
    assert_eq!(field(&line, "x_interior"), "true");
}

#[test]
fn bench_and_profile_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, prof) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("p.csv"));
    let inputs = [data("mps/tiny.mps"), data("mps/ineq.mps"), data("mps/bounds.mps")];
    let ins: Vec<&str> = inputs.iter().map(|x| p(x)).collect();
    let mut args = vec!["bench"];
    args.extend(&ins);
    let o = run(&[&args[..], &["--sigma", "0.2", "--label", "fast", "--jobs", "2", "--out", p(&a)]].concat());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&status_line(&o), "solved"), "3");
    let o = run(&[&args[..], &["--label", "slow", "--sigma", "certified", "--out", p(&b)]].concat());
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["profile", p(&a), p(&b), "--out", p(&prof)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&prof).unwrap();
    assert_eq!(text.lines().next().unwrap(), "tau,config,rho");
    assert_eq!(text.lines().count(), 1 + 200 * 2);
    // every profile ends at the success rate
    assert!(text.lines().rev().take(2).all(|l| l.ends_with(",1.0") || l.ends_with(",1")));
}

#[test]
fn scaling_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["scaling", "--nu", "4,8", "--per-nu", "1", "--rows", "2", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let line = status_line(&o);
    assert_eq!(field(&line, "failed"), "0");
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);
}
