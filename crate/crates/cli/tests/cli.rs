use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lqbsde"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("report.txt")).unwrap()
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from\n{report}"))
}

#[test]
fn riccati_writes_gains_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sc = scenarios().join("tanh.scn");
    let o = run(&["riccati", "--scenario", sc.to_str().unwrap(), "--steps", "2000", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("riccati.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("t,alpha1,beta1,alpha2,beta2,alpha,beta"), "{header}");
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2002);
    let rep = report(dir.path());
    let gap: f64 = value(&rep, "closed_form_gap").parse().unwrap();
    assert!(gap < 1e-8);
}

#[test]
fn unknown_key_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("bad.scn");
    fs::write(&sc, "a = 0.1\nb3 = 2\n").unwrap();
    let o = run(&["riccati", "--scenario", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("b3") && err.contains('2'), "{err}");
}

#[test]
fn filter_suite_refuses_other_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenarios().join("w1-vs-w2.scn");
    let o = run(&[
        "verify", "--suite", "filter", "--scenario", sc.to_str().unwrap(),
        "--paths", "1000", "--steps", "32", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetric-w2"));
}

#[test]
fn zero_scenario_nash_passes() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenarios().join("zero.scn");
    let o = run(&[
        "verify", "--suite", "nash", "--scenario", sc.to_str().unwrap(), "--paths", "200",
        "--steps", "64", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(dir.path());
    assert_eq!(value(&rep, "status"), "pass");
    assert_eq!(value(&rep, "player1_constant_theta").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn no_leverage_simulation_plays_targets() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("flat.scn");
    fs::write(&sc, "n1 = 0.25\nn2 = -0.5\nxi = 1,0.5,0.5\npattern = w1-vs-w2\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "simulate", "--scenario", sc.to_str().unwrap(), "--paths", "20", "--steps", "16",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("realization.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (i1, i2) = (
        cols.iter().position(|c| *c == "u1").unwrap(),
        cols.iter().position(|c| *c == "u2").unwrap(),
    );
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[i1].parse::<f64>().unwrap(), 0.25);
        assert_eq!(f[i2].parse::<f64>().unwrap(), -0.5);
    }
}

#[test]
fn repeated_runs_go_to_seed_directories() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenarios().join("symmetric-w2.scn");
    let o = run(&[
        "simulate", "--scenario", sc.to_str().unwrap(), "--paths", "50", "--steps", "32",
        "--seed", "7", "--repeat", "2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = report(&dir.path().join("seed-7"));
    let b = report(&dir.path().join("seed-8"));
    assert_ne!(value(&a, "J1"), value(&b, "J1"));
}

#[test]
fn thread_count_does_not_change_output() {
    let sc = scenarios().join("full-vs-w2.scn");
    let mut reports = vec![];
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[
            "verify", "--suite", "nash", "--scenario", sc.to_str().unwrap(), "--paths", "300",
            "--steps", "64", "--threads", threads, "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.code() != Some(2));
        let text = report(dir.path());
        let body: Vec<String> = text.lines().filter(|l| !l.starts_with("# out=")).map(String::from).collect();
        reports.push(body);
    }
    assert!(reports[0] == reports[1]);
}

#[test]
fn simulate_cost_matches_library_estimate() {
    use lqbsde::equilibrium::Equilibrium;
    use lqbsde::riccati::RiccatiSolution;
    use lqbsde::stochastic::sample_brownian;

    let dir = tempfile::tempdir().unwrap();
    let sc = scenarios().join("symmetric-w2.scn");
    let o = run(&[
        "simulate", "--scenario", sc.to_str().unwrap(), "--paths", "500", "--seed", "9",
        "--steps", "128", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j1: f64 = value(&report(dir.path()), "J1").parse().unwrap();

    let text = fs::read_to_string(&sc).unwrap();
    let m = lqbsde::scenario::parse_scenario(&text).unwrap().build(Some(128)).unwrap();
    let r = RiccatiSolution::solve(&m).unwrap();
    let eq = Equilibrium::new(&m, &r).unwrap();
    let batch = sample_brownian(*m.grid(), 9, 500).unwrap();
    let want = lqbsde::verification::estimate_costs(&eq, &batch).unwrap().j1.mean;
    assert!((j1 - want).abs() <= 1e-12 * want.abs().max(1.0), "{j1} {want}");
}

#[test]
fn oracle_suite_passes_on_deterministic_preset() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenarios().join("deterministic.scn");
    let o = run(&[
        "verify", "--suite", "oracle", "--scenario", sc.to_str().unwrap(), "--steps", "400",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&report(dir.path()), "status"), "pass");
}
