use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trunk-inekf")).args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn simulate(dir: &Path) -> String {
    let data = dir.join("squat.csv").display().to_string();
    let o = cli(&["simulate", "--profile", "squat", "--out", &data, "--duration", "7", "--seed", "3", "--offset-deg", "5", "--offset-p", "0.01,0.0,0.04"]);
    assert!(o.status.success(), "{}", text(&o));
    data
}

#[test]
fn simulate_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    assert!(std::fs::read_to_string(&data).unwrap().starts_with("# motion=squat\nt,ax,"));
    let report = dir.path().join("report.csv");
    let trials = dir.path().join("trials.csv");
    let o = cli(&[
        "run",
        "--data",
        &data,
        "--filter",
        "baseline",
        "--measurement",
        "vec3",
        "--trials",
        "3",
        "--out",
        report.to_str().unwrap(),
        "--trials-out",
        trials.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let table = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(lines[0], "time_period,motion,variable,fk_proposed,fk_baseline,vec3_proposed,vec3_baseline");
    assert!(lines[3].starts_with("Steady,squat,V,,,,"));
    assert_eq!(std::fs::read_to_string(&trials).unwrap().lines().count(), 4);
    assert!(text(&o).contains("baseline/vec3, 3 trials"));
}

#[test]
fn observability_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let o = cli(&["observability", "--data", &data, "--window", "40"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("t_start,regime,rank,"));
    assert_eq!(out.lines().count(), 1 + 7 * 400 / 40);

    let o = cli(&["bench", "--data", &data, "--loops", "3000"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("\nfull_loop,"));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = cli(&["run", "--data", "/nonexistent.csv", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("error: /nonexistent.csv"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,ax,ay,az,gx,gy,gz,alphaL_1,contactL,alphaR_1,contactR\n0,0,0,9.8,0,0,0,0,1,0,1\n0.1,0,0,9.8,0,0,0,0,1,0\n").unwrap();
    let o = cli(&["bench", "--data", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("line 3"), "{}", text(&o));

    let o = cli(&["run", "--data", bad.to_str().unwrap(), "--filter", "kalman", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());

    let o = cli(&["simulate", "--profile", "jog", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
}
