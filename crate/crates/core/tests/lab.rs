use std::process::Command as Proc;

use dpp_lab::field::FieldSpec;
use dpp_lab::lab::*;
use dpp_lab::scenario::builtin;
use sha2::{Digest, Sha256};

fn cfg(scenario: &str, out: &std::path::Path) -> RunConfig {
    RunConfig {
        scenario: Some(scenario.into()),
        out: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn solve_writes_hashed_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        Command::Solve(SolveKind::Dpp),
        &cfg("linear-1d", tmp.path()),
    )
    .unwrap();
    assert_eq!(o.exit_code(), 0);
    let s = builtin("linear-1d").unwrap();
    assert!(o.dir.ends_with(format!("linear-1d-{}/solve-dpp", s.hash())));
    let names: Vec<&str> = o.manifest.outputs.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["solution.csv", "iterations.csv", "summary.json"]);
    for f in &o.manifest.outputs {
        let bytes = std::fs::read(o.dir.join(&f.name)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256);
    }
    let csv = std::fs::read_to_string(o.dir.join("solution.csv")).unwrap();
    assert!(csv.starts_with("x0,class,u\n"));
    assert_eq!(read_manifest(&o.dir).unwrap(), o.manifest);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = |d: &std::path::Path| RunConfig {
        paths: Some(2000),
        seed: Some(5),
        ..cfg("dirac-2d", d)
    };
    let x = run(Command::Simulate(SimulateKind::Value), &c(a.path())).unwrap();
    let y = run(Command::Simulate(SimulateKind::Value), &c(b.path())).unwrap();
    assert_eq!(x.manifest, y.manifest);
    for f in ["values.csv", "values.json", "manifest.json"] {
        assert_eq!(
            std::fs::read(x.dir.join(f)).unwrap(),
            std::fs::read(y.dir.join(f)).unwrap()
        );
    }
}

#[test]
fn ln_failure_demo_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let c = RunConfig {
        paths: Some(5000),
        ..cfg("ln-failure-2d", tmp.path())
    };
    let o = run(Command::Abp(AbpKind::LnFailureDemo), &c).unwrap();
    assert_eq!(o.exit_code(), 0);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(o.dir.join("ln_failure.json")).unwrap()).unwrap();
    assert_eq!(v["ln_norm"], 0.0);
    assert!(v["s_sum"]["mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn compare_examples() {
    let mut s = builtin("dirac-2d").unwrap();
    s.f = FieldSpec::constant(0.0);
    s.g = FieldSpec::constant(0.4);
    let pts = probe_points(&s);
    let sol = solve_default(&s).unwrap();
    let r = compare(
        &solver_output(&s, &sol, &pts).unwrap(),
        &simulator_output(&s, &pts, 1000, 1).unwrap(),
    )
    .unwrap();
    assert!(r.pass && r.rows.iter().all(|x| x.diff < 1e-9 && x.se == 0.0));

    let s = builtin("linear-1d").unwrap();
    let pts = probe_points(&s);
    let solved = solver_output(&s, &solve_default(&s).unwrap(), &pts).unwrap();
    for seed in [3, 4] {
        assert!(
            compare(&solved, &simulator_output(&s, &pts, 20_000, seed).unwrap())
                .unwrap()
                .pass
        );
    }
    let mut other = s.clone();
    other.params.eps = 0.05;
    other.h = 0.0125;
    assert!(compare(&solved, &simulator_output(&other, &pts, 1000, 1).unwrap()).is_err());
}

#[test]
fn exit_code_contract() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        exit_code(&run(Command::Compare, &cfg("no-such-scenario", tmp.path()))),
        2
    );

    let mut s = builtin("linear-1d").unwrap();
    s.max_iter = 3;
    let path = tmp.path().join("short.toml");
    std::fs::write(&path, s.to_toml_string().unwrap()).unwrap();
    let r = run(
        Command::Solve(SolveKind::Dpp),
        &cfg(path.to_str().unwrap(), tmp.path()),
    );
    assert_eq!(exit_code(&r), 3);

    let text = builtin("linear-1d")
        .unwrap()
        .to_toml_string()
        .unwrap()
        .replace("alpha = 0.5", "alpha = 0.6");
    std::fs::write(&path, text).unwrap();
    assert_eq!(
        exit_code(&run(
            Command::Solve(SolveKind::Dpp),
            &cfg(path.to_str().unwrap(), tmp.path())
        )),
        2
    );

    let mut o = run(Command::Cz(CzKind::Decompose), &cfg("dirac-2d", tmp.path())).unwrap();
    assert_eq!(o.exit_code(), 0);
    o.manifest.pass = false;
    assert_eq!(exit_code(&Ok(o)), 4);
}

#[test]
fn command_line_front_end() {
    let bin = env!("CARGO_BIN_EXE_dpp-lab");
    let tmp = tempfile::tempdir().unwrap();
    let list = Proc::new(bin).arg("list").output().unwrap();
    assert!(list.status.success());
    assert!(String::from_utf8_lossy(&list.stdout).contains("ellipsoid-2d"));

    let out = Proc::new(bin)
        .args([
            "cz",
            "fuzz",
            "--scenario",
            "linear-1d",
            "--seed",
            "9",
            "--out",
        ])
        .arg(tmp.path())
        .env(WORKERS_ENV, "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));

    let bad = Proc::new(bin)
        .args(["solve", "dpp", "--scenario", "nope", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
