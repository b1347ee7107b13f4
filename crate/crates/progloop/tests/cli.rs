use std::path::{Path, PathBuf};

use progloop::cli::{run, EXIT_BACKEND, EXIT_FAIL, EXIT_OK, EXIT_USAGE};
use progloop::model::parse_model;
use progloop_core::formula::parse_formula;
use progloop_core::modelcheck::Checker;

const RUNNING_CHAIN: &str = r#"{"states":[{"id":"s","ap":[]},{"id":"t","ap":["a"]},{"id":"u","ap":["a"]}],
 "edges":[{"from":"s","to":"t","p":"1"},{"from":"t","to":"s","p":"3/5"},
          {"from":"t","to":"u","p":"2/5"},{"from":"u","to":"u","p":"1"}]}"#;

const PSI: &str = "G=1[F>=0.5[a & F>=0.2[!a]] | a] & F=1[G=1[a]] & !a";

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn progloop(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("progloop").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn running_chain(dir: &Path) -> PathBuf {
    let p = dir.join("chain.json");
    std::fs::write(&p, RUNNING_CHAIN).unwrap();
    p
}

#[test]
fn check_running_example() {
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let m = m.to_str().unwrap();
    let r = progloop(&["check", "--model", m, "--state", "s", "--formula", PSI]);
    assert_eq!((r.code, r.stdout.as_str()), (EXIT_OK, "true\n"));
    let r = progloop(&["check", "--model", m, "--state", "t", "--formula", PSI]);
    assert_eq!((r.code, r.stdout.as_str()), (EXIT_FAIL, "false\n"));
    let r = progloop(&["check", "--model", m, "--formula", PSI]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.starts_with("sat: {s}\n"));
    assert!(r.stdout.contains("P(F[!a]): s=1 t=3/5 u=0"));
}

#[test]
fn measure_running_example() {
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let r = progloop(&[
        "measure",
        "--model",
        m.to_str().unwrap(),
        "--state",
        "s",
        "--set",
        "uc",
        "--formula",
        PSI,
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("deg: {G[a]}\n"));
    assert!(r.stdout.contains("cf: {}\n"));
    assert!(r.stdout.ends_with("measure: 7\n"));

    let r =
        progloop(&["--json", "measure", "--model", m.to_str().unwrap(), "--state", "s", "--formula", PSI]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["measure"], 7);
    assert_eq!(v["b"], 21);
}

#[test]
fn closure_and_unsatisfied_state() {
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let m = m.to_str().unwrap();
    let r = progloop(&["--json", "closure", "--model", m, "--state", "s", "--formula", PSI]);
    assert_eq!(r.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["closure"].as_array().unwrap().len(), 4);
    assert_eq!(v["theta"].as_array().unwrap().len(), 2);
    let r = progloop(&["closure", "--model", m, "--state", "u", "--formula", PSI]);
    assert_eq!(r.code, EXIT_FAIL);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("does not satisfy"));
}

#[test]
fn loop_verify_and_search() {
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let m = m.to_str().unwrap();
    let or = "F>=0.5[a & F>=0.2[!a]] | a";
    let sets = serde_json::json!([
        [PSI, "G=1[F>=0.5[a & F>=0.2[!a]] | a]", or, "F>=0.5[a & F>=0.2[!a]]", "F=1[G=1[a]]", "!a"],
        [or, "a"],
        [or, "F>=0.5[a & F>=0.2[!a]]", "a & F>=0.2[!a]", "a", "F>=0.2[!a]"],
    ]);
    let file = dir.path().join("loop.json");
    std::fs::write(&file, sets.to_string()).unwrap();
    let f = file.to_str().unwrap();
    let r = progloop(&["loop", "verify", "--model", m, "--state", "s", "--formula", PSI, "--sets", f]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stdout);
    assert!(r.stdout.starts_with("progress loop\n"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::json!([["a"]]).to_string()).unwrap();
    let r = progloop(&[
        "loop",
        "verify",
        "--model",
        m,
        "--state",
        "s",
        "--formula",
        PSI,
        "--sets",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_FAIL);
    assert!(r.stdout.starts_with("not a progress loop"));

    for extra in [&[][..], &["--generic"][..]] {
        let mut args = vec!["loop", "search", "--model", m, "--state", "s", "--formula", PSI];
        args.extend_from_slice(extra);
        let r = progloop(&args);
        assert_eq!(r.code, EXIT_OK, "{:?}: {}", extra, r.stderr);
        assert!(r.stdout.starts_with("L0 = {"));
    }
}

#[test]
fn compress_writes_a_model_of_psi() {
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let out = dir.path().join("small.json");
    let r = progloop(&[
        "--json",
        "compress",
        "--model",
        m.to_str().unwrap(),
        "--state",
        "s",
        "--formula",
        PSI,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["trace"]["measure"], 7);
    let chain = parse_model(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let entry = chain.index_of(v["entry"].as_str().unwrap()).unwrap();
    assert!(Checker::new(&chain).holds(entry, &parse_formula(PSI).unwrap()));
    // JSON model in the report re-parses to the same chain
    let again = parse_model(&v["model"].to_string()).unwrap();
    assert_eq!(again, chain);
}

#[test]
fn sat_contradiction_is_unsat() {
    let r = progloop(&["sat", "--formula", "F=1[a] & G=1[!a]", "--bound", "2"]);
    assert_eq!(r.code, EXIT_FAIL);
    assert!(r.stdout.starts_with("unsat-up-to-n\n"));
}

#[test]
fn sat_finds_and_emits_models() {
    let r = progloop(&["--json", "sat", "--formula", "F>0.5[a] & !a", "--bound", "2"]);
    assert_eq!(r.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["result"], "sat");
    let chain = parse_model(&v["model"].to_string()).unwrap();
    let entry = chain.index_of(v["entry"].as_str().unwrap()).unwrap();
    assert!(Checker::new(&chain).holds(entry, &parse_formula("F>0.5[a] & !a").unwrap()));

    // needs a solver, and there is none
    if std::env::var_os(progloop::solver::SOLVER_ENV).is_none() {
        let r = progloop(&["sat", "--formula", "F>=1/3[a] & G>=2/3[!a] & !a", "--bound", "3"]);
        assert_eq!(r.code, EXIT_BACKEND);
        assert!(r.stdout.starts_with("unknown\n"));
    }

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("smt");
    let r = progloop(&[
        "sat",
        "--formula",
        "F>=1/3[a] & !a",
        "--bound",
        "2",
        "--emit-only",
        "--dump-smt",
        d.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK);
    let files: Vec<_> = std::fs::read_dir(&d).unwrap().collect();
    assert!(!files.is_empty());
    let text = std::fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
    assert!(text.starts_with("(set-logic QF_NRA)"));
}

#[test]
fn sat_with_a_broken_solver() {
    let r = progloop(&[
        "sat",
        "--formula",
        "F>=1/3[a] & G>=2/3[!a] & !a",
        "--bound",
        "3",
        "--no-probe",
        "--solver-cmd",
        "/nonexistent/solver {file}",
    ]);
    assert_eq!(r.code, EXIT_BACKEND);
    assert!(r.stderr.contains("cannot launch"));
}

#[test]
fn fragment_and_dot() {
    let r = progloop(&["fragment", "--formula", PSI]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("L1: false\nL2: true\nL3: true\n"));
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let r = progloop(&["export-dot", "--model", m.to_str().unwrap()]);
    assert!(r.stdout.contains("\"t\" -> \"s\" [label=\"3/5\"];"));
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(progloop(&[]).code, EXIT_USAGE);
    assert_eq!(progloop(&["bogus"]).code, EXIT_USAGE);
    assert_eq!(progloop(&["--help"]).code, EXIT_OK);
    assert_eq!(progloop(&["--version"]).code, EXIT_OK);
    let r = progloop(&["check", "--model", "/nonexistent.json", "--formula", "a"]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.starts_with("error: cannot read"));
    let dir = tempfile::tempdir().unwrap();
    let m = running_chain(dir.path());
    let m = m.to_str().unwrap();
    let r = progloop(&["check", "--model", m, "--formula", "a &"]);
    assert_eq!(r.code, EXIT_USAGE);
    let r = progloop(&["check", "--model", m, "--formula", "a", "--state", "w"]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.contains("no state `w`"));
    assert_eq!(progloop(&["sat", "--formula", "a", "--bound", "0"]).code, EXIT_USAGE);
    assert_eq!(progloop(&["sat", "--formula", "a", "--emit-only"]).code, EXIT_USAGE);
}

#[test]
fn binary_exit_status() {
    let exe = env!("CARGO_BIN_EXE_progloop");
    let out = std::process::Command::new(exe)
        .args(["sat", "--formula", "F=1[a] & G=1[!a]", "--bound", "2"])
        .env_remove(progloop::solver::SOLVER_ENV)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_FAIL));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("unsat-up-to-n"));
}
