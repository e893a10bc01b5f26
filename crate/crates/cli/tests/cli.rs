use std::process::{Command, Output};

use overlap_cli::io::{LatticeReport, McReport, PointsJson, RhoReport};

const PTS1: &str = r#"{"points":[{"vertex":1,"z":[0,0],"w":[0.5,0]}]}"#;
const PTS_MACRO: &str = r#"{"points":[{"vertex":1,"z":[0,0.4],"w":[-0.5,0]}]}"#;

fn overlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlap")).args(args).env_remove("OVERLAP_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn lattice_two() {
    let o = overlap(&["lattice", "--ell", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let r: LatticeReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.size, 5);
}

#[test]
fn rho_single_vertex_is_minus_sixteen() {
    let o = overlap(&["rho", "--perm", "(1)", "--points", PTS1]);
    assert_eq!(o.status.code(), Some(0));
    let r: RhoReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r.value[0] + 16.0).abs() < 1e-12 && r.value[1].abs() < 1e-12);
}

#[test]
fn rho_empty_permutation_is_one() {
    let o = overlap(&["rho", "--perm", "()", "--points", PTS1]);
    let r: RhoReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.value, [1.0, 0.0]);
}

#[test]
fn json_round_trip_is_byte_stable() {
    let o = overlap(&["rho", "--perm", r#"{"cycles":[[1,2]]}"#, "--points",
        r#"{"points":[{"vertex":1,"z":[0.1,0.2],"w":[-0.3,0.1]},{"vertex":2,"z":[0.4,-0.2],"w":[0,-0.5]}]}"#]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let r: RhoReport = serde_json::from_str(&text).unwrap();
    assert_eq!(format!("{}\n", serde_json::to_string_pretty(&r).unwrap()), text);

    let pts: PointsJson = serde_json::from_str(PTS1).unwrap();
    let again: PointsJson = serde_json::from_str(&serde_json::to_string(&pts).unwrap()).unwrap();
    assert_eq!(pts, again);
}

#[test]
fn points_file_input() {
    let dir = std::env::temp_dir().join(format!("overlap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pts.json");
    std::fs::write(&path, PTS1).unwrap();
    let o = overlap(&["rho", "--perm", "(1)", "--points", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mc_is_deterministic_across_threads() {
    let base = ["mc", "fn", "--n", "16", "--samples", "300", "--seed", "7", "--points", PTS_MACRO];
    let a = overlap(&[&base[..], &["--threads", "1"]].concat());
    let b = overlap(&[&base[..], &["--threads", "3"]].concat());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let r: McReport = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(r.samples, 300);
    assert!(r.stderr > 0.0);
}

#[test]
fn mc_transfer_verifies() {
    let o = overlap(&["mc", "transfer", "--n", "6", "--samples", "4000", "--seed", "3", "--points", PTS_MACRO, "--verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_failure_exits_four() {
    // At N = 4 the finite-size bias of F_N dwarfs the standard error of 20000 samples.
    let o = overlap(&["mc", "fn", "--n", "4", "--samples", "20000", "--seed", "1", "--points",
        r#"{"points":[{"vertex":1,"z":[0.9,0],"w":[-0.9,0]}]}"#, "--verify"]);
    let r: McReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.sigmas > 5.0, "sigmas {}", r.sigmas);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn validation_errors_exit_two() {
    assert_eq!(overlap(&["rho", "--perm", "(1,2)(2)", "--points", PTS1]).status.code(), Some(2));
    assert_eq!(overlap(&["rho", "--perm", "(1,2)", "--points", PTS1]).status.code(), Some(2));
    let extra = r#"{"points":[{"vertex":1,"z":[0,0],"w":[0.5,0],"q":1}]}"#;
    assert_eq!(overlap(&["rho", "--perm", "(1)", "--points", extra]).status.code(), Some(2));
    assert_eq!(overlap(&["lattice"]).status.code(), Some(2));
    assert_eq!(overlap(&["lattice", "--ell", "9"]).status.code(), Some(2));
    assert_eq!(overlap(&["mc", "overlap-diag", "--n", "8", "--samples", "10"]).status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_three() {
    let coincident = r#"{"points":[{"vertex":1,"z":[0.2,0],"w":[0.2,0]}]}"#;
    let o = overlap(&["rho", "--perm", "(1)", "--points", coincident]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn csv_output() {
    let o = overlap(&["lattice", "--ell", "1", "--format", "csv"]);
    assert_eq!(stdout(&o), "index,element,preds\n0,(),\n1,(1),0\n");
}
