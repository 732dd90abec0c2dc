use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brachistochrone::io::{load_trajectory, read_bloch_csv, read_trajectory_json, write_trajectory_csv};
use brachistochrone::propagator::{Sample, Trajectory};
use brachistochrone::hilbert::HermitianOperator;
use brachistochrone::qubit_restricted::count_nodes;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brachistochrone")).args(args).output().unwrap()
}

fn run_config(config: &Path, output: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<&std::ffi::OsStr> = vec!["--config".as_ref(), config.as_os_str(), "--output".as_ref(), output.as_os_str()];
    args.extend(extra.iter().map(|s| std::ffi::OsStr::new(s)));
    run(&args)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn isotropic_config_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("isotropic.json"), &dir.path().join("iso"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("solver=isotropic"), "{stdout}");
    assert!(stdout.contains("T=1.5707963267948966"), "{stdout}");
    for suffix in ["trajectory.csv", "trajectory.json", "bloch.csv"] {
        assert!(dir.path().join(format!("iso.{suffix}")).exists(), "{suffix}");
    }
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"schema": 1, "solver": "qubit", "omegaa": 1.0}"#);
    let out = run_config(&cfg, &dir.path().join("x"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("omegaa"), "{}", stderr(&out));
}

#[test]
fn invalid_values_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"schema": 1, "solver": "qubit", "omega": -1.0}"#, "omega"),
        (r#"{"schema": 2, "solver": "qubit"}"#, "schema"),
        (r#"{"schema": 1, "solver": "warp"}"#, "solver"),
        (r#"{"schema": 1, "solver": "isotropic", "dimension": 2, "psi_i": [1], "psi_f": [0, 1], "omega": 1.0}"#, "psi_i"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        let out = run_config(&cfg, &dir.path().join("x"), &[]);
        assert_eq!(out.status.code(), Some(1), "{body}");
        assert!(stderr(&out).contains(field), "{body}: {}", stderr(&out));
    }
}

#[test]
fn bad_flags_exit_with_one() {
    let out = run(&["--no-such-flag".as_ref()]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("qubit.json"), &dir.path().join("q"), &["--steps", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--steps"));
    let out = run(&["--help".as_ref()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn solver_errors_exit_with_two_and_name_the_variant() {
    let dir = tempfile::tempdir().unwrap();
    let same = write_config(
        dir.path(),
        "same.json",
        r#"{"schema": 1, "solver": "shoot", "dimension": 2, "psi_i": [1, 0], "psi_f": [[0, 1], 0], "omega": 1.0}"#,
    );
    let out = run_config(&same, &dir.path().join("s"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DegenerateEndpoints"), "{}", stderr(&out));

    let pauli = r#"[[[0, 1], [1, 0]], [[0, [0, -1]], [[0, 1], 0]], [[1, 0], [0, -1]]]"#;
    let blocked = write_config(
        dir.path(),
        "blocked.json",
        &format!(
            r#"{{"schema": 1, "solver": "shoot", "dimension": 2, "psi_i": [1, 0], "psi_f": [0, 1], "omega": 1.0, "forbidden": {pauli}}}"#
        ),
    );
    let out = run_config(&blocked, &dir.path().join("b"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ConstraintInfeasible"), "{}", stderr(&out));
}

#[test]
fn qubit_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("fig");
    let out = run_config(&configs().join("qubit.json"), &prefix, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let table: Value = serde_json::from_slice(&fs::read(dir.path().join("fig.families.json")).unwrap()).unwrap();
    let rows = table.as_array().unwrap();
    let kl: Vec<(u64, u64)> = rows.iter().map(|r| (r["k"].as_u64().unwrap(), r["l"].as_u64().unwrap())).collect();
    assert_eq!(&kl[..3], &[(0, 1), (1, 2), (2, 3)]);
    let times = [1.0f64, 3f64.sqrt(), 5f64.sqrt()].map(|s| s * std::f64::consts::FRAC_PI_2);
    for (row, t) in rows.iter().zip(times) {
        assert!((row["T"].as_f64().unwrap() - t).abs() < 1e-12);
    }

    for (k, l, nodes) in [(0, 1, 0), (1, 2, 1), (2, 3, 2)] {
        let csv = dir.path().join(format!("fig.family_k{k}_l{l}.csv"));
        let samples = read_bloch_csv(std::io::BufReader::new(fs::File::open(&csv).unwrap())).unwrap();
        assert_eq!(count_nodes(&samples).unwrap(), nodes, "({k},{l})");

        let path = dir.path().join(format!("fig.family_k{k}_l{l}.trajectory.json"));
        let bytes = fs::read(&path).unwrap();
        let traj = read_trajectory_json(bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        brachistochrone::io::write_trajectory_json(&traj, &mut again).unwrap();
        assert_eq!(again, bytes);
    }
}

#[test]
fn max_l_flag_limits_the_families() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("qubit.json"), &dir.path().join("one"), &["--max-l", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table: Value = serde_json::from_slice(&fs::read(dir.path().join("one.families.json")).unwrap()).unwrap();
    assert_eq!(table.as_array().unwrap().len(), 1);
}

fn verify_config(dir: &Path, trajectory: &Path) -> PathBuf {
    let text = fs::read_to_string(configs().join("verify.json"))
        .unwrap()
        .replace("../out/shoot.trajectory.csv", trajectory.to_str().unwrap());
    write_config(dir, "verify.json", &text)
}

fn verdict(report: &Path) -> String {
    let v: Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    v["verdict"].as_str().unwrap().to_owned()
}

#[test]
fn verify_accepts_shot_trajectory_and_rejects_tampered_copy() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("shoot.json"), &dir.path().join("shot"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let traj_path = dir.path().join("shot.trajectory.csv");

    let cfg = verify_config(dir.path(), &traj_path);
    let out = run_config(&cfg, &dir.path().join("good"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(verdict(&dir.path().join("good.report.json")), "pass");

    // push every Hamiltonian off the allowed subspace
    let traj = load_trajectory(&traj_path).unwrap();
    let kick = HermitianOperator::pauli_z().scale(0.05);
    let samples: Vec<Sample> = traj.samples().iter().map(|s| Sample { h: &s.h + &kick, ..s.clone() }).collect();
    let tampered = Trajectory::new(traj.dt(), samples).unwrap();
    let bad_path = dir.path().join("tampered.trajectory.csv");
    write_trajectory_csv(&tampered, fs::File::create(&bad_path).unwrap()).unwrap();
    let cfg = verify_config(dir.path(), &bad_path);
    let out = run_config(&cfg, &dir.path().join("bad"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(verdict(&dir.path().join("bad.report.json")), "fail");
}

#[test]
fn shoot_writes_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("shoot.json"), &dir.path().join("p"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let params: Value = serde_json::from_slice(&fs::read(dir.path().join("p.params.json")).unwrap()).unwrap();
    let t = params["T"].as_f64().unwrap();
    assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-6, "{t}");
    assert_eq!(params["restarts"].as_array().unwrap().len(), 32);
}
