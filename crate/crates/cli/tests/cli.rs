use std::path::Path;
use std::process::{Command, Output};

fn dualprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualprice")).args(args).output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn table1_prints_csv() {
    let out = dualprice(&["table1", "--a-over-sigma", "6"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&row[3..5], &[1.0, 4.0]);
}

#[test]
fn example2_writes_table_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dualprice(&["--out", d, "--seed", "5", "example2", "--N", "2000", "--k", "3", "--T", "100,400"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "example2.csv");
    assert_eq!(csv.lines().count(), 3);
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), "example2.json")).unwrap();
    assert_eq!(meta["master_seed"], 5);
    assert_eq!(meta["oracle"], "bisection");
}

#[test]
fn thread_count_does_not_change_csv() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let out = dualprice(&["--out", d, "--threads", threads, "example3", "--B", "12", "--N", "3000", "--k", "4", "--T", "500"]);
        assert!(out.status.success());
        read(dir.path(), "example3_B12.csv")
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn stopping_json_output() {
    let out = dualprice(&["--format", "json", "stopping", "--delta", "1e-4", "--N", "2000", "--k", "2"]);
    assert!(out.status.success());
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table["columns"][0], "delta");
    assert_eq!(table["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn solve_instance_file_with_each_solver() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("instance.json");
    std::fs::write(
        &file,
        r#"{"m": 2, "N": 3, "capacities": [2, 1], "B": 12, "sigma_floor": 1,
            "users": [{"a": 6, "sigma": 1, "route": [0, 1]},
                      {"a": 6, "sigma": 1, "route": [0]},
                      {"a": 6, "sigma": 1, "route": [1]}]}"#,
    )
    .unwrap();
    let f = file.to_str().unwrap();
    for (solver, tol) in [("sgd", 0.25), ("pgd", 1e-3), ("fast", 1e-6)] {
        let out = dualprice(&["solve", "--scenario-file", f, "--solver", solver, "--T", "3000"]);
        assert!(out.status.success(), "{solver}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!((first[1] - 1.0).abs() < tol, "{solver}: {text}");
    }
    // bisection needs a single link
    let out = dualprice(&["solve", "--scenario-file", f, "--solver", "bisect"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_generator_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("scenario.json");
    std::fs::write(
        &file,
        r#"{"kind": "single-link", "users": 5000, "value_bound": 100, "sigma": 1,
            "capacities": [5], "populations": 2, "seed": 9}"#,
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let f = file.to_str().unwrap();
    let out = dualprice(&["--out", d, "solve", "--scenario-file", f, "--solver", "bisect", "--population", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "solve.csv");
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[1], row[2]);
    let out = dualprice(&["solve", "--scenario-file", f, "--population", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_a_solver_error() {
    let out = dualprice(&["solve", "--scenario-file", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn quick_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dualprice(&["--out", d, "verify-bounds", "--quick"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(read(dir.path(), "verify.csv").starts_with("name,passed,worst,detail"));
}
