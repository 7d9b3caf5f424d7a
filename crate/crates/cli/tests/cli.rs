use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn case(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(format!("{name}.toml"))
}

fn heatuc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatuc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("HEATUC_SOLVER")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_describes_case() {
    let o = heatuc(&["validate", "--case", case("small").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o).trim(),
        "small: 4 periods, 3 buses, 2 heat nodes, 3 heat units"
    );
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&heatuc(&["frobnicate"])), 1);
    assert_eq!(code(&heatuc(&["compare"])), 1);
    assert_eq!(code(&heatuc(&[])), 1);
    assert_eq!(code(&heatuc(&["--help"])), 0);
}

#[test]
fn missing_case_exits_one() {
    let o = heatuc(&["validate", "--case", "/nonexistent.toml"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error (input)"));
}

#[test]
fn bad_gamma_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatuc(&[
        "uc",
        "--case",
        case("small").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--gamma",
        "1.0",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn infeasible_case_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(case("small")).unwrap().replace(
        "profile = [16.0, 20.0, 24.0, 28.0]",
        "profile = [16.0, 20.0, 240.0, 28.0]",
    );
    let p = dir.path().join("tight.toml");
    fs::write(&p, text).unwrap();
    let out = dir.path().join("out");
    let o = heatuc(&[
        "clear",
        "--case",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(out.join("error.json").is_file());
}

#[test]
fn oracle_budget_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatuc(&[
        "oracle",
        "--case",
        case("small").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--budget",
        "1",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn compare_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = heatuc(&[
        "compare",
        "--case",
        case("small").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.lines().any(|l| l.starts_with("decoupled")));
    assert!(s.lines().any(|l| l.starts_with("aware")));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 13);
    assert!(dir.path().join("comparison.csv").is_file());
}

#[test]
fn tolerances_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec![
            "uc",
            "--model",
            "decoupled",
            "--case",
            case("small").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        heatuc(&refs)
    };
    let base = run(&[]);
    assert_eq!(code(&base), 0);
    assert!(!stdout(&base).contains("violations 0"));

    let loose = dir.path().join("loose.toml");
    fs::write(&loose, "validity = 1e9\n").unwrap();
    let o = run(&["--tolerances", loose.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("violations 0"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "validty = 1.0\n").unwrap();
    assert_eq!(code(&run(&["--tolerances", bad.to_str().unwrap()])), 1);
}

#[test]
fn unknown_backend_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_heatuc"))
        .args([
            "clear",
            "--case",
            case("small").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("HEATUC_SOLVER", "bogus")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
