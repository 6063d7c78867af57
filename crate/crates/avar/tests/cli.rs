use std::path::PathBuf;
use std::process::Command;

use avar::catalog;
use avar::cli::cli_main;
use avar::formats::{load_operator, read_grid_function};
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("avar").chain(args.iter().copied());
    let code = cli_main(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn run_json(args: &[&str]) -> Value {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["meta"]["command"], args[0]);
    v
}

#[test]
fn shipped_operator_files_match_the_catalog() {
    for name in catalog::NAMES {
        let from_file = load_operator(&data(&format!("{name}.json"))).unwrap();
        assert_eq!(from_file, catalog::lookup(name).unwrap().operator, "{name}");
    }
}

#[test]
fn gradient_file_is_elliptic() {
    let v = run_json(&["check-ellipticity", "--operator", &data("gradient2d.json")]);
    assert_eq!(v["result"]["verdict"], "elliptic");
    let v = run_json(&[
        "check-ellipticity",
        "--operator",
        &data("gradient2d.json"),
        "--field",
        "complex",
    ]);
    assert_eq!(v["result"]["verdict"], "elliptic");
    let v = run_json(&[
        "check-ellipticity",
        "--operator",
        "cauchy_riemann",
        "--field",
        "complex",
    ]);
    assert_eq!(v["result"]["verdict"], "not_elliptic");
    assert!(v["result"]["witness"]["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn rigid_motion_kernel_has_dimension_three() {
    let v = run_json(&[
        "kernel",
        "--operator",
        &data("symgrad2d.json"),
        "--max-degree",
        "8",
    ]);
    assert_eq!(v["result"]["dimension"], 3);
    assert_eq!(v["result"]["stabilized"], true);
}

#[test]
fn interval_trace_constant() {
    let v = run_json(&[
        "poincare",
        "--operator",
        &data("gradient1d.json"),
        "--domain",
        &data("interval.json"),
        "--mode",
        "trace",
        "--gamma",
        "left",
        "--p",
        "2",
        "--h",
        "0.001953125",
    ]);
    let c = v["result"]["estimate"]["value"].as_f64().unwrap();
    assert!((c - 2.0 / std::f64::consts::PI).abs() < 2e-3, "{c}");
    assert!(
        v["result"]["estimate"]["eigenvalue"]["residual"]
            .as_f64()
            .unwrap()
            <= 1e-8
    );
    assert_eq!(v["meta"]["domain_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn eigenvector_round_trips_through_the_grid_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.avgf");
    let path_arg = path.to_string_lossy().into_owned();
    run_json(&[
        "poincare",
        "--operator",
        "symgrad2d",
        "--domain",
        &data("unit-square.json"),
        "--h",
        "0.125",
        "--eigenvector-out",
        &path_arg,
    ]);
    let (u, dim_space) = read_grid_function(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(dim_space, 2);
    assert_eq!(u.len(), 64);
    assert_eq!(u.components(), 2);
    let l2: f64 = u.values().iter().map(|v| v * v).sum::<f64>() / 64.0;
    assert!((l2 - 1.0).abs() < 1e-12);
}

#[test]
fn every_command_emits_json() {
    let square = data("unit-square.json");
    let commands: Vec<Vec<&str>> = vec![
        vec!["cancelling", "--operator", "symgrad2d"],
        vec![
            "projection",
            "--operator",
            "symgrad2d",
            "--domain",
            &square,
            "--h",
            "0.0625",
        ],
        vec![
            "projection",
            "--operator",
            "gradient2d",
            "--domain",
            &square,
            "--h",
            "0.0625",
            "--subset",
            r#"{"shape":"box","lo":[0,0],"hi":[0.5,0.5]}"#,
        ],
        vec![
            "poincare",
            "--operator",
            "gradient2d",
            "--domain",
            &square,
            "--h",
            "0.0625",
            "--mode",
            "trace",
            "--gamma",
            "boundary",
        ],
        vec![
            "poincare",
            "--operator",
            "gradient2d",
            "--domain",
            &square,
            "--h",
            "0.0625",
            "--p",
            "1",
            "--samples",
            "10",
        ],
        vec![
            "verify",
            "--operator",
            "gradient2d",
            "--domain",
            &square,
            "--h",
            "0.0625",
            "--samples",
            "20",
        ],
        vec![
            "sobolev",
            "--operator",
            "gradient2d",
            "--h",
            "0.0625",
            "--samples",
            "10",
        ],
        vec!["scaling", "--operator", "gradient2d", "--h", "0.0625"],
        vec!["counterexample", "--operator", "dx_only", "--h", "0.0625"],
    ];
    for args in &commands {
        let v = run_json(args);
        assert!(v["result"].is_object(), "{args:?}");
    }
}

#[test]
fn input_errors_exit_with_one() {
    assert_eq!(run(&["poincare", "--bogus"]).0, 1);
    assert_eq!(run(&["suite", ""]).0, 1);
    assert_eq!(run(&["suite", "nonsense"]).0, 1);
    assert_eq!(run(&["kernel", "--operator", "no-such-file.json"]).0, 1);
    assert_eq!(run(&["kernel"]).0, 1);
    assert_eq!(
        run(&["sobolev", "--operator", "gradient1d", "--h", "0.0625"]).0,
        1
    );
    assert_eq!(
        run(&["poincare", "--operator", "dx_only", "--h", "0.25"]).0,
        1
    );
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn undersized_constants_fail_verification() {
    let (code, out, err) = run(&[
        "verify",
        "--operator",
        "gradient2d",
        "--domain",
        "unit-square",
        "--h",
        "0.0625",
        "--samples",
        "10",
        "--constant",
        "0.01",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("violations"));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["verification"]["violations"], 10);
}

#[test]
fn scaling_table_as_csv() {
    let (code, out, _) = run(&[
        "scaling",
        "--operator",
        "gradient2d",
        "--h",
        "0.0625",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["radius", "h", "constant", "ratio", "eigen_residual"]
    );
    let ratios: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[3].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.iter().all(|r| (r / ratios[1] - 1.0).abs() < 0.02));
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "verify",
        "--operator",
        "symgrad2d",
        "--domain",
        "unit-square",
        "--h",
        "0.0625",
        "--samples",
        "20",
    ];
    assert_eq!(run(&args).1, run(&args).1);
    let suite = ["suite", "catalog", "--seed", "42"];
    assert_eq!(run(&suite), run(&suite));
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel.json");
    let (code, out, _) = run(&[
        "kernel",
        "--operator",
        "gradient2d",
        "--out",
        &path.to_string_lossy(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["dimension"], 1);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_avar");
    let ok = Command::new(bin)
        .args(["check-ellipticity", "--operator", &data("gradient2d.json")])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    serde_json::from_slice::<Value>(&ok.stdout).unwrap();
    let bad = Command::new(bin)
        .args(["kernel", "--unknown"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
