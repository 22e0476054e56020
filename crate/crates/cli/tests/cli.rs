//! End-to-end runs of the `heatsource` binary and its library entry point.

use std::path::Path;
use std::process::Command as Process;

use heatsource_cli::{parse_args, CliError, Command, RunConfig};

fn bin() -> Process {
    let mut p = Process::new(env!("CARGO_BIN_EXE_heatsource"));
    p.env_remove("HEATSOURCE_OUTDIR");
    p
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from summary"))
        .to_string()
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "command=invert\nalpha=1e-6\nn_x=6\n");
    let c = parse_args(["heatsource", "--config", &cfg, "--alpha", "1e-4"], None).unwrap();
    assert_eq!(c.command, Command::Invert);
    assert_eq!(c.alpha, 1e-4);
    assert_eq!(c.n_x, 6);
    let c = parse_args(["heatsource", "sweep", "--n-x", "3"], None).unwrap();
    assert_eq!((c.command, c.n_x), (Command::Sweep, 3));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let c = parse_args(["heatsource", "invert"], Some("/tmp/elsewhere")).unwrap();
    assert_eq!(c.out_dir, Path::new("/tmp/elsewhere"));
    let c = parse_args(["heatsource", "invert", "--out_dir", "here"], Some("/x")).unwrap();
    assert_eq!(c.out_dir, Path::new("here"));
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(exit_code(&[]), 2);
    assert_eq!(exit_code(&["invert", "--bogus", "1"]), 2);
    assert_eq!(exit_code(&["--config", "/nonexistent/run.cfg"]), 3);
    let cfg = write_config(dir.path(), "command=invert\nalpha=abc\n");
    assert_eq!(exit_code(&["--config", &cfg]), 4);
    let cfg = write_config(dir.path(), "command=invert\nno equals sign\n");
    assert_eq!(exit_code(&["--config", &cfg]), 4);
    assert_eq!(exit_code(&["invert", "--epsilon", "-1", "--out_dir", d]), 5);
    assert_eq!(exit_code(&["invert", "--sensor", "9", "--out_dir", d]), 5);
    assert_eq!(exit_code(&["invert", "--case", "nope", "--out_dir", d]), 5);
    assert_eq!(exit_code(&["--help"]), 0);
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# comment\ncommand=invert\nmax_iters=ten\n");
    let out = bin().args(["--config", &cfg]).output().unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("run.cfg:3"), "{stderr}");
    let e = parse_args(["heatsource", "--config", &cfg], None).unwrap_err();
    assert_eq!(e.exit_code(), 4);
    assert!(matches!(e, CliError::Parse { .. }));
}

#[test]
fn invert_writes_summary_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bin()
        .args([
            "invert",
            "--n_x",
            "6",
            "--n_t",
            "5",
            "--out_dir",
            d,
            "--run_id",
            "ex1",
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let summary = std::fs::read_to_string(dir.path().join("ex1_summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "result.status"), "converged");
    let iterations: usize = summary_value(&summary, "result.iterations")
        .parse()
        .unwrap();
    let cost: f64 = summary_value(&summary, "result.final_cost")
        .parse()
        .unwrap();
    assert!(cost < 1e-3);
    for key in ["result.e_f", "result.e_u0"] {
        let v: f64 = summary_value(&summary, key).parse().unwrap();
        assert!(v.is_finite() && v > 0.0, "{key} = {v}");
    }

    let (header, trace) = read_csv(&dir.path().join("ex1_trace.csv"));
    assert_eq!(header[..2], ["iteration".to_string(), "cost".to_string()]);
    assert_eq!(trace.len(), iterations + 1);
    assert_eq!(trace.last().unwrap()[1], cost);

    let (_, source) = read_csv(&dir.path().join("ex1_source.csv"));
    assert_eq!(source.len(), 101);
    // Exact source column: F(t) = -e^{-t}, written with 10 digits.
    for row in &source {
        assert!((row[1] + (-row[0]).exp()).abs() < 1e-9);
    }
    let (_, initial) = read_csv(&dir.path().join("ex1_initial.csv"));
    assert_eq!(initial.len(), 101);
    assert!((initial[0][0] + std::f64::consts::FRAC_PI_2).abs() < 1e-9);
}

#[test]
fn summary_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = parse_args(
        [
            "heatsource",
            "forward",
            "--out_dir",
            d,
            "--phi",
            "1,0.5",
            "--theta",
            "0,1,0",
            "--restart_period",
            "7",
            "--sweep_sizes",
            "2x2,3x1",
        ],
        None,
    )
    .unwrap();
    let out = heatsource_cli::dispatch(&cfg).unwrap();
    let text = std::fs::read_to_string(&out.summary).unwrap();
    let back = RunConfig::from_summary(&text, &out.summary).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn forward_with_zero_params_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let code = exit_code(&[
        "forward",
        "--phi",
        "0,0",
        "--theta",
        "0,0,0",
        "--out_dir",
        d,
        "--i_x",
        "20",
        "--i_t",
        "20",
    ]);
    assert_eq!(code, 0);
    for (name, rows) in [("final", 21), ("sensor", 20)] {
        let (_, data) = read_csv(&dir.path().join(format!("forward_{name}.csv")));
        assert_eq!(data.len(), rows);
        assert!(data.iter().all(|r| r[1] == 0.0), "{name}");
    }
}

#[test]
fn forward_default_reproduces_example_final_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(exit_code(&["forward", "--out_dir", d]), 0);
    let (_, data) = read_csv(&dir.path().join("forward_final.csv"));
    // u(x, 2) = (sin x + 1) e^{-2}; the default basis fits it closely.
    let worst = data
        .iter()
        .map(|r| (r[1] - (r[0].sin() + 1.0) * (-2.0f64).exp()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-2, "worst {worst}");
}

#[test]
fn sensitivity_writes_four_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(exit_code(&["sensitivity", "--out_dir", d]), 0);
    for (name, series) in [("j11", 6), ("j21", 6), ("j12", 5), ("j22", 5)] {
        let (header, rows) = read_csv(&dir.path().join(format!("sensitivity_{name}.csv")));
        assert_eq!(header.len(), series + 1, "{name}");
        assert!(!rows.is_empty());
    }
}

#[test]
fn iteration_cap_exits_with_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bin()
        .args(["invert", "--max_iters", "1", "--out_dir", d])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6));
    let summary = std::fs::read_to_string(dir.path().join("invert_summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "result.status"), "not_converged");
    assert_eq!(summary_value(&summary, "result.iterations"), "1");
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let code = exit_code(&[
        "sweep",
        "--sweep_sizes",
        "3x2",
        "--sweep_sensors",
        "0.99,2.97",
        "--sweep_alphas",
        "1e-6,1e-4",
        "--i_x",
        "40",
        "--i_t",
        "40",
        "--jobs",
        "2",
        "--out_dir",
        d,
    ]);
    assert_eq!(code, 0);
    let mut r = csv::Reader::from_path(dir.path().join("sweep_sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let num = |row: &csv::StringRecord, i: usize| row[i].parse::<f64>().unwrap();
    assert_eq!(num(&rows[0], 2), 0.99);
    assert_eq!(num(&rows[1], 3), 1e-4);
    assert_eq!(num(&rows[2], 2), 2.97);
}
