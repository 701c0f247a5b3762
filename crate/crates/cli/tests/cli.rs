use std::fs;
use std::path::Path;
use std::process::Command;

use klmdp_cli::plot::{parse_summary, render_svg};
use klmdp_cli::track::{SUMMARY_HEADER, TRACE_HEADER};
use klmdp_cli::{cmd_plot, cmd_solve, cmd_track, ExperimentConfig, SolveOptions};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_klmdp"));
    cmd.env_clear();
    cmd
}

fn put(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn smoke_config(dir: &Path, runs: usize, horizon: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(
        &format!(
            r#"{{"graph": {{"grid": {{"rows": 4, "cols": 4}}}}, "runs": {runs}, "horizon": {horizon}, "pool_size": 5, "output_dir": {:?}}}"#,
            dir.to_str().unwrap()
        ),
        Vec::new(),
    )
    .unwrap()
}

#[test]
fn solve_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = put(dir.path(), "p.csv", "0.5,0.5\n0.5,0.5\n");
    let f = put(dir.path(), "f.csv", "0, 0.6931471805599453\n");
    let out = bin().arg("solve").arg(&p).arg(&f).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("0.287682"), "{stdout}");
}

#[test]
fn solve_zero_cost_returns_input_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let text = "0.2,0.3,0.5\n0.1,0.8,0.1\n0.6,0.2,0.2\n";
    let p = put(dir.path(), "p.csv", text);
    let f = put(dir.path(), "f.csv", "0\n0\n0\n");
    let k = dir.path().join("k.csv");
    let h = dir.path().join("h.csv");
    let report = cmd_solve(&SolveOptions {
        passive: p.clone(),
        cost: f,
        h_out: Some(h.clone()),
        kernel_out: Some(k.clone()),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(report.solution.lambda, 0.0);
    let input = klmdp::textio::parse_matrix(text).unwrap();
    let written = klmdp::textio::parse_matrix(&fs::read_to_string(k).unwrap()).unwrap();
    for (a, b) in input.rows().flatten().zip(written.rows().flatten()) {
        assert!((a - b).abs() <= 1e-12);
    }
    let hv = klmdp::textio::parse_vector(&fs::read_to_string(h).unwrap()).unwrap();
    assert!(hv.iter().all(|&x| x == 0.0));
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let f2 = put(dir.path(), "f2.csv", "0\n1\n");

    let bad = put(dir.path(), "bad.csv", "0.5,0.5\n0,0\n");
    let out = bin().arg("solve").arg(&bad).arg(&f2).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let reducible = put(dir.path(), "red.csv", "1,0\n0,1\n");
    let out = bin().arg("solve").arg(&reducible).arg(&f2).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let sticky = put(dir.path(), "sticky.csv", "0.999,0.001\n0.001,0.999\n");
    let out = bin()
        .args(["solve", "--max-iterations", "2"])
        .arg(&sticky)
        .arg(&f2)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let missing = bin().arg("solve").arg(dir.path().join("none.csv")).arg(&f2).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let cfg = put(dir.path(), "c.json", r#"{"pool_size": "many"}"#);
    let out = bin().arg("track").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pool_size"));
}

#[test]
fn track_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_track(&smoke_config(dir.path(), 1, 10), Some(1)).unwrap();
    assert_eq!(report.trace_files.len(), 1);
    let trace = fs::read_to_string(&report.trace_files[0]).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), 11);
    let summary = fs::read_to_string(&report.summary_file).unwrap();
    assert!(summary.starts_with(SUMMARY_HEADER));
    assert_eq!(summary.lines().count(), 11);
}

#[test]
fn track_binary_honours_env_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["track", "--seed", "5", "--workers", "1", "--output-dir"])
        .arg(dir.path())
        .env("KLMDP_HORIZON", "12")
        .env("KLMDP_RUNS", "3")
        .env("KLMDP_POOL_SIZE", "0")
        .env("KLMDP_GRAPH", r#"{"grid":{"rows":3,"cols":3}}"#)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 13);
    assert!(summary.lines().nth(1).unwrap().ends_with(",,"));
    assert!(dir.path().join("trace_002.csv").exists());
}

#[test]
fn track_is_independent_of_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_track(&smoke_config(a.path(), 4, 30), Some(1)).unwrap();
    cmd_track(&smoke_config(b.path(), 4, 30), Some(3)).unwrap();
    for name in ["summary.csv", "trace_000.csv", "trace_003.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn plot_flat_and_two_point_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let flat = put(dir.path(), "flat.csv", &format!("{SUMMARY_HEADER}\n1,0,0,,\n2,0,0,,\n3,0,0,,\n"));
    let svg_path = dir.path().join("flat.svg");
    cmd_plot(&flat, &svg_path).unwrap();
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let line = svg.lines().find(|l| l.contains("class=\"mean\"")).unwrap();
    let zero = svg.lines().find(|l| l.contains("class=\"zero\"")).unwrap();
    let zero_y = zero.split("y1=\"").nth(1).unwrap().split('"').next().unwrap();
    let points = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert!(points.split(' ').all(|p| p.split(',').nth(1) == Some(zero_y)));

    let two = format!("{SUMMARY_HEADER}\n1,1,0.5,-1,0.25\n2,2,1,-2,0.5\n");
    let table = parse_summary(&two, Path::new("two.csv")).unwrap();
    let svg = render_svg(&table);
    let means: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"mean\"")).collect();
    assert_eq!(means.len(), 2);
    for m in means {
        let pts = m.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }
    assert_eq!(svg.matches("class=\"band\"").count(), 2);
    assert!(svg.contains("time step t") && svg.contains("regret"));

    let wrong = put(dir.path(), "wrong.csv", "t,mean\n1,0\n");
    let out = bin().arg("plot").arg(&wrong).arg(dir.path().join("w.svg")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
