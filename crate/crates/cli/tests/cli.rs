use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn qdmet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdmet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(csv: &str, row: usize, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.nth(row).unwrap().split(',').nth(col).unwrap().to_string()
}

#[test]
fn noiseless_vqe_on_h2_is_chemically_accurate() {
    let h2 = fixtures().join("h2/d0.735.fcidump");
    let o = qdmet(&["run", "--pipeline", "vqe", "--noise", "none", "--shots", "exact", "--fcidump", h2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(field(&out, 0, "method"), "VQE");
    assert_eq!(field(&out, 0, "distance"), "0.735");
    let err: f64 = field(&out, 0, "abs_error").parse().unwrap();
    assert!(err < 1.6e-3, "{err}");
    assert_eq!(field(&out, 0, "seed"), "0");
    assert_eq!(field(&out, 0, "config_hash").len(), 16);
}

#[test]
fn unknown_flag_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let h2 = fixtures().join("h2/d0.735.fcidump");
    let o = qdmet(&["run", "--fcidump", h2.to_str().unwrap(), "--bogus", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn refinement_without_history_is_a_usage_error() {
    let h4 = fixtures().join("h4/d1.000.fcidump");
    let o = qdmet(&["run", "--pipeline", "dmet-exact", "--refine", "--fcidump", h4.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    let bad = qdmet(&["run", "--rdm-backend", "sometimes", "--fcidump", h4.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = qdmet(&["run", "--fcidump", "no/such/file.fcidump"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = fixtures().join("h4");
    let args = [
        "sweep",
        "--fixtures",
        dir.to_str().unwrap(),
        "--distances",
        "1.0,2.5",
        "--methods",
        "dmet-exact,bath1",
        "--no-timing",
        "--jobs",
        "2",
    ];
    let a = qdmet(&args);
    let b = qdmet(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 5);
    // Rows come out in (distance, method) order whatever finished first.
    assert_eq!(field(&text, 0, "method"), "DMET-exact");
    assert_eq!(field(&text, 1, "method"), "Bath1");
    assert_eq!(field(&text, 2, "distance"), "2.500");
    let exact: f64 = field(&text, 2, "abs_error").parse().unwrap();
    assert!(exact < 1e-8);
}

#[test]
fn degenerate_sweep_matches_run() {
    let dir = fixtures().join("h4");
    let sweep = qdmet(&[
        "sweep", "--fixtures", dir.to_str().unwrap(), "--distances", "1.5", "--methods", "dmet-exact", "--no-timing",
    ]);
    let run = qdmet(&[
        "run",
        "--pipeline",
        "dmet-exact",
        "--fcidump",
        dir.join("d1.500.fcidump").to_str().unwrap(),
        "--no-timing",
    ]);
    assert_eq!(sweep.status.code(), Some(0));
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(sweep.stdout, run.stdout);
}

#[test]
fn missing_fixture_marks_the_row_and_fails() {
    let dir = fixtures().join("h4");
    let o = qdmet(&[
        "sweep", "--fixtures", dir.to_str().unwrap(), "--distances", "1.0,9.9", "--methods", "dmet-exact", "--no-timing",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert_eq!(field(&text, 0, "status"), "ok");
    assert!(field(&text, 1, "status").starts_with("error: missing fixture"));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# shared settings\npipeline = dmet-exact\nseed = 7\nbath-count = 1\nno-timing = true\n").unwrap();
    let h4 = fixtures().join("h4/d1.000.fcidump");
    let o = qdmet(&["run", "--config", cfg.to_str().unwrap(), "--fcidump", h4.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, 0, "method"), "Bath1-exact");
    assert_eq!(field(&text, 0, "seed"), "3");
    assert_eq!(field(&text, 0, "wall_time_s"), "");

    std::fs::write(&cfg, "colour = red\n").unwrap();
    let bad = qdmet(&["run", "--config", cfg.to_str().unwrap(), "--fcidump", h4.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn history_round_trips_into_refine() {
    let dir = tempfile::tempdir().unwrap();
    let h2 = fixtures().join("h2/d0.735.fcidump");
    let hist = dir.path().join("hist");
    let o = qdmet(&[
        "run",
        "--pipeline",
        "vqe",
        "--noise",
        "perth-like",
        "--shots",
        "1000",
        "--spsa-iterations",
        "40",
        "--fcidump",
        h2.to_str().unwrap(),
        "--history-dir",
        hist.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let file = hist.join("fragment0.csv");
    assert!(file.exists());
    let r = qdmet(&["refine", "--history", file.to_str().unwrap(), "--lambda-grid", "1e-6,1e-4,1e-2"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let scores = String::from_utf8_lossy(&r.stderr);
    assert_eq!(scores.lines().filter(|l| l.starts_with("sinefit ")).count(), 3);
    let text = stdout(&r);
    assert_eq!(text.lines().count(), 2);
    let lambda: f64 = field(&text, 0, "lambda").parse().unwrap();
    assert!([1e-6, 1e-4, 1e-2].contains(&lambda));
    let sigma: f64 = field(&text, 0, "sigma").parse().unwrap();
    assert!((0.0..=1.0).contains(&sigma));
    field(&text, 0, "theta_0").parse::<f64>().unwrap();

    let reeval = qdmet(&["refine", "--history", file.to_str().unwrap(), "--lambda-grid", "1e-4", "--select-lambda", "reeval"]);
    assert_eq!(reeval.status.code(), Some(2));
    assert!(reeval.stdout.is_empty());
}
