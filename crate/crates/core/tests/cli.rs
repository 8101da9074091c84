use std::path::Path;
use std::process::{Command, Output};

use qnls::cli::without_timings;
use qnls::config::{Mode, OutputFormat, ProfileKind};
use qnls::{CompanionVariant, QuadratureRule, RunConfig};
use serde_json::Value;

fn qnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn negative_horizon_is_a_usage_error() {
    let out = qnls(&["--T", "-1", "--nx", "32"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('T'));
}

#[test]
fn transpose_variant_with_odd_coefficient_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = qnls(&[
        "--variant",
        "reverse-space-time-transpose",
        "--mu3",
        "1,0",
        "--nx",
        "32",
        "--T",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu3"));
    assert!(!out_dir.join("summary.json").exists());
}

#[test]
fn coefficients_without_dispersion_property_are_rejected() {
    let out = qnls(&["--mu2", "1,0", "--nx", "32", "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "nx = 32\nbogus = 1\n");
    let out = qnls(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn unreadable_config_file_is_a_config_error() {
    let out = qnls(&["--config", "/nonexistent/qnls.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_profile_gives_zero_solution_and_unit_determinant() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        &format!("nx = 32\nT = 1.0\namplitude = 0.0\nout = {:?}\n", out_dir.to_str().unwrap()),
    );
    let out = qnls(&["--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out_dir);
    assert_eq!(s["min_det_abs"].as_f64(), Some(1.0));
    for cp in s["checkpoints"].as_array().unwrap() {
        let (header, rows) = read_csv(&out_dir.join(cp["file"].as_str().unwrap()));
        assert_eq!(header, ["x", "re_g", "im_g", "abs_g", "det_re", "det_im"]);
        assert_eq!(rows.len(), 32);
        for row in rows {
            assert_eq!(&row[1..4], &[0.0, 0.0, 0.0]);
            assert_eq!(&row[4..], &[1.0, 0.0]);
        }
    }
}

#[test]
fn runs_are_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = qnls(&["--nx", "32", "--T", "0.5", "--mode", "compare", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
        summaries.push(summary(&out_dir));
    }
    let mut a = without_timings(summaries[0].clone());
    let mut b = without_timings(summaries[1].clone());
    // The output directory is part of the echoed configuration.
    a["config"]["out"] = Value::Null;
    b["config"]["out"] = Value::Null;
    assert_eq!(a, b);
    for cp in summaries[0]["checkpoints"].as_array().unwrap() {
        let file = cp["file"].as_str().unwrap();
        let first = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let second = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(first, second, "{file}");
    }
}

#[test]
fn compare_mode_writes_both_solutions_and_their_difference() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = qnls(&["--nx", "32", "--T", "0.2", "--mode", "compare", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let s = summary(&out_dir);
    let diffs = s["max_difference"].as_array().unwrap();
    assert!(!diffs.is_empty());
    assert!(diffs.iter().all(|d| d.as_f64().unwrap() < 1e-3));
    let last = s["checkpoints"].as_array().unwrap().last().unwrap()["file"].as_str().unwrap().to_string();
    let (header, _) = read_csv(&out_dir.join(last));
    for col in ["re_g", "re_direct", "abs_diff"] {
        assert!(header.iter().any(|h| h == col), "{header:?}");
    }
}

#[test]
fn determinant_monitor_stays_above_one_for_the_adjoint_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = qnls(&["--nx", "64", "--T", "10", "--mode", "determinant-monitor", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let s = summary(&out_dir);
    let dets = s["determinants"].as_array().unwrap();
    assert_eq!(dets.len(), 6);
    for d in dets {
        assert!(d["min_re"].as_f64().unwrap() >= 1.0 - 1e-8);
        assert!(d["max_abs_im"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn verify_identities_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = qnls(&["--nx", "32", "--T", "1", "--mode", "verify-identities", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let reports = summary(&out_dir)["reports"].as_array().unwrap().clone();
    assert!(reports.len() >= 3);
    for r in &reports {
        assert!(r["name"].is_string());
        assert_eq!(r["levels"].as_array().unwrap().len(), r["errors"].as_array().unwrap().len());
    }
}

#[test]
fn json_only_output_skips_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        &format!("nx = 32\nT = 1.0\nformats = [\"json\"]\nout = {:?}\n", out_dir.to_str().unwrap()),
    );
    assert!(qnls(&["--config", &cfg]).status.success());
    let names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["summary.json"]);
}

#[test]
fn config_round_trips_through_toml() {
    let config = RunConfig {
        mode: Mode::Compare,
        nx: 64,
        nquad: Some(16),
        block_rows: 2,
        block_cols: 2,
        mu3: [0.0, 0.0],
        variant: CompanionVariant::ReverseTimeTranspose,
        quadrature: QuadratureRule::Trapezoid,
        profile: ProfileKind::Gaussian,
        checkpoints: Some(vec![0.0, 0.5, 2.0]),
        formats: vec![OutputFormat::Json],
        dealias: true,
        ..RunConfig::default()
    };
    let text = config.to_toml_string();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), config);
}

#[test]
fn command_line_overrides_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cfg = write_config(dir.path(), "nx = 64\nT = 3.0\n");
    let out = qnls(&["--config", &cfg, "--nx", "32", "--T", "1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let s = summary(&out_dir);
    assert_eq!(s["config"]["nx"].as_u64(), Some(32));
    assert_eq!(s["config"]["T"].as_f64(), Some(1.0));
}

#[test]
fn block_valued_run_writes_entry_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        &format!(
            "nx = 32\nT = 0.5\nblock_rows = 2\nblock_cols = 2\nout = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    );
    let out = qnls(&["--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&out_dir.join("t0.csv"));
    assert!(header.iter().any(|h| h == "re_g_01"), "{header:?}");
    let col = header.iter().position(|h| h == "abs_g_01").unwrap();
    // Identity-block data keeps off-diagonal entries zero.
    assert!(rows.iter().all(|r| r[col] < 1e-14));
}

#[test]
fn singular_operator_exits_with_code_three() {
    // Constant data a with the negated companion: the system is rank one
    // with det = 1 - a² (L/2)², which vanishes at a = 2/L.
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        &format!(
            "nx = 32\nT = 1.0\namplitude = 0.05\nwidth = 1e12\nvariant = \"negated-adjoint\"\nout = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    );
    let out = qnls(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}

#[test]
fn echoed_config_reparses_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        &format!(
            "nx = 32\nT = 0.5\nprofile = \"gaussian\"\nwidth = 2.0\nquadrature = \"trapezoid\"\nout = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    );
    assert!(qnls(&["--config", &cfg]).status.success());
    let echoed: RunConfig = serde_json::from_value(summary(&out_dir)["config"].clone()).unwrap();
    let original = qnls::load_config(Path::new(&cfg)).unwrap();
    assert_eq!(echoed, original);
    let reparsed = RunConfig::from_toml_str(&echoed.to_toml_string()).unwrap();
    assert_eq!(reparsed, original);
}
