use std::path::Path;
use std::process::Command;

use mmtrace_cli::eval::{evaluate_suite, required_depth, EvalParams};
use mmtrace_cli::suite::{constant_suite, lipschitz_suite};
use mmtrace_cli::{Geometry, GeometrySpec};

fn mmtrace(out: &Path, args: &[&str]) -> (i32, String) {
    let res = Command::new(env!("CARGO_BIN_EXE_mmtrace"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    (res.status.code().unwrap_or(-1), String::from_utf8_lossy(&res.stderr).into_owned())
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn example_then_eval_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let ex = dir.path().join("ex");
    let (code, err) = mmtrace(&ex, &["example", "--geometry", "segment", "--n", "21", "--side", "12"]);
    assert_eq!(code, 0, "{err}");
    for f in ["space.json", "subset.json", "mu.json", "sequence.json", "geometry.json", "config.json"] {
        assert!(ex.join(f).exists(), "{f} missing");
    }
    let ev = dir.path().join("ev");
    let (code, err) = mmtrace(&ev, &["eval", "--input", ex.to_str().unwrap(), "--functions", "3"]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(ev.join("eval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# mmtrace eval v1"));
    assert!(lines.next().unwrap().starts_with("function,lip,cn,bsn"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn verify_passes_on_clean_input() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = mmtrace(dir.path(), &["verify", "--geometry", "line", "--n", "33"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read_json(&dir.path().join("verify.json"))["passed"], true);
}

#[test]
fn injected_partition_fault_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) =
        mmtrace(dir.path(), &["verify", "--geometry", "line", "--n", "33", "--inject-fault", "partition-weights"]);
    assert_eq!(code, 2);
    let report = read_json(&dir.path().join("verify.json"));
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["partition identity"]);
}

#[test]
fn injected_cube_fault_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) =
        mmtrace(dir.path(), &["verify", "--geometry", "grid2d", "--side", "12", "--inject-fault", "cube-partition"]);
    assert_eq!(code, 2);
    let report = read_json(&dir.path().join("verify.json"));
    let cubes = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "cubes with injected fault").unwrap();
    assert_eq!(cubes["pass"], false);
}

#[test]
fn cantor_verify_reports_decay() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = mmtrace(dir.path(), &["verify", "--geometry", "cantor"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn bad_input_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = mmtrace(dir.path(), &["verify", "--geometry", "line", "--eps", "0.5"]);
    assert_eq!(code, 3);
    let (code, _) = mmtrace(dir.path(), &["eval", "--input", dir.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn extend_and_potentials_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = mmtrace(&dir.path().join("x"), &["extend", "--geometry", "segment", "--n", "21", "--side", "12"]);
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("x/residuals.csv").exists());
    let (code, err) =
        mmtrace(&dir.path().join("p"), &["potentials", "--geometry", "segment", "--n", "21", "--side", "12"]);
    assert_eq!(code, 0, "{err}");
    let report = read_json(&dir.path().join("p/report.json"));
    assert!(report["ratio"].as_f64().unwrap().is_finite());
}

#[test]
fn constants_have_no_oscillation() {
    let g = Geometry::build(&GeometrySpec::Segment { n: 21, side: 12 }).unwrap();
    let params = EvalParams::for_eps(0.1);
    let seq = g.sequence(0.1, required_depth(&g.space, 0.1, params.c)).unwrap();
    let funcs = constant_suite(g.space.len(), 3, 1);
    for (row, _) in evaluate_suite(&g.space, &g.mu, &g.s, &seq, &funcs, &params).unwrap() {
        // only the size term survives
        assert_eq!([row.cn_osc, row.bsn_osc, row.bn_osc, row.n_osc, row.lip], [0.0; 5], "{}", row.function);
        assert!(row.cn > 0.0);
    }
}

#[test]
fn suite_is_seeded() {
    let g = Geometry::build(&GeometrySpec::Line { n: 17 }).unwrap();
    let a = lipschitz_suite(&g.points, 5, 7);
    let b = lipschitz_suite(&g.points, 5, 7);
    let c = lipschitz_suite(&g.points, 5, 8);
    assert_eq!(a.iter().map(|f| &f.values).collect::<Vec<_>>(), b.iter().map(|f| &f.values).collect::<Vec<_>>());
    assert_ne!(a[0].values, c[0].values);
}
