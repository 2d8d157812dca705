use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rmwave::output::parse_csv;
use serde_json::Value;

fn rmwave(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmwave"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RMWAVE_OUT")
        .output()
        .unwrap()
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmwave"))
        .args(args)
        .env_remove("RMWAVE_OUT")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().into_string().unwrap()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

fn assert_csv_round_trips(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let table = parse_csv(&text).unwrap_or_else(|| panic!("{} does not parse", path.display()));
    assert_eq!(table.to_csv(), text, "{}", path.display());
}

#[test]
fn equilibria_lists_the_interior_sink() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmwave(&["equilibria", "--alpha", "1", "--beta", "3", "--gamma", "1.6"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(listing(dir.path()), ["equilibria.csv", "summary.json"]);
    let s = json(&dir.path().join("summary.json"));
    let eqs = s["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 3);
    let interior = eqs.iter().find(|e| e["kind"] == "interior").unwrap();
    assert_eq!(interior["U"].as_f64().unwrap(), 0.5);
    assert!((interior["V"].as_f64().unwrap() - 1.65).abs() < 1e-15);
    assert_eq!(interior["classification"], "Sink");
    assert_csv_round_trips(&dir.path().join("equilibria.csv"));
}

#[test]
fn cycle_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmwave(&["cycle", "--alpha", "1", "--beta", "3", "--gamma", "2.4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = dir.path().join("cycle.csv");
    assert!(fs::read_to_string(&csv).unwrap().starts_with("t,U,V\n"));
    assert_csv_round_trips(&csv);
    let s = json(&dir.path().join("summary.json"));
    assert!(s["cycle"]["period"].as_f64().unwrap() > 0.0);
    assert!(s["cycle"]["divergence_integral"].as_f64().unwrap() < 0.0);
    assert_eq!(s["config"]["params"]["gamma"].as_f64(), Some(2.4));
}

#[test]
fn hopf_scan_brackets_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmwave(
        &["hopf-scan", "--beta", "3", "--gamma-min", "1.5", "--gamma-max", "2.5", "--steps", "101"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = dir.path().join("hopf_scan.csv");
    assert_csv_round_trips(&csv);
    let t = parse_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(t.columns, ["gamma", "re_lambda", "im_lambda"]);
    assert_eq!(t.rows.len(), 101);
    let w = t.rows.windows(2).find(|w| (w[0][1] < 0.0) != (w[1][1] < 0.0)).unwrap();
    assert!(w[0][0] <= 2.0 && 2.0 <= w[1][0], "{w:?}");
}

#[test]
fn json_format_writes_tables_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmwave(&["reduced-cycle", "--alpha", "1", "--beta", "3", "--gamma", "2.4", "--c", "10", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(dir.path()), ["reduced_cycle.json", "summary.json"]);
    let t = json(&dir.path().join("reduced_cycle.json"));
    assert_eq!(t["columns"], serde_json::json!(["t", "U", "V"]));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["crosses_line"], true);
    assert!((s["config"]["wave"]["epsilon"].as_f64().unwrap() - 0.01).abs() < 1e-15);
}

#[test]
fn pde_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmwave(&["pde", "--length", "100", "--grid-n", "400", "--t-end", "10", "--probe", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        listing(dir.path()),
        ["manifest.json", "probe_x5.csv", "snap_t0.csv", "snap_t10.csv", "snap_t5.csv"]
    );
    let snap = dir.path().join("snap_t10.csv");
    assert!(fs::read_to_string(&snap).unwrap().starts_with("x,U,V\n"));
    assert_csv_round_trips(&snap);
    assert_csv_round_trips(&dir.path().join("probe_x5.csv"));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["config"]["params"]["alpha"].as_f64(), Some(0.25));
    assert_eq!(m["config"]["pde"]["delta"].as_f64(), Some(0.1));
    assert_eq!(m["config"]["version"], concat!("rmwave ", env!("CARGO_PKG_VERSION")));
    assert_eq!(m["steps"], 500);
}

#[test]
fn front_speed_reports_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmwave(
        &["front-speed", "--delta", "1", "--length", "300", "--grid-n", "1200", "--t-end", "120", "--level", "0.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("manifest.json"));
    let speed = m["speed"].as_f64().unwrap();
    assert!((speed - 1.549).abs() < 0.15, "{speed}");
    assert_csv_round_trips(&dir.path().join("fronts.csv"));
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rmwave"))
        .args(["equilibria", "--alpha", "1", "--beta", "3", "--gamma", "1.6"])
        .env("RMWAVE_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(dir.path()), ["equilibria.csv", "summary.json"]);
}

#[test]
fn usage_errors_exit_two_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["wave-shoot", "--c", "10", "--epsilon", "0.5"][..],
        &["equilibria", "--alpha", "0"],
        &["equilibria", "--beta", "-2"],
        &["equilibria", "--unknown-flag", "1"],
        &["no-such-command"],
        &["pde", "--dt", "0.5"],
    ] {
        let o = rmwave(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
    }
    let o = bare(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8(o.stderr).unwrap().lines().count(), 1);
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        assert_eq!(bare(&[flag]).status.code(), Some(0));
    }
}

#[test]
fn numerical_failures_exit_one_and_leave_nothing() {
    let dir = tempfile::tempdir().unwrap();
    // a stable equilibrium has no cycle
    let o = rmwave(&["cycle", "--alpha", "1", "--beta", "3", "--gamma", "1.6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let d: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(d["status"], "error");
    assert_eq!(d["kind"], "not-found");
    assert!(listing(dir.path()).is_empty());

    // the fast front reaches the far end: snapshots were produced, then the fit failed
    let o = rmwave(
        &["front-speed", "--length", "100", "--grid-n", "400", "--t-end", "40", "--probe", "50"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let d: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(d["kind"], "not-estimable");
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["heteroclinic", "--alpha", "1", "--beta", "3", "--gamma", "2.4", "--t-end", "100"];
    assert_eq!(rmwave(&args, a.path()).status.code(), Some(0));
    assert_eq!(rmwave(&args, b.path()).status.code(), Some(0));
    let names = listing(a.path());
    assert_eq!(names, listing(b.path()));
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n}");
    }
}
