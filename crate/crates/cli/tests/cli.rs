use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "models", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualrisk")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn classic_ruin_probability() {
    let o = run(&["ruin", "--model", &model("classic.spec"), "--u", "3", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    let psi: f64 = rows[0][header.iter().position(|h| h == "psi").unwrap()].parse().unwrap();
    assert!((psi - (-3.0f64).exp()).abs() < 1e-12);
    assert!(rows[0].iter().any(|c| c.contains("closed")));
}

#[test]
fn table_four_grid() {
    let o = run(&["table", "--id", "4", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["beta", "u", "printed", "closed_form", "quadrature"]);
    assert_eq!(rows.len(), 25);
    let cell = rows.iter().find(|r| r[0].parse::<f64>().unwrap() == 2.0 && r[1].parse::<f64>().unwrap() == 2.0).unwrap();
    assert_eq!(format!("{:.4}", cell[3].parse::<f64>().unwrap()), "0.2222");
    for r in &rows {
        let p: f64 = r[2].parse().unwrap();
        let c: f64 = r[3].parse().unwrap();
        // printed to 4 decimals; 0.03125 was rounded down
        assert!((p - c).abs() <= 5e-5 + 1e-12, "{r:?}");
    }
    let human = run(&["table", "--id", "4"]);
    assert!(stdout(&human).contains("u=1"));
}

#[test]
fn bad_model_exits_three_naming_the_field() {
    let o = run(&["ruin", "--model", &model("bad.spec"), "--u", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["dividend", "--model", &model("classic.spec"), "--u", "2", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--b"));
    let o = run(&["ruin", "--model", &model("classic.spec")]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["ruin", "--model", "/nonexistent.spec", "--u", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn expected_ruin_time_needs_certain_ruin() {
    let o = run(&["ruin-time", "--model", &model("classic.spec"), "--u", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["ruin-time", "--model", &model("certain-ruin.spec"), "--u", "2", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    let e: f64 = rows[0][1].parse().unwrap();
    assert!((e - 4.0).abs() < 1e-6);
}

#[test]
fn csv_and_json_lines_agree() {
    let invocations: [&[&str]; 3] = [
        &["dividend", "--model", &model("classic.spec"), "--u", "1", "--b", "2", "--theta", "1"],
        &["laplace", "--model", &model("affine.spec"), "--u", "1", "--delta", "0.5"],
        &["simulate", "--model", &model("classic.spec"), "--u", "1", "--b", "2", "--paths", "2000", "--horizon", "30"],
    ];
    for args in invocations {
        let c = run(&[args, &["--format", "csv"]].concat());
        let j = run(&[args, &["--format", "json-lines"]].concat());
        assert!(c.status.success() && j.status.success(), "{}", stderr(&c));
        let (header, rows) = csv_rows(&stdout(&c));
        let lines: Vec<serde_json::Value> = stdout(&j).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), lines.len());
        for (row, obj) in rows.iter().zip(&lines) {
            for (h, cell) in header.iter().zip(row) {
                match &obj[h] {
                    serde_json::Value::Number(n) if n.is_f64() => {
                        assert_eq!(cell.parse::<f64>().unwrap().to_bits(), n.as_f64().unwrap().to_bits(), "{h}")
                    }
                    serde_json::Value::Number(n) => assert_eq!(cell, &n.to_string()),
                    serde_json::Value::Null => assert!(cell.is_empty()),
                    serde_json::Value::String(s) => assert_eq!(cell, s),
                    serde_json::Value::Bool(b) => assert_eq!(cell, &b.to_string()),
                    other => panic!("unexpected {other}"),
                }
            }
        }
    }
}

#[test]
fn simulation_is_seeded_and_worker_invariant() {
    let base = ["simulate", "--model", &model("classic.spec"), "--u", "1", "--paths", "5000", "--horizon", "20", "--format", "csv"];
    let a = run(&[&base[..], &["--workers", "1"]].concat());
    let b = run(&[&base[..], &["--workers", "4"]].concat());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let c = run(&[&base[..], &["--seed", "2"]].concat());
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn path_log_is_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("paths.csv");
    let o = run(&[
        "simulate",
        "--model",
        &model("classic.spec"),
        "--u",
        "1",
        "--b",
        "3",
        "--paths",
        "100",
        "--horizon",
        "10",
        "--path-log",
        log.to_str().unwrap(),
        "--log-paths",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&log).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["path_index", "time", "kind", "size_or_overshoot", "wealth_after"]);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| ["0", "1", "2"].contains(&r[0].as_str())));
}

#[test]
fn short_horizon_warns_on_stderr() {
    let o = run(&["simulate", "--model", &model("classic.spec"), "--u", "1", "--paths", "5000", "--horizon", "0.5"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("bias"), "{}", stderr(&o));
}
