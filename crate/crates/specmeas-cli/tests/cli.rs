use std::path::Path;
use std::process::{Command, Output};

fn specmeas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmeas")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_diag12(dir: &Path) -> String {
    let p = dir.join("diag12.txt");
    std::fs::write(&p, "# kind=sa f=n alpha=0 c1=0\n1 1 1 0\n2 2 2 0\n").unwrap();
    p.display().to_string()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn measure_of_diag_window_sums_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_diag12(dir.path());
    let o = specmeas(&["measure", "--matrix", &m, "--set", "(0.5,1.5)", "--n", "400"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "u,value_re,value_im,bound"));
    let total: f64 = data_rows(&text).iter().map(|r| r[1]).sum();
    assert!((total - 1.0).abs() < 0.01, "{total}");
}

#[test]
fn malformed_set_exits_two_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_diag12(dir.path());
    let o = specmeas(&["measure", "--matrix", &m, "--set", "(1.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert!(err["error"]["message"].as_str().unwrap().len() > 0);
}

#[test]
fn bad_arguments_are_usage_errors() {
    let o = specmeas(&["resolve", "--op", "free", "--z", "1+2j"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
    let o = specmeas(&["resolve", "--op", "no_such_operator", "--z", "0.5i"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (p, threads) in [(&a, "1"), (&b, "2")] {
        let o = specmeas(&[
            "--threads", threads, "density", "--op", "jacobi", "--params", "a=0.7,b=0.3", "--set", "(-0.5,0.5)",
            "--n", "8", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_runs_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_diag12(dir.path());
    let out = dir.path().join("out.csv");
    let cfg = dir.path().join("run.json");
    let body = serde_json::json!({
        "command": "measure",
        "operator": { "matrix": m },
        "args": { "set": "(0.5,1.5)", "n": 400 },
        "output": out.display().to_string(),
        "seed": 7
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let o = specmeas(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let total: f64 = data_rows(&std::fs::read_to_string(&out).unwrap()).iter().map(|r| r[1]).sum();
    assert!((total - 1.0).abs() < 0.01);

    std::fs::write(&cfg, r#"{"command":"measure","unexpected":true}"#).unwrap();
    let o = specmeas(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn gallery_dump_round_trips_through_resolve() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("free.txt");
    let o = specmeas(&["gallery", "dump", "--name", "free", "--n", "300", "--out", dump.to_str().unwrap()]);
    assert!(o.status.success());
    let z = "0.2+0.5i";
    let from_file = specmeas(&["resolve", "--matrix", dump.to_str().unwrap(), "--z", z, "--n", "200"]);
    let from_gallery = specmeas(&["resolve", "--op", "free", "--z", z, "--n", "200"]);
    let (a, b) = (data_rows(&stdout(&from_file)), data_rows(&stdout(&from_gallery)));
    assert!(!a.is_empty());
    for (x, y) in a.iter().zip(&b) {
        assert!((x[1] - y[1]).abs() < 1e-12 && (x[2] - y[2]).abs() < 1e-12);
    }
}

#[test]
fn funcalc_of_constant_is_scaling() {
    // Stage n carries an O(1/n) smoothing error, shrinking with n.
    let mut prev = f64::INFINITY;
    for n in ["10", "40"] {
        let o = specmeas(&["funcalc", "--op", "free", "--f", "2 + 0*l", "--n", n, "--lipschitz", "1"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rows = data_rows(&stdout(&o));
        let err = (rows[0][1] - 2.0).abs();
        assert!(err < prev && err < 0.1, "{:?}", rows[0]);
        assert!(rows.iter().skip(1).all(|r| r[1].abs() < 0.1));
        prev = err;
    }
}

#[test]
fn every_csv_has_a_header_row() {
    for args in [
        vec!["resolve", "--op", "free", "--z", "0.5i"],
        vec!["atoms", "--op", "charlier", "--params", "a=1", "--lo", "-0.5", "--hi", "2.5"],
        vec!["evolve", "--op", "free", "--t", "0.5", "--snapshots", "2"],
        vec!["gallery", "list"],
    ] {
        let o = specmeas(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert!(header.chars().all(|c| c.is_ascii_alphabetic() || c == ',' || c == '_'), "{header}");
    }
}

#[test]
fn charlier_figure_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmeas(&["reproduce", "--figure", "charl1", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let summary = std::fs::read_to_string(dir.path().join("charl1_summary.txt")).unwrap();
    assert!(summary.starts_with("charl1 PASS"), "{summary}");
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("charl1.csv")).unwrap());
    assert_eq!(rows.len(), 18);
}
