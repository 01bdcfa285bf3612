use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn transgap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transgap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn transgap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_triangle(dir: &Path) {
    fs::write(
        dir.join("meta.json"),
        r#"{"n": 3, "d": 2, "num_classes": 3, "name": "k3"}"#,
    )
    .unwrap();
    fs::write(dir.join("edges.tsv"), "0\t1\n0\t2\n1\t2\n").unwrap();
    fs::write(dir.join("features.csv"), "1,0\n0,1\n0.6,0.8\n").unwrap();
    fs::write(dir.join("labels.csv"), "0\n1\n2\n").unwrap();
}

#[test]
fn help_text_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let cases: [(&str, &[&str]); 6] = [
        ("help.txt", &["--help"]),
        ("help_gen.txt", &["gen", "--help"]),
        ("help_analyze.txt", &["analyze", "--help"]),
        ("help_train.txt", &["train", "--help"]),
        ("help_experiment.txt", &["experiment", "--help"]),
        ("help_gradcheck.txt", &["gradcheck", "--help"]),
    ];
    for (file, args) in cases {
        let o = transgap(dir.path(), args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        let want = fs::read_to_string(golden.join(file)).unwrap();
        assert_eq!(stdout(&o), want, "help output for {args:?} changed");
    }
}

#[test]
fn triangle_gcn_constant_is_twice_feature_norm() {
    let dir = tempfile::tempdir().unwrap();
    write_triangle(dir.path());
    let o = transgap(
        dir.path(),
        &[
            "analyze",
            "--data",
            ".",
            "--model",
            "gcn",
            "--cw",
            "1",
            "--radius",
            "0.5",
            "--train-frac",
            "0.34",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = &v["models"][0]["constants"];
    let cx = c["c_x"].as_f64().unwrap();
    assert!((cx - 1.0).abs() < 1e-12);
    assert!((c["l_f"].as_f64().unwrap() - 2.0 * cx).abs() < 1e-12);
    assert!((c["p_f"].as_f64().unwrap() - 10.449728993779084).abs() < 1e-9);
    assert_eq!(v["models"][0]["bound_inputs"]["r"].as_f64(), Some(0.5));
}

#[test]
fn compare_orders_sgc_below_gcn() {
    let dir = tempfile::tempdir().unwrap();
    let o = transgap(
        dir.path(),
        &[
            "analyze",
            "--compare",
            "--blocks",
            "20,20",
            "--d",
            "4",
            "--hidden",
            "8",
            "--T",
            "30",
            "--format",
            "json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["models"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let l = |name: &str| {
        rows.iter().find(|r| r["model"] == name).unwrap()["constants"]["l_f"]
            .as_f64()
            .unwrap()
    };
    assert!(l("sgc") <= l("gcn"));
    let cw: Vec<f64> = rows
        .iter()
        .map(|r| r["constants"]["c_w"].as_f64().unwrap())
        .collect();
    assert!(cw.iter().all(|&c| c == cw[0]), "rows share one c_W");
}

#[test]
fn config_file_values_yield_to_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"blocks": [6, 6], "d": 3, "hidden": 4, "T": 7, "model": "sgc", "out": "from_config.csv"}"#,
    )
    .unwrap();
    let o = transgap(
        dir.path(),
        &[
            "--config", "cfg.json", "train", "--T", "12", "--out", "flag.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("from_config.csv").exists());
    let csv = fs::read_to_string(dir.path().join("flag.csv")).unwrap();
    let last_t: usize = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(last_t, 12);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_flag = transgap(dir.path(), &["train", "--T", "0"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    let unknown = transgap(dir.path(), &["train", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
    let missing = transgap(dir.path(), &["train", "--data", "nope"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("meta.json"));
    let bad_delta = transgap(dir.path(), &["analyze", "--delta", "0", "--radius", "1"]);
    assert_eq!(bad_delta.status.code(), Some(1));
}

#[test]
fn malformed_bundle_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write_triangle(dir.path());
    fs::write(dir.path().join("edges.tsv"), "0\t1\n0\t7\n").unwrap();
    let o = transgap(dir.path(), &["train", "--data", ".", "--T", "5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("edges.tsv") && err.contains('2'), "{err}");
}

#[test]
fn gen_round_trips_through_train() {
    let dir = tempfile::tempdir().unwrap();
    let g = transgap(
        dir.path(),
        &[
            "gen", "--blocks", "15,15", "--d", "5", "--seed", "3", "--out", "b",
        ],
    );
    assert_eq!(g.status.code(), Some(0), "{}", stderr(&g));
    for f in ["meta.json", "edges.tsv", "features.csv", "labels.csv"] {
        assert!(dir.path().join("b").join(f).exists(), "{f}");
    }
    let from_disk = transgap(
        dir.path(),
        &[
            "train", "--data", "b", "--T", "20", "--hidden", "6", "--out", "disk.csv",
        ],
    );
    let generated = transgap(
        dir.path(),
        &[
            "train",
            "--blocks",
            "15,15",
            "--d",
            "5",
            "--data-seed",
            "3",
            "--T",
            "20",
            "--hidden",
            "6",
            "--out",
            "mem.csv",
        ],
    );
    assert_eq!(from_disk.status.code(), Some(0), "{}", stderr(&from_disk));
    assert_eq!(generated.status.code(), Some(0), "{}", stderr(&generated));
    assert_eq!(
        fs::read(dir.path().join("disk.csv")).unwrap(),
        fs::read(dir.path().join("mem.csv")).unwrap()
    );
}

#[test]
fn gradcheck_prints_one_line_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = transgap(dir.path(), &["gradcheck", "--model", "all"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.ends_with("\tok")));
}

#[test]
fn experiment_writes_curves_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = transgap(
        dir.path(),
        &[
            "experiment",
            "--models",
            "gcn,sgc",
            "--seeds",
            "2",
            "--T",
            "20",
            "--blocks",
            "12,12",
            "--d",
            "4",
            "--hidden",
            "4",
            "--out",
            "res",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let res = dir.path().join("res");
    for f in [
        "curve_gcn_0.csv",
        "curve_gcn_1.csv",
        "curve_sgc_0.csv",
        "curve_sgc_1.csv",
        "report.json",
    ] {
        assert!(res.join(f).exists(), "{f}");
    }
    let v: Value =
        serde_json::from_str(&fs::read_to_string(res.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], "transgap/1");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}
