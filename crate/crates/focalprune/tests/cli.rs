use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_focalprune"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generated(dir: &Path, confidences: bool) -> PathBuf {
    let data = dir.join("d.csv");
    let mut args = vec![
        "generate",
        "--models",
        "6",
        "--samples",
        "300",
        "--classes",
        "4",
        "--cliques",
        "0,0,1,2,3,4",
        "--seed",
        "2",
        "--out",
        s(&data),
    ];
    let conf = dir.join("conf");
    if confidences {
        args.extend(["--confidence-dir", s(&conf)]);
    }
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["dataset"]["models"], 6);
    data
}

#[test]
fn simulate_row() {
    let o = run(&[
        "simulate",
        "--team-size",
        "5",
        "--delta",
        "0.3",
        "--trials",
        "100000",
        "--seed",
        "42",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("S,delta,predicted,empirical,stderr"));
    let cells: Vec<f64> = rows
        .next()
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(cells[0], 5.0);
    assert!((cells[2] - 0.44).abs() < 1e-12);
    assert!((cells[3] - 0.44).abs() < 0.01);
    assert!(text.contains("# error_family=gaussian"));
}

#[test]
fn simulate_grid_json() {
    let o = run(&[
        "simulate",
        "--team-size",
        "2,10",
        "--delta",
        "0,1",
        "--trials",
        "5000",
        "--format",
        "json",
    ]);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["empirical"], 1.0);
}

#[test]
fn prune_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), false);
    let sel = dir.path().join("sel.json");
    let timing = dir.path().join("timing.json");
    let o = run(&[
        "prune",
        "--data",
        s(&data),
        "--target-size",
        "3",
        "--beta",
        "0.2",
        "--out",
        s(&sel),
        "--timing",
        s(&timing),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&sel).unwrap()).unwrap();
    assert_eq!(report["selections"].as_array().unwrap().len(), 4);
    assert_eq!(report["consensus"]["quorum"], 3);
    let first = &report["selections"][0];
    assert_eq!(first["levels"][0]["total"], 15);
    let team = &first["selected"][0];
    assert_eq!(team["members"].as_array().unwrap().len(), 3);
    assert_eq!(team["team"].as_str().unwrap().len(), 3);
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&timing).unwrap()).unwrap();
    assert_eq!(t["metrics"][0]["levels"].as_array().unwrap().len(), 2);

    let o = run(&[
        "evaluate",
        "--data",
        s(&data),
        "--selection",
        s(&sel),
        "--oracle",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ev: Value = serde_json::from_slice(&o.stdout).unwrap();
    let sets = ev["sets"].as_array().unwrap();
    assert_eq!(sets.len(), 5);
    assert_eq!(sets[4]["label"], "consensus@3");
    for set in sets {
        assert_eq!(set["scope"], "size=3");
        let q = &set["quality"];
        assert!(q["precision"].as_f64().unwrap() <= 1.0);
        assert_eq!(q["cost_reduction_range"][0], 0.5);
    }
    assert_eq!(ev["oracle"]["teams_evaluated"], 20);

    let scatter = dir.path().join("scatter.csv");
    let o = run(&[
        "evaluate",
        "--data",
        s(&data),
        "--selection",
        s(&sel),
        "--dump-scatter",
        s(&scatter),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&scatter).unwrap();
    assert_eq!(text.lines().next(), Some("metric,team,size,fq,accuracy"));
    assert_eq!(text.lines().count(), 1 + 4 * 56);
}

#[test]
fn baseline_and_soft_voting() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), true);
    let conf = dir.path().join("conf");
    let sel = dir.path().join("base.json");
    let o = run(&[
        "prune-baseline",
        "--data",
        s(&data),
        "--confidences",
        s(&conf),
        "--voting",
        "soft_average",
        "--out",
        s(&sel),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "evaluate",
        "--data",
        s(&data),
        "--confidences",
        s(&conf),
        "--selection",
        s(&sel),
        "--oracle",
        "--voting",
        "soft_average",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ev: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(ev["voting"], "soft_average");
    assert_eq!(ev["sets"][0]["scope"], "all_sizes");

    // soft voting needs confidences
    let o = run(&[
        "prune-baseline",
        "--data",
        s(&data),
        "--voting",
        "soft_average",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--confidences"));
    // the selection's hash must match the evaluated data
    let o = run(&["evaluate", "--data", s(&data), "--selection", s(&sel)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn score_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), false);
    let o = run(&[
        "score",
        "--data",
        s(&data),
        "--metrics",
        "gd,f-gd",
        "--max-size",
        "2",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "metric,team,fq,degenerate_flags");
    assert_eq!(body.len(), 1 + 2 * 15);
    assert!(body[1].starts_with("gd,01,"));
    assert!(body[16].starts_with("f-gd,01,"));
    assert!(text.lines().any(|l| l.starts_with("# dataset_sha256=")));
}

#[test]
fn ingest_writes_canonical_copy() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), false);
    let copy = dir.path().join("copy.csv");
    let o = run(&["ingest", "--data", s(&data), "--canonical", s(&copy)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&copy).unwrap());
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["accuracies"].as_array().unwrap().len(), 6);
    assert_eq!(report["canonical_sha256"], report["dataset"]["sha256"]);
}

#[test]
fn exit_codes_and_hints() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), false);
    let g = dir.path().join("g.csv");
    let cases: [(&[&str], i32, &str); 7] = [
        (&["prune", "--unknown-flag"], 1, "hint:"),
        (&["prune", "--data", "/no/such.csv"], 2, "exists"),
        (
            &["prune", "--data", s(&data), "--metrics", "ck"],
            1,
            "prune-baseline",
        ),
        (
            &["prune", "--data", s(&data), "--target-size", "6"],
            1,
            "target size",
        ),
        (
            &["prune", "--data", s(&data), "--consensus", "9"],
            1,
            "quorum",
        ),
        (
            &["score", "--data", s(&data), "--max-size", "6"],
            1,
            "whole ensemble",
        ),
        (
            &[
                "generate",
                "--models",
                "3",
                "--samples",
                "10",
                "--overlap",
                "2",
                "--out",
                s(&g),
            ],
            1,
            "overlap",
        ),
    ];
    for (args, code, needle) in cases {
        let o = run(args);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "sample_id,truth,a,b\ns,0,1,0\ns,1,1,0\n").unwrap();
    let o = run(&["ingest", "--data", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:3"));
}

#[test]
fn guard_blocks_large_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("wide.csv");
    let o = run(&[
        "generate",
        "--models",
        "26",
        "--samples",
        "20",
        "--out",
        s(&data),
    ]);
    assert!(o.status.success());
    let o = run(&["prune", "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--allow-large"));
}

#[test]
fn threads_flag_and_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), false);
    let a = run(&["--threads", "1", "prune", "--data", s(&data)]);
    let b = bin()
        .env("FOCALPRUNE_THREADS", "3")
        .args(["prune", "--data", s(&data)])
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let o = run(&["--threads", "0", "prune", "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(1));
}
