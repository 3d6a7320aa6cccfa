use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ppr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppr"))
        .args(args)
        .env("PPR_THREADS", "1")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ppr(args);
    assert!(
        out.status.success(),
        "ppr {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn gen_graph(dir: &Path, n: usize) -> String {
    let text = ok(&["gen", "--n", &n.to_string(), "--attach", "3", "--seed", "1"]);
    write(dir, "g.txt", &text)
}

fn tsv(text: &str) -> Vec<(u64, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut f = l.split('\t');
            (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
        })
        .collect()
}

#[test]
fn gen_writes_header_and_id_map() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("ids.tsv");
    let text = ok(&["gen", "--n", "50", "--attach", "2", "--seed", "4", "--id-map", map.to_str().unwrap()]);
    assert!(text.starts_with("# n=50 m="));
    assert!(text.lines().next().unwrap().ends_with("mode=u"));
    assert_eq!(std::fs::read_to_string(map).unwrap().lines().count(), 50);
}

#[test]
fn exact_is_dense_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_graph(dir.path(), 60);
    let rows = tsv(&ok(&["exact", "--graph", &g, "--source", "0", "--tol", "1e-10"]));
    assert_eq!(rows.len(), 60);
    let sum: f64 = rows.iter().map(|r| r.1).sum();
    assert!((sum - 1.0).abs() <= 1e-10);
}

#[test]
fn queries_emit_tsv_and_complete_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_graph(dir.path(), 100);
    let diag = dir.path().join("diag.json");
    let d = diag.to_str().unwrap();
    let exact = tsv(&ok(&["exact", "--graph", &g, "--source", "0"]));
    for cmd in ["ssppr-a", "ssppr-d"] {
        let out = ok(&[cmd, "--graph", &g, "--source", "0", "--eps", "0.05", "--seed", "1", "--diag", d]);
        let json = std::fs::read_to_string(&diag).unwrap();
        assert_eq!(json.lines().count(), 1);
        let v: Value = serde_json::from_str(&json).unwrap();
        for key in [
            "phase1_walks",
            "phase1_steps",
            "phase1_push_cost",
            "candidates",
            "n_r_initial",
            "n_r",
            "n_t",
            "iterations",
            "phase2_push_cost",
            "phase3_walks",
            "phase3_steps",
            "accounted_cost",
        ] {
            assert!(v[key].as_u64().is_some(), "{cmd}: {key} missing or negative");
        }
        assert_eq!(v["fallback"], Value::Bool(false));
        let rows = tsv(&out);
        assert_eq!(rows.len() as u64, v["candidates"].as_u64().unwrap());
        if cmd == "ssppr-a" {
            for (node, x) in rows {
                let pi = exact.iter().find(|r| r.0 == node).unwrap().1;
                assert!((x - pi).abs() <= 0.05);
            }
        }
    }
}

#[test]
fn push_commands() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "loop.txt", "5 5\n");
    let out = ok(&["bp", "--graph", &g, "--target", "5", "--rmax", "0.5"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "# t=5 r_max=0.5 cost=4");
    let fields: Vec<f64> = lines.next().unwrap().split('\t').map(|x| x.parse().unwrap()).collect();
    assert_eq!(fields[0], 5.0);
    assert!((fields[1] - 0.5904).abs() < 1e-12 && (fields[2] - 0.4096).abs() < 1e-12);

    let g = write(dir.path(), "pair.txt", "# mode=u\n0 1\n");
    let rows = tsv(&ok(&["fp", "--graph", &g, "--source", "0", "--rmax", "0.01"]));
    assert!((rows[0].1 - 1.0 / 1.8).abs() <= 0.01);
}

#[test]
fn monte_carlo_sources() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_graph(dir.path(), 40);
    for source in ["3", "uniform", "degree"] {
        let rows = tsv(&ok(&["mc", "--graph", &g, "--source", source, "--walks", "2000", "--seed", "2"]));
        let sum: f64 = rows.iter().map(|r| r.1).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    assert_eq!(ppr(&["mc", "--graph", &g, "--source", "max-degree", "--walks", "10"]).status.code(), Some(2));
}

#[test]
fn verify_and_scale_reports() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "pair.txt", "0 1\n1 0\n");
    let report: Value = serde_json::from_str(&ok(&[
        "verify", "--algorithm", "a", "--graph", &g, "--source", "0", "--eps", "0.05", "--runs", "200",
    ]))
    .unwrap();
    assert_eq!(report["runs"], 200);
    assert!(report["failures"].as_u64().unwrap() <= 1);

    let csv = dir.path().join("scale.csv");
    let report: Value = serde_json::from_str(&ok(&[
        "scale", "--algorithm", "a", "--gen-n", "200,400", "--eps", "0.2,0.1", "--seeds", "3", "--csv",
        csv.to_str().unwrap(),
    ]))
    .unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let directed = write(dir.path(), "d.txt", "0 1\n1 2\n2 0\n");
    assert_eq!(ppr(&["ssppr-d", "--graph", &directed, "--source", "0", "--eps", "0.1"]).status.code(), Some(2));
    let out = ppr(&["verify", "--algorithm", "d", "--graph", &directed, "--eps", "0.1", "--runs", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(ppr(&["ssppr-a", "--graph", &directed, "--source", "9", "--eps", "0.1"]).status.code(), Some(2));
    assert_eq!(ppr(&["ssppr-a", "--graph", &directed, "--source", "0", "--eps", "-1"]).status.code(), Some(2));
    assert_eq!(ppr(&["ssppr-a", "--bogus"]).status.code(), Some(2));

    let dangling = write(dir.path(), "dangling.txt", "0 1\n");
    let out = ppr(&["exact", "--graph", &dangling, "--source", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out-degree 0"));
    let malformed = write(dir.path(), "bad.txt", "0 1\nzero one\n");
    assert_eq!(ppr(&["exact", "--graph", &malformed, "--source", "0"]).status.code(), Some(3));

    let big = gen_graph(dir.path(), 120);
    let out = ppr(&["verify", "--algorithm", "a", "--graph", &big, "--eps", "0.1", "--oracle-cap", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle cap"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_graph(dir.path(), 150);
    for cmd in ["ssppr-a", "ssppr-d"] {
        let args = [cmd, "--graph", &g, "--source", "2", "--eps", "0.01", "--seed", "9"];
        let first = ok(&args);
        assert!(!first.is_empty(), "{cmd} answered nothing");
        assert_eq!(first, ok(&args));
    }
}
