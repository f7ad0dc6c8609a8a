use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pavlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pavlab")).args(args).env_remove("PAVLAB_THREADS").output().expect("binary runs")
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().expect("stderr has a line")).expect("stderr is JSON")
}

fn write_flip(dir: &Path) -> String {
    let p = dir.join("flip.json");
    std::fs::write(&p, r#"{"dim":2,"entries":[[[0,0],[1,0]],[[1,0],[0,0]]]}"#).unwrap();
    p.display().to_string()
}

#[test]
fn pave_exact_on_the_flip_needs_two_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_flip(dir.path());
    let out = pavlab(&["pave-exact", "--input", &input, "--eps", "0.5"]);
    assert!(out.status.success());
    let recs = lines(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["n"], 2);
    assert_eq!(recs[0]["witness"], serde_json::json!([0, 1]));
}

#[test]
fn free_conj_emits_one_line_per_seed_with_the_formula_bound() {
    let out = pavlab(&["free", "--op", "conj", "--n", "4", "--dim", "64", "--seeds", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = lines(&out);
    assert_eq!(recs.len(), 5);
    let bound = (3f64.sqrt() + 1.0) / 4.0;
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r["seed"], i as u64);
        assert!((r["bound"].as_f64().unwrap() - bound).abs() < 1e-15);
        assert!(r["identity_error"].as_f64().unwrap() <= 1e-12);
    }
}

#[test]
fn free_csv_has_the_summary_header() {
    let out = pavlab(&["free", "--op", "kesten", "--m", "3", "--dim", "32", "--seeds", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "param,n,dim,seed,measured,bound,slack");
    assert_eq!(rows.len(), 3);
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[0], "kesten");
    let bound: f64 = cells[5].parse().unwrap();
    assert_eq!(bound, 2.0 * 2f64.sqrt());
}

#[test]
fn same_config_gives_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let d = dir.path().display().to_string();
        let out = pavlab(&[
            "pave",
            "--dim",
            "12",
            "--eps",
            "0.6",
            "--budget",
            "40",
            "--seeds",
            "3",
            "--out",
            &d,
            "--no-timing",
            "--threads",
            threads,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = std::fs::read(a.path().join("results.jsonl")).unwrap();
    let rb = std::fs::read(b.path().join("results.jsonl")).unwrap();
    assert_eq!(ra, rb);
    assert!(!String::from_utf8(ra).unwrap().contains("elapsed_ms"));
}

#[test]
fn manifest_records_config_versions_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let out = pavlab(&["dixmier", "--dim", "16", "--n", "3", "--seed", "7", "--seeds", "2", "--out", &d]);
    assert!(out.status.success());
    let m: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "dixmier");
    assert_eq!(m["seeds"], serde_json::json!([7, 8]));
    assert_eq!(m["config"]["command"]["n"], 3);
    assert!(m["core_version"].is_string());
    assert_eq!(m["artifacts"][0], "results.jsonl");
}

#[test]
fn curve_writes_csv_with_envelope_fitted_at_largest_eps() {
    let out = pavlab(&["curve", "--dim", "16", "--eps", "0.6,0.5,0.4", "--seeds", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[6], "envelope");
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let (eps, mean, env): (f64, f64, f64) = (r[0].parse().unwrap(), r[5].parse().unwrap(), r[6].parse().unwrap());
        if eps == 0.6 {
            assert!((mean - env).abs() <= 1e-12 * env);
        }
        assert!(r[4].parse::<f64>().unwrap() <= eps);
    }
}

#[test]
fn reduce_dumps_stage_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("dump").display().to_string();
    let out = pavlab(&["reduce", "--ensemble", "sa-zero-diag-haar", "--dim", "32", "--dump", &dump]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = &lines(&out)[0];
    assert!(rec["report"]["ratio"].as_f64().unwrap() <= 0.6);
    assert!(rec["trace"]["stages"].as_array().unwrap().iter().any(|s| s["label"] == "recombine"));
    let files = std::fs::read_dir(dir.path().join("dump/seed-0")).unwrap().count();
    assert!(files > 0);
}

#[test]
fn indep_reports_conditions() {
    let out = pavlab(&["indep", "--dim", "32", "--n", "1", "--budget", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = &lines(&out)[0];
    assert_eq!(rec["conditions"]["all_hold"], true);
    assert_eq!(rec["partition"].as_array().unwrap().len(), 32);
}

#[test]
fn calibrate_runs_a_reduced_target() {
    let out = pavlab(&["calibrate", "--only", "haar_trace", "--seeds", "3", "--max-dim", "64"]);
    assert!(out.status.success());
    let recs = lines(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["name"], "haar_trace");
    assert_eq!(recs[0]["dim"], 64);
    assert_eq!(recs[0]["values"].as_array().unwrap().len(), 3);
}

#[test]
fn precondition_failures_exit_2_with_error_json() {
    for args in [
        &["pave", "--seeds", "0"][..],
        &["pave", "--eps=-0.5"],
        &["free", "--op", "conj", "--n", "3", "--dim", "64"],
        &["pave-exact", "--dim", "20"],
        &["calibrate", "--only", "nope"],
        &["pave", "--input", "/nonexistent/matrix.json"],
        &["no-such-command"],
    ] {
        let out = pavlab(args);
        let err = stderr_json(&out);
        assert!(err["error"].is_string() && err["message"].is_string(), "{args:?}");
        assert_eq!(out.status.code(), Some(2), "{args:?}: {err}");
    }
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"dim":2,"entries":[[[0,0]]]}"#).unwrap();
    let out = pavlab(&["pave", "--input", &p.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
}
