mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, snapshot, FIXTURES};

fn aq(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoquery"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .unwrap()
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let out = aq(ws, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ingested(dir: &Path) {
    ok(dir, &["init"]);
    for (file, id) in FIXTURES {
        ok(dir, &["ingest", "--corpus", fixture(file).to_str().unwrap(), "--id", id]);
    }
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&aq(dir.path(), &["--help"])), 0);
    assert_eq!(code(&aq(dir.path(), &["--version"])), 0);
    assert_eq!(code(&aq(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&aq(dir.path(), &["sample"])), 1, "missing --n");
    assert_eq!(code(&aq(dir.path(), &["prune", "--theta", "abc"])), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    assert_eq!(code(&aq(&missing, &["objects"])), 2);

    ok(dir.path(), &["init"]);
    let out = aq(dir.path(), &["ingest", "--corpus", "/no/such/file.txt", "--id", "x"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    // Stages need their inputs.
    assert_eq!(code(&aq(dir.path(), &["generate"])), 2);
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    ingested(dir.path());
    assert_eq!(code(&aq(dir.path(), &["run", "--theta", "1.5"])), 1);
    assert_eq!(code(&aq(dir.path(), &["run", "--topk", "0"])), 1);
    assert_eq!(code(&aq(dir.path(), &["generate", "--techniques", "telepathy"])), 1);
    assert_eq!(code(&aq(dir.path(), &["ingest", "--corpus", "x", "--id", "../evil"])), 1);
}

#[test]
fn full_pipeline_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingested(ws);
    let out = ok(ws, &["run"]);
    assert!(out.contains("coverage"), "{out}");

    let cov: serde_json::Value = serde_json::from_str(&ok(ws, &["metrics", "coverage", "--json"])).unwrap();
    assert!(cov["total_queries"].as_u64().unwrap() > 0);
    let text = ok(ws, &["metrics", "coverage"]);
    assert!(text.lines().count() > 2);

    let envelope: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.join("reports/coverage.json")).unwrap()).unwrap();
    assert_eq!(envelope["version"], 1);
    assert_eq!(envelope["format"], "coverage");
    assert_eq!(envelope["data"], cov);

    let gaps: serde_json::Value = serde_json::from_str(&ok(ws, &["gaps", "--json"])).unwrap();
    assert!(gaps.is_array());

    let pairs = ok(ws, &["pair", "--tau", "0.0"]);
    assert!(pairs.starts_with("# version 1"));
    assert_eq!(pairs.lines().filter(|l| l.starts_with("group:")).count(), 1, "tau 0 joins everything");
    let tsv = fs::read_to_string(ws.join("reports/pairs.tsv")).unwrap();
    assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 3);

    ok(ws, &["sample", "--n", "10", "--seed", "3", "--stratify"]);
    // No labels yet: precision has nothing to estimate.
    assert_eq!(code(&aq(ws, &["metrics", "precision"])), 2);

    let sample: Vec<serde_json::Value> = fs::read_to_string(ws.join("labels/sample.jsonl"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(sample.len(), 10);
    let mut csv = String::from("query_id,category,answer_correct,reviewer,ts\n");
    for (i, item) in sample.iter().enumerate() {
        let cat = ["UsefulInteresting", "UsefulNotInteresting", "Nonsensical"][i % 3];
        let correct = ["true", "false", ""][i % 3];
        csv.push_str(&format!("{},{cat},{correct},ana,{i}\n", item["query_id"].as_str().unwrap()));
    }
    let csv_path = ws.join("labels.csv");
    fs::write(&csv_path, csv).unwrap();
    assert!(ok(ws, &["labels", "import", "--csv", csv_path.to_str().unwrap()]).starts_with("10 labels"));

    let p: serde_json::Value = serde_json::from_str(&ok(ws, &["metrics", "precision", "--json"])).unwrap();
    assert_eq!(p["attempted"], 7);
    assert_eq!(p["correct"], 4);
    let u: serde_json::Value = serde_json::from_str(&ok(ws, &["metrics", "utility", "--json"])).unwrap();
    assert_eq!(u["total"], 10);

    let bad = ws.join("bad.csv");
    fs::write(&bad, "query_id,category,answer_correct,reviewer,ts\nnot-sampled,Nonsensical,,ana,1\n").unwrap();
    assert_eq!(code(&aq(ws, &["labels", "import", "--csv", bad.to_str().unwrap()])), 2);
    fs::write(&bad, format!("query_id,category,answer_correct,reviewer,ts\n{},Meh,,ana,1\n", sample[0]["query_id"].as_str().unwrap())).unwrap();
    assert_eq!(code(&aq(ws, &["labels", "import", "--csv", bad.to_str().unwrap()])), 2);

    let status = ok(ws, &["status"]);
    assert!(status.lines().any(|l| l.starts_with("labels") && l.trim_end().ends_with("10")), "{status}");
}

#[test]
fn stages_rerun_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingested(ws);
    let stages: &[&[&str]] = &[
        &["objects"],
        &["generate", "--techniques", "object,pair,analogy,correlation"],
        &["prune"],
        &["answer"],
        &["metrics", "coverage"],
        &["gaps"],
        &["sample", "--n", "15", "--seed", "9"],
    ];
    for s in stages {
        ok(ws, s);
    }
    let first = snapshot(ws);
    for s in stages {
        ok(ws, s);
    }
    let second = snapshot(ws);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (k, v) in &first {
        assert!(second[k] == *v, "{k} changed");
    }
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingested(ws);
    fs::write(ws.join("autoquery.conf"), "# tuned\ntheta = 0.9\ntopk = 2\n").unwrap();
    ok(ws, &["run"]);
    let strict: serde_json::Value = serde_json::from_str(&ok(ws, &["metrics", "coverage", "--json"])).unwrap();
    assert_eq!(strict["theta"], 0.9);
    let loose: serde_json::Value =
        serde_json::from_str(&ok(ws, &["metrics", "coverage", "--json", "--theta", "0.1"])).unwrap();
    assert_eq!(loose["theta"], 0.1);
    assert!(loose["coverage"].as_f64().unwrap() >= strict["coverage"].as_f64().unwrap());

    fs::write(ws.join("autoquery.conf"), "theta = lots\n").unwrap();
    assert_eq!(code(&aq(ws, &["metrics", "coverage"])), 2);
}
