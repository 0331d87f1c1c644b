mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{fixtures, fuseprf, ok, s};
use tempfile::TempDir;

#[test]
fn index_sparse_reports_documents_and_guards_output() {
    let tmp = TempDir::new().unwrap();
    let corpus = fixtures().join("trace/corpus.jsonl");
    let out = tmp.path().join("bm25");
    let stdout = ok(&["index", "sparse", "--corpus", s(&corpus), "--out", s(&out)]);
    assert!(stdout.starts_with("6 documents"), "{stdout}");
    assert!(out.join("meta.json").exists());

    let again = fuseprf(&["index", "sparse", "--corpus", s(&corpus), "--out", s(&out)]);
    assert_eq!(again.status.code(), Some(2));
    ok(&[
        "index",
        "sparse",
        "--corpus",
        s(&corpus),
        "--out",
        s(&out),
        "--force",
    ]);

    let missing = fuseprf(&[
        "index",
        "sparse",
        "--corpus",
        "/nonexistent/c.jsonl",
        "--out",
        s(&tmp.path().join("x")),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/c.jsonl"));
}

#[test]
fn invalid_configuration_exits_with_usage_status() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("trace");
    let out = tmp.path().join("run.txt");
    let bad = fuseprf(&[
        "run",
        "--data-dir",
        s(&data),
        "--stage",
        "both",
        "--lambda",
        "1.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = fuseprf(&[
        "run",
        "--data-dir",
        s(&data),
        "--stage",
        "both",
        "--prf",
        "off",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn run_matches_committed_trace_runs() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("trace");
    for stage in ["post", "pre", "both"] {
        let out = tmp.path().join(format!("{stage}.txt"));
        ok(&[
            "run",
            "--data-dir",
            s(&data),
            "--stage",
            stage,
            "--prf",
            "on",
            "--out",
            s(&out),
        ]);
        let got = fs::read_to_string(&out).unwrap();
        let want = fs::read_to_string(fixtures().join(format!("runs/trace/{stage}.txt"))).unwrap();
        assert_eq!(got, want, "stage {stage}");
        assert!(tmp.path().join(format!("{stage}.txt.meta.json")).exists());
    }
}

#[test]
fn run_and_eval_are_deterministic_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("synthetic");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let run = tmp.path().join(format!("run-{threads}.txt"));
        let report = tmp.path().join(format!("eval-{threads}.jsonl"));
        ok(&[
            "run",
            "--data-dir",
            s(&data),
            "--stage",
            "both",
            "--prf",
            "on",
            "--threads",
            threads,
            "--out",
            s(&run),
        ]);
        let table = ok(&[
            "eval",
            "--run",
            s(&run),
            "--qrels",
            s(&data.join("qrels.txt")),
            "--report",
            s(&report),
        ]);
        outputs.push((fs::read(&run).unwrap(), fs::read(&report).unwrap(), table));
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn sweep_row(table: &str, value: &str) -> Vec<String> {
    table
        .lines()
        .find(|l| l.split_whitespace().next() == Some(value))
        .unwrap_or_else(|| panic!("no row {value} in\n{table}"))
        .split_whitespace()
        .skip(1)
        .map(String::from)
        .collect()
}

fn eval_means(report: &Path) -> Vec<f64> {
    fs::read_to_string(report)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["query"] == "all")
        .map(|v| v["value"].as_f64().unwrap())
        .collect()
}

#[test]
fn lambda_sweep_rows_equal_direct_runs() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("synthetic");
    let sweep = tmp.path().join("sweep");
    let table = ok(&[
        "sweep",
        "--data-dir",
        s(&data),
        "--param",
        "lambda",
        "--values",
        "0,0.5,1",
        "--stage",
        "fuse",
        "--out-dir",
        s(&sweep),
    ]);
    for v in ["0", "0.5", "1"] {
        assert!(sweep.join(format!("run.lambda-{v}.txt")).exists());
    }
    assert_eq!(
        fs::read_to_string(sweep.join("sweep.jsonl"))
            .unwrap()
            .lines()
            .count(),
        9
    );

    let run = tmp.path().join("direct.txt");
    ok(&[
        "run",
        "--data-dir",
        s(&data),
        "--stage",
        "fuse",
        "--lambda",
        "0",
        "--out",
        s(&run),
    ]);
    assert_eq!(
        fs::read(&run).unwrap(),
        fs::read(sweep.join("run.lambda-0.txt")).unwrap()
    );
    let report = tmp.path().join("direct.eval.jsonl");
    ok(&[
        "eval",
        "--run",
        s(&run),
        "--qrels",
        s(&data.join("qrels.txt")),
        "--report",
        s(&report),
    ]);
    let expected: Vec<String> = eval_means(&report)
        .iter()
        .map(|m| format!("{m:.4}"))
        .collect();
    assert_eq!(sweep_row(&table, "0"), expected);

    let dense_run = tmp.path().join("dense.txt");
    let dense_report = tmp.path().join("dense.eval.jsonl");
    ok(&["run", "--data-dir", s(&data), "--out", s(&dense_run)]);
    ok(&[
        "eval",
        "--run",
        s(&dense_run),
        "--qrels",
        s(&data.join("qrels.txt")),
        "--report",
        s(&dense_report),
    ]);
    assert_eq!(eval_means(&dense_report), eval_means(&report));
}

#[test]
fn single_value_sweep_equals_run_and_eval() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("synthetic");
    let sweep = tmp.path().join("sweep");
    ok(&[
        "sweep",
        "--data-dir",
        s(&data),
        "--param",
        "beta",
        "--values",
        "0.3",
        "--stage",
        "post",
        "--prf",
        "on",
        "--out-dir",
        s(&sweep),
    ]);
    let run = tmp.path().join("direct.txt");
    ok(&[
        "run",
        "--data-dir",
        s(&data),
        "--stage",
        "post",
        "--prf",
        "on",
        "--beta",
        "0.3",
        "--out",
        s(&run),
    ]);
    assert_eq!(
        fs::read(&run).unwrap(),
        fs::read(sweep.join("run.beta-0.3.txt")).unwrap()
    );
    let report = tmp.path().join("direct.eval.jsonl");
    ok(&[
        "eval",
        "--run",
        s(&run),
        "--qrels",
        s(&data.join("qrels.txt")),
        "--report",
        s(&report),
    ]);
    assert_eq!(
        fs::read_to_string(report).unwrap(),
        fs::read_to_string(sweep.join("run.beta-0.3.txt.eval.jsonl")).unwrap()
    );
}

#[test]
fn bad_sweeps_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("synthetic");
    let out = tmp.path().join("sweep");
    for (param, values, extra) in [
        ("lambda", "", "fuse"),
        ("lambda", "0.5,0.2", "fuse"),
        ("lambda", "0,1", "none"),
    ] {
        let o = fuseprf(&[
            "sweep",
            "--data-dir",
            s(&data),
            "--param",
            param,
            "--values",
            values,
            "--stage",
            extra,
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(2), "{param} {values:?} {extra}");
    }
    let o = fuseprf(&[
        "sweep",
        "--data-dir",
        s(&data),
        "--param",
        "alpha",
        "--values",
        "0.2",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override_and_env_data_dir() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("trace");
    let config = tmp.path().join("fuseprf.toml");
    fs::write(
        &config,
        "[pipeline]\nstage = \"both\"\nuse_prf = true\n\n[pipeline.fusion]\nlambda = 0.9\n",
    )
    .unwrap();

    let from_file = tmp.path().join("file.txt");
    let o = Command::new(env!("CARGO_BIN_EXE_fuseprf"))
        .args([
            "--config",
            s(&config),
            "run",
            "--lambda",
            "0.5",
            "--out",
            s(&from_file),
        ])
        .env("FUSEPRF_DATA_DIR", &data)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(&from_file).unwrap(),
        fs::read_to_string(fixtures().join("runs/trace/both.txt")).unwrap()
    );

    let unknown = tmp.path().join("bad.toml");
    fs::write(&unknown, "[pipeline]\nstgae = \"both\"\n").unwrap();
    let o = fuseprf(&[
        "--config",
        s(&unknown),
        "run",
        "--data-dir",
        s(&data),
        "--out",
        s(&tmp.path().join("x.txt")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_fixture_reproduces_committed_collection() {
    let tmp = TempDir::new().unwrap();
    ok(&["gen-fixture", "--out", s(tmp.path())]);
    let committed = fixtures().join("synthetic");
    let mut names: Vec<_> = fs::read_dir(&committed)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        assert_eq!(
            fs::read(tmp.path().join(&name)).unwrap(),
            fs::read(committed.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn persisted_indexes_give_the_same_run_as_raw_files() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("synthetic");
    let bm25 = tmp.path().join("bm25");
    let dense = tmp.path().join("dense");
    ok(&[
        "index",
        "sparse",
        "--corpus",
        s(&data.join("corpus.jsonl")),
        "--out",
        s(&bm25),
    ]);
    let stdout = ok(&[
        "index",
        "dense",
        "--vectors",
        s(&data.join("doc_vectors.txt")),
        "--out",
        s(&dense),
    ]);
    assert!(stdout.contains("dimension 16"), "{stdout}");

    let raw = tmp.path().join("raw.txt");
    let persisted = tmp.path().join("persisted.txt");
    ok(&[
        "run",
        "--data-dir",
        s(&data),
        "--stage",
        "both",
        "--prf",
        "on",
        "--out",
        s(&raw),
    ]);
    ok(&[
        "run",
        "--data-dir",
        s(&data),
        "--stage",
        "both",
        "--prf",
        "on",
        "--bm25-index",
        s(&bm25),
        "--dense-index",
        s(&dense),
        "--out",
        s(&persisted),
    ]);
    assert_eq!(fs::read(raw).unwrap(), fs::read(persisted).unwrap());
}

#[test]
fn eval_compare_reports_t_tests() {
    let tmp = TempDir::new().unwrap();
    let runs = fixtures().join("runs/synthetic");
    let report = tmp.path().join("cmp.jsonl");
    let table = ok(&[
        "eval",
        "--run",
        s(&runs.join("both.txt")),
        "--compare",
        s(&runs.join("dense.txt")),
        "--qrels",
        s(&fixtures().join("synthetic/qrels.txt")),
        "--report",
        s(&report),
    ]);
    assert!(table.contains("map"), "{table}");
    let lines: Vec<serde_json::Value> = fs::read_to_string(report)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let tests: Vec<_> = lines
        .iter()
        .filter(|v| v.get("p_value").is_some())
        .collect();
    assert_eq!(tests.len(), 3);
    let map = tests.iter().find(|v| v["metric"] == "map").unwrap();
    assert!(map["p_value"].as_f64().unwrap() < 0.05);
}
