use std::path::Path;
use std::process::Command;

fn lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run_in(dir: &Path, mode: &str, cfg: &str, seed: &str, out: &str, threads: &str) -> std::process::Output {
    let out = dir.join(out);
    lab(&[
        mode,
        "--config",
        cfg,
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        threads,
    ])
}

#[test]
fn ot_bench_writes_tables_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"ot_bench": {"instances": 20, "dual_sizes": [8, 16]}}"#,
    );
    let o = run_in(dir.path(), "ot-bench", &cfg, "3", "out", "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/ot_bench.csv")).unwrap();
    assert!(csv.starts_with("instance,atoms,dim,exact,brute,abs_diff\n"));
    assert_eq!(csv.lines().count(), 21);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "ot-bench");
    assert!(summary["results"]["max_abs_diff"].as_f64().unwrap() < 1e-9);
    assert!(summary["theory"]["exponents"]["gan"].is_number());
    assert!(summary["metadata"]["created_unix"].is_number());
}

#[test]
fn rates_csv_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"n_grid": [16, 32, 64], "replicates": 4, "rates": {"dim": 2}}"#,
    );
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let o = run_in(dir.path(), "rates", &cfg, "11", out, threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &str, f: &str| std::fs::read(dir.path().join(d).join(f)).unwrap();
    for f in ["rates.csv", "rates.svg"] {
        assert_eq!(read("a", f), read("b", f));
        assert_eq!(read("a", f), read("c", f));
    }
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"replicates": 0}"#);
    let o = run_in(dir.path(), "rates", &bad, "1", "out", "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicates"));

    let missing = dir.path().join("nope.json");
    let o = run_in(dir.path(), "rates", missing.to_str().unwrap(), "1", "out", "1");
    assert_eq!(o.status.code(), Some(2));

    let garbage = write(dir.path(), "g.json", "{not json");
    assert_eq!(
        run_in(dir.path(), "fano", &garbage, "1", "out", "1").status.code(),
        Some(2)
    );

    let ok = write(dir.path(), "ok.json", "{}");
    assert_eq!(run_in(dir.path(), "rates", &ok, "1", "out", "0").status.code(), Some(2));
    assert_eq!(lab(&["rates", "--config", &ok]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_three() {
    // a generator with 2-dimensional output against 1-dimensional data
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{
            "n_grid": [8], "replicates": 1, "n_eval": 1000, "sizing": null,
            "gan": {"arch": {"widths": [1, 3, 2], "sparsity": 4, "sup_bound": 1.0}, "outer_steps": 2}
        }"#,
    );
    let o = run_in(dir.path(), "gan", &cfg, "1", "out", "1");
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
