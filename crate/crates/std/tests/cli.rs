//! End-to-end tests of the `distopt` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_distopt"));
    c.env_remove("DISTOPT_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn base(algorithm: Value) -> Value {
    json!({
        "schema_version": 1,
        "problem": {"type": "quadratic", "n": 3, "robots": 5},
        "graph": {"kind": "ring"},
        "algorithm": algorithm,
        "run": {"max_rounds": 200, "seed": 42}
    })
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_cfg(cfg: &Path, out: &Path) -> Output {
    run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn trace_rows(p: impl AsRef<Path>) -> Vec<Vec<String>> {
    read(p)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn run_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &base(json!({"name": "cadmm"})));
    let out = tmp.path().join("out");
    let o = run_cfg(&cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let trace = read(out.join("trace.csv"));
    assert!(trace.starts_with("round,consensus_err,x_gap,f_gap,grad_norm,msgs,wall_ms\n"));
    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["converged"], true);
    let states: Value = serde_json::from_str(&read(out.join("final_states.json"))).unwrap();
    assert_eq!(states.as_array().unwrap().len(), 5);
    assert!(out.join("resolved_config.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &base(json!({"name": "diging", "alpha0": 0.02})),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_cfg(&cfg, &a).status.success());
    assert!(run_cfg(&cfg, &b).status.success());
    for f in [
        "trace.csv",
        "summary.json",
        "final_states.json",
        "resolved_config.json",
    ] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
}

#[test]
fn resolved_config_reproduces_run() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = base(json!({"name": "dsgd", "minibatch": 2}));
    cfg["problem"]["type"] = json!("localization");
    let first = tmp.path().join("first");
    assert!(run_cfg(&write_config(tmp.path(), "c.json", &cfg), &first)
        .status
        .success());
    let second = tmp.path().join("second");
    let o = run_cfg(&first.join("resolved_config.json"), &second);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trace.csv",
        "summary.json",
        "final_states.json",
        "resolved_config.json",
    ] {
        assert_eq!(read(first.join(f)), read(second.join(f)), "{f}");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &base(json!({"name": "dgd", "alpha_typo": 1.0})),
    );
    let o = run_cfg(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("algorithm.alpha_typo"));
}

#[test]
fn bad_schema_and_bad_values_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = base(json!({"name": "dgd"}));
    cfg["schema_version"] = json!(2);
    let o = run_cfg(
        &write_config(tmp.path(), "a.json", &cfg),
        &tmp.path().join("a"),
    );
    assert_eq!(o.status.code(), Some(2));

    let cfg = base(json!({"name": "next", "tau": -1.0}));
    let o = run_cfg(
        &write_config(tmp.path(), "b.json", &cfg),
        &tmp.path().join("b"),
    );
    assert_eq!(o.status.code(), Some(2));

    let mut cfg = base(json!({"name": "cadmm"}));
    cfg["graph"]["dropout"] = json!({"prob": 0.3, "window": 5});
    let o = run_cfg(
        &write_config(tmp.path(), "c.json", &cfg),
        &tmp.path().join("c"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_config_and_unwritable_output() {
    let tmp = TempDir::new().unwrap();
    let o = run_cfg(&tmp.path().join("absent.json"), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), "c.json", &base(json!({"name": "dgd"})));
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run_cfg(&cfg, &blocker);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergence_is_a_numerical_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = base(json!({"name": "dgd", "step_mode": "constant", "alpha0": 1e100}));
    let out = tmp.path().join("out");
    let o = run_cfg(&write_config(tmp.path(), "c.json", &cfg), &out);
    assert_eq!(o.status.code(), Some(3));
    let summary: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    assert_eq!(summary["status"], "numerical_error");
    assert!(!trace_rows(out.join("trace.csv")).is_empty());
}

#[test]
fn compare_merges_traces() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = base(json!(null));
    cfg.as_object_mut().unwrap().remove("algorithm");
    cfg["algorithms"] = json!([
        {"name": "dgd", "label": "dgd-constant", "step_mode": "constant"},
        {"name": "diging", "alpha0": 0.02},
        {"name": "cadmm"},
        {"name": "sova"}
    ]);
    cfg["run"]["max_rounds"] = json!(2000);
    let out = tmp.path().join("out");
    let o = run(&[
        "compare",
        "--config",
        write_config(tmp.path(), "c.json", &cfg).to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let merged = read(out.join("merged.csv"));
    assert!(merged.starts_with("algorithm,round,"));
    for label in ["dgd-constant", "diging", "cadmm", "sova"] {
        assert!(out.join(label).join("trace.csv").exists());
        let rows = trace_rows(out.join(label).join("trace.csv"));
        let merged_rows = merged
            .lines()
            .filter(|l| l.starts_with(&format!("{label},")))
            .count();
        assert_eq!(rows.len(), merged_rows, "{label}");
    }
    let final_gap = |label: &str| {
        let v: Value = serde_json::from_str(&read(out.join(label).join("summary.json"))).unwrap();
        v["final"]["x_gap"].as_f64().unwrap()
    };
    assert!(final_gap("diging") < final_gap("dgd-constant"));
    // SOVA with identity maps is C-ADMM.
    assert_eq!(
        read(out.join("cadmm/trace.csv")),
        read(out.join("sova/trace.csv"))
    );
}

#[test]
fn compare_rejects_empty_and_duplicate_lists() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = base(json!(null));
    cfg.as_object_mut().unwrap().remove("algorithm");
    for (i, list) in [json!([]), json!([{"name": "dgd"}, {"name": "dgd"}])]
        .into_iter()
        .enumerate()
    {
        cfg["algorithms"] = list;
        let path = write_config(tmp.path(), &format!("c{i}.json"), &cfg);
        let o = run(&[
            "compare",
            "--config",
            path.to_str().unwrap(),
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2));
    }
}

fn sweep(cfg: &Path, param: &str, values: &str, out: &Path) -> Output {
    run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        param,
        "--values",
        values,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &base(json!({"name": "nnk"})));
    let out = tmp.path().join("out");
    let o = sweep(&cfg, "algorithm.K", "0,1,2,3", &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = read(out.join("sweep.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algorithm.K,status,rounds,converged,consensus_err,x_gap,f_gap,grad_norm,stationarity,msgs"
    );
    let keys: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(keys, ["0", "1", "2", "3"]);
    for i in 0..4 {
        let resolved: Value = serde_json::from_str(&read(
            out.join(format!("value_{i:03}/resolved_config.json")),
        ))
        .unwrap();
        assert_eq!(resolved["algorithm"]["K"], json!(i));
    }
}

#[test]
fn single_value_sweep_equals_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &base(json!({"name": "next", "alpha0": 0.5})),
    );
    let out = tmp.path().join("sweep");
    assert!(sweep(&cfg, "algorithm.alpha0", "0.5", &out)
        .status
        .success());
    let single = tmp.path().join("run");
    assert!(run_cfg(&cfg, &single).status.success());
    for f in ["trace.csv", "summary.json", "final_states.json"] {
        assert_eq!(
            read(out.join("value_000").join(f)),
            read(single.join(f)),
            "{f}"
        );
    }
}

#[test]
fn sweep_rejects_non_scalar_paths() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &base(json!({"name": "dgd"})));
    for path in ["problem", "algorithm.nope", "graph"] {
        let o = sweep(&cfg, path, "1", &tmp.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{path}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &base(json!({"name": "dgd", "step_mode": "constant"})),
    );
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = bin()
            .env("DISTOPT_THREADS", threads)
            .args([
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--param",
                "algorithm.alpha0",
                "--values",
                "0.1,0.05",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(o.status.success());
        outs.push(read(out.join("sweep.csv")));
    }
    assert_eq!(outs[0], outs[1]);
    let o = bin()
        .env("DISTOPT_THREADS", "zero")
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--param",
            "algorithm.alpha0",
            "--values",
            "0.1",
            "--out",
            tmp.path().join("bad").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn explicit_problem_from_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "problem": {
            "type": "explicit",
            "local": [
                {"hessian": [[1.0]], "linear": [0.0]},
                {"hessian": [[1.0]], "linear": [-2.0], "offset": 2.0}
            ]
        },
        "graph": {"kind": "complete"},
        "algorithm": {"name": "cadmm"},
        "run": {"max_rounds": 1, "x0": [[0.0], [2.0]]}
    });
    let out = tmp.path().join("out");
    let o = run_cfg(&write_config(tmp.path(), "c.json", &cfg), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let states: Value = serde_json::from_str(&read(out.join("final_states.json"))).unwrap();
    let x0 = states[0]["components"][0][1][0].as_f64().unwrap();
    let x1 = states[1]["components"][0][1][0].as_f64().unwrap();
    assert!((x0 - 2.0 / 3.0).abs() < 1e-12 && (x1 - 4.0 / 3.0).abs() < 1e-12);
}
