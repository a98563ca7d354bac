use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn nkmeans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nkmeans")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn two_point_config(dir: &Path) -> PathBuf {
    fs::write(dir.join("data.json"), r#"{"dim":1,"agents":[[[0.0]],[[2.0]]]}"#).unwrap();
    write_config(
        dir,
        "cfg.json",
        &json!({
            "dataset": {"file": {"path": "data.json"}},
            "topology": {"generated": {"kind": "path", "num_agents": 2}},
            "k": 1,
            "rho": [1.0],
            "alpha": {"fixed": 1.0 / 6.0},
            "init": {"shared": {"heads": [[0.0]]}},
            "output_dir": "out"
        }),
    )
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn run_writes_outputs_and_reaches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_point_config(tmp.path());
    let o = nkmeans(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let dir = tmp.path().join("out/rho_1");
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("round,cost_J,cost_Q,descent_slack,innovation_norm,consensus_dev,partition_changed\n"));
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("round,agent,cluster,coord_index,value\n0,0,0,0,0.0000000000000000e0\n"));

    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["passes"], true);
    let state = read_json(&dir.join("final_state.json"));
    let x1 = state["heads"][0][0][0].as_f64().unwrap();
    let x2 = state["heads"][1][0][0].as_f64().unwrap();
    assert!((x1 - 2.0 / 3.0).abs() < 1e-9 && (x2 - 4.0 / 3.0).abs() < 1e-9);

    let v = nkmeans(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--state",
        dir.join("final_state.json").to_str().unwrap(),
        "--tol",
        "1e-9",
    ]);
    assert_eq!(code(&v), 0);
    assert_eq!(read_json(&dir.join("verify_report.json"))["report"]["passes"], true);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ring_example.json");
    let mut cfg: Value = read_json(&root);
    cfg["rho"] = json!([100.0]);
    cfg["output_dir"] = json!("a");
    let a = write_config(tmp.path(), "a.json", &cfg);
    cfg["output_dir"] = json!("b");
    let b = write_config(tmp.path(), "b.json", &cfg);
    for c in [&a, &b] {
        assert_eq!(code(&nkmeans(&["generate", "--config", c.to_str().unwrap()])), 0);
        assert_eq!(code(&nkmeans(&["run", "--config", c.to_str().unwrap()])), 0);
    }
    for f in [
        "dataset.json",
        "dataset.provenance.json",
        "rho_100/trace.csv",
        "rho_100/trajectory.csv",
        "rho_100/run_summary.json",
        "rho_100/final_state.json",
    ] {
        let fa = fs::read(tmp.path().join("a").join(f)).unwrap();
        let fb = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(fa == fb, "{f} differs");
    }
    let d = read_json(&tmp.path().join("a/dataset.json"));
    assert_eq!(d["agents"].as_array().unwrap().len(), 10);
    let summary = read_json(&tmp.path().join("a/rho_100/run_summary.json"));
    assert!(summary["partition_convergence_round"].is_u64());
}

#[test]
fn seed_flag_changes_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ring_example.json");
    let mut cfg: Value = read_json(&root);
    cfg["output_dir"] = json!("out");
    let c = write_config(tmp.path(), "c.json", &cfg);
    let c = c.to_str().unwrap();
    let out1 = tmp.path().join("s1");
    let out2 = tmp.path().join("s2");
    nkmeans(&["generate", "--config", c, "--seed", "1", "--out", out1.to_str().unwrap()]);
    nkmeans(&["generate", "--config", c, "--seed", "2", "--out", out2.to_str().unwrap()]);
    let p1 = read_json(&out1.join("dataset.provenance.json"));
    assert_eq!(p1["seed"], 1);
    assert!(p1["prng"].as_str().unwrap().starts_with("ChaCha20"));
    assert_ne!(
        fs::read(out1.join("dataset.json")).unwrap(),
        fs::read(out2.join("dataset.json")).unwrap()
    );
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_point_config(tmp.path());
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&nkmeans(&["run", "--config", c, "--rho", "-1"])), 2);
    assert_eq!(code(&nkmeans(&["run", "--config", c, "--rho", "0"])), 2);

    let mut v = read_json(&cfg);
    v["dataset"] = json!({"file": {"path": "missing.json"}});
    let bad = write_config(tmp.path(), "bad.json", &v);
    assert_eq!(code(&nkmeans(&["run", "--config", bad.to_str().unwrap()])), 2);

    v = read_json(&cfg);
    v["rho"] = json!([]);
    let bad = write_config(tmp.path(), "empty.json", &v);
    assert_eq!(code(&nkmeans(&["run", "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn max_rounds_writes_partial_trace_and_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_point_config(tmp.path());
    let mut v = read_json(&cfg);
    v["max_rounds"] = json!(5);
    let c = write_config(tmp.path(), "short.json", &v);
    let o = nkmeans(&["run", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let trace = fs::read_to_string(tmp.path().join("out/rho_1/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
    let summary = read_json(&tmp.path().join("out/rho_1/run_summary.json"));
    assert_eq!(summary["converged"], false);
    assert_eq!(summary["status"], "guard_exceeded");
}

#[test]
fn sweep_keeps_request_order_and_records_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_point_config(tmp.path());
    let mut v = read_json(&cfg);
    // alpha_max = 1/(1/rho + 2), so 0.4 is admissible for every rho here but 1.
    v["alpha"] = json!({"fixed": 0.4});
    v["rho"] = json!([1000.0, 1.0, 100.0, 10.0]);
    let c = write_config(tmp.path(), "sweep.json", &v);
    let o = nkmeans(&["sweep", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let text = fs::read_to_string(tmp.path().join("out/sweep_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let rhos: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(rhos, vec![1000.0, 1.0, 100.0, 10.0]);
    assert_eq!(rows[1][1], "error");
    assert!(text.lines().nth(2).unwrap().contains("alpha must lie in"));
    for i in [0, 2, 3] {
        assert_eq!(rows[i][1], "ok");
    }
    let bound = |i: usize| rows[i][9].parse::<f64>().unwrap();
    assert!((bound(0) * 1000.0 - bound(2) * 100.0).abs() < 1e-9 * bound(2) * 100.0);
    assert!((bound(3) * 10.0 - bound(2) * 100.0).abs() < 1e-9 * bound(2) * 100.0);
}

#[test]
fn oracle_reports_gap_and_guards_size() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_point_config(tmp.path());
    let o = nkmeans(&["oracle", "--config", cfg.to_str().unwrap(), "--rho", "10"]);
    assert_eq!(code(&o), 0);
    let r = read_json(&tmp.path().join("out/oracle.json"));
    assert_eq!(r["f_star"], 2.0);
    assert_eq!(r["per_rho"][0]["gap"]["holds"], true);

    let pts: Vec<Vec<f64>> = (0..15).map(|i| vec![f64::from(i)]).collect();
    fs::write(
        tmp.path().join("big.json"),
        json!({"dim": 1, "agents": [pts.clone(), pts]}).to_string(),
    )
    .unwrap();
    let mut v = read_json(&cfg);
    v["dataset"] = json!({"file": {"path": "big.json"}});
    v["k"] = json!(3);
    v["init"] = json!({"random_data_points": {"seed": 1}});
    let c = write_config(tmp.path(), "big_cfg.json", &v);
    let o = nkmeans(&["oracle", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("205891132094649"));
}

#[test]
fn lloyd_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("d.json"), r#"{"dim":1,"agents":[[[0.0],[1.0],[10.0],[11.0]]]}"#).unwrap();
    let cfg = write_config(
        tmp.path(),
        "l.json",
        &json!({
            "dataset": {"file": {"path": "d.json"}},
            "topology": {"generated": {"kind": "path", "num_agents": 2}},
            "k": 2,
            "rho": [1.0],
            "init": {"shared": {"heads": [[0.0], [10.0]]}},
            "output_dir": "out"
        }),
    );
    assert_eq!(code(&nkmeans(&["lloyd", "--config", cfg.to_str().unwrap()])), 0);
    let r = read_json(&tmp.path().join("out/lloyd.json"));
    assert_eq!(r["sorted_heads"], json!([[0.5], [10.5]]));
    assert_eq!(r["cost"], 1.0);
    assert_eq!(r["is_lloyd_minimum"], true);
}
