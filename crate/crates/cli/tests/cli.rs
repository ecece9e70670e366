use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn clab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clab"))
        .args(args)
        .env_remove("CLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn clab_ok(args: &[&str]) -> Output {
    let out = clab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn make_env(dir: &Path, extra: &[&str]) -> String {
    let out = dir.to_str().unwrap();
    let mut args = vec!["env", "--out", out];
    args.extend_from_slice(extra);
    clab_ok(&args);
    dir.join("env.json").to_str().unwrap().to_string()
}

#[test]
fn constant_env_has_all_unit_edges() {
    let tmp = tempfile::tempdir().unwrap();
    make_env(
        tmp.path(),
        &["--sampler", "constant", "--d", "2", "--side", "16", "--seed", "1"],
    );
    let csv = fs::read_to_string(tmp.path().join("env.edges.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 512);
    assert!(rows.iter().all(|r| r.ends_with(",1.0")));
    let header = read_json(&tmp.path().join("env.json"));
    assert_eq!(header["edge_count"], 512);
    let moments = read_json(&tmp.path().join("moments.json"));
    assert_eq!(moments["mean_pi"], 4.0);
}

#[test]
fn env_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--sampler", "lrp", "--s", "5.5", "--d", "3", "--side", "10", "--seed", "7"];
    make_env(a.path(), &args);
    make_env(b.path(), &args);
    let ea = fs::read(a.path().join("env.edges.csv")).unwrap();
    let eb = fs::read(b.path().join("env.edges.csv")).unwrap();
    assert_eq!(ea, eb);
    let ma = read_json(&a.path().join("manifest.json"));
    let mb = read_json(&b.path().join("manifest.json"));
    assert_eq!(ma["outputs"][1]["sha256"], mb["outputs"][1]["sha256"]);
    // a different seed gives a different environment
    let c = tempfile::tempdir().unwrap();
    let mut other = args;
    other[9] = "8";
    make_env(c.path(), &other);
    assert_ne!(ea, fs::read(c.path().join("env.edges.csv")).unwrap());
}

#[test]
fn manifest_digests_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    make_env(
        tmp.path(),
        &["--sampler", "iid-nn", "--d", "2", "--side", "8", "--seed", "2"],
    );
    let m = read_json(&tmp.path().join("manifest.json"));
    assert_eq!(m["config"]["command"], "env");
    for out in m["outputs"].as_array().unwrap() {
        let path = out["path"].as_str().unwrap();
        let bytes = fs::read(path).unwrap();
        let hex: String = {
            use sha2::{Digest, Sha256};
            Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
        };
        assert_eq!(out["sha256"], hex.as_str(), "{path}");
    }
    assert!(!tmp.path().join(".manifest.json.tmp").exists());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"sampler": "constant", "d": 2, "side": 8, "seed": 1, "value": 2.0}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    clab_ok(&[
        "env",
        "--config",
        cfg.to_str().unwrap(),
        "--side",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    let header = read_json(&out.join("env.json"));
    assert_eq!(header["side"], 12);
    assert_eq!(header["edge_count"], 2 * 144);
    let moments = read_json(&out.join("moments.json"));
    assert_eq!(moments["mean_pi"], 8.0);
}

#[test]
fn verify_bounds_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let env = make_env(
        &tmp.path().join("env"),
        &["--sampler", "lrp", "--s", "3", "--d", "2", "--side", "40", "--seed", "3"],
    );
    let out = tmp.path().join("v");
    let o = clab_ok(&[
        "verify", "--suite", "bounds", "--env", &env, "--seed", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("name,instances"));
    let report = read_json(&out.join("report.json"));
    let checks = report.as_array().unwrap();
    assert_eq!(checks.len(), 2);
    assert!(checks.iter().all(|c| c["pass"] == true));
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn corrector_on_constant_env() {
    let tmp = tempfile::tempdir().unwrap();
    let env = make_env(
        &tmp.path().join("env"),
        &["--sampler", "constant", "--d", "2", "--side", "16", "--seed", "1"],
    );
    let out = tmp.path().join("c");
    clab_ok(&["corrector", "--env", &env, "--seed", "1", "--out", out.to_str().unwrap()]);
    let sigma = read_json(&out.join("sigma.json"));
    let rows = sigma["sigma"].as_array().unwrap();
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.as_array().unwrap().iter().enumerate() {
            let target = if i == j { 0.5 } else { 0.0 };
            assert!((v.as_f64().unwrap() - target).abs() < 1e-9);
        }
    }
    let chi = fs::read_to_string(out.join("chi.csv")).unwrap();
    assert!(chi.starts_with("site_index,chi_1,chi_2\n"));
    assert_eq!(chi.lines().count(), 257);
}

#[test]
fn walk_writes_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let env = make_env(
        &tmp.path().join("env"),
        &["--sampler", "iid-nn", "--d", "2", "--side", "8", "--seed", "1"],
    );
    let out = tmp.path().join("w");
    let run = |fast: bool| {
        let mut args = vec![
            "walk", "--env", &env, "--seed", "4", "--clock", "y", "--horizon", "50",
            "--trajectories", "3", "--out", out.to_str().unwrap(),
        ];
        if fast {
            args.push("--fast-reduce");
        }
        clab_ok(&args);
        read_json(&out.join("walk_stats.json"))
    };
    let stats = run(false);
    assert_eq!(stats["records"].as_array().unwrap().len(), 3);
    let traj = fs::read_to_string(out.join("trajectory_1.csv")).unwrap();
    assert!(traj.starts_with("time,site_index\n0,0\n"));
    let fast = run(true);
    let (a, b) = (stats["mean_jump_rate"].as_f64().unwrap(), fast["mean_jump_rate"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(clab(&["env", "--sampler", "constant", "--d", "2", "--side", "16"]).status.code(), Some(1));
    assert_eq!(clab(&["env", "--sampler", "bogus", "--d", "2", "--side", "16", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(clab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(clab(&["verify", "--suite", "bounds", "--env", "/nonexistent/env.json", "--seed", "1"]).status.code(), Some(1));
    let bad = Command::new(env!("CARGO_BIN_EXE_clab"))
        .args(["env", "--sampler", "constant", "--d", "2", "--side", "16", "--seed", "1"])
        .env("CLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));

    // a failing check: on a nearest-neighbour env the target ratio is 1, while
    // three trajectories of horizon 0.5 give a multiple of 1/1.5
    let tmp = tempfile::tempdir().unwrap();
    let env = make_env(
        &tmp.path().join("env"),
        &["--sampler", "iid-nn", "--d", "2", "--side", "8", "--seed", "1"],
    );
    let out = tmp.path().join("v");
    let o = clab(&[
        "verify", "--suite", "time-change", "--env", &env, "--seed", "1", "--horizon", "0.5",
        "--trajectories", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time-change ratio"));
    assert_eq!(read_json(&out.join("manifest.json"))["passed"], false);
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let env = make_env(
        &tmp.path().join("env"),
        &["--sampler", "iid-nn", "--d", "2", "--side", "8", "--seed", "1"],
    );
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_clab"))
            .args([
                "verify", "--suite", "time-change", "--env", &env, "--seed", "5", "--horizon", "200",
                "--trajectories", "50", "--out", out.to_str().unwrap(),
            ])
            .env("CLAB_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.code().is_some());
        reports.push(fs::read_to_string(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
