// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn purcool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purcool"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_head(path: &Path) -> (String, String) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    (
        lines.next().unwrap().to_owned(),
        lines.next().unwrap().to_owned(),
    )
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&purcool(&["--help"])), 0);
    assert_eq!(code(&purcool(&["--version"])), 0);
    assert_eq!(code(&purcool(&["dp", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&purcool(&[])), 1);
    assert_eq!(code(&purcool(&["simulate", "--bogus"])), 1);
    assert_eq!(code(&purcool(&["simulate", "--dt", "fast"])), 1);
    assert_eq!(code(&purcool(&["launch"])), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let missing = dir.path().join("nope.json");
    assert_eq!(
        code(&purcool(&[
            "simulate",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            out
        ])),
        1
    );

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"sead": 3}"#).unwrap();
    let o = purcool(&[
        "simulate",
        "--config",
        unknown.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));

    assert_eq!(
        code(&purcool(&[
            "simulate",
            "--lambda0",
            "0.5,0.6,0.2",
            "--out",
            out
        ])),
        1
    );
    assert_eq!(
        code(&purcool(&[
            "simulate",
            "--lambda0",
            "0.5,0.5",
            "--out",
            out
        ])),
        1
    );
    assert_eq!(code(&purcool(&["simulate", "--dt", "-1", "--out", out])), 1);
    assert_eq!(
        code(&purcool(&[
            "simulate", "--gamma1", "1", "--gamma2", "2", "--out", out
        ])),
        1
    );
    assert_eq!(
        code(&purcool(&["simulate", "--policy", "random", "--out", out])),
        1
    );
}

#[test]
fn dp_needs_the_lambda_system() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("general.json");
    std::fs::write(
        &cfg,
        r#"{"system": {"rates": [[0, 1, 0], [0, 0, 0], [0, 1, 0]]}, "initial_spectrum": [0.5, 0.3, 0.2]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let args = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&purcool(&[&["dp"][..], &args].concat())), 1);

    let o = purcool(&[&["simulate", "--horizon", "0.1"][..], &args].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with(",n/a")));
}

#[test]
fn grid_underflow_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = purcool(&[
        "dp",
        "--m",
        "10",
        "--n-t",
        "100",
        "--horizon",
        "120",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = purcool(&[
        "simulate",
        "--horizon",
        "1",
        "--stride",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);

    let (stamp, header) = csv_head(&out.join("trajectory.csv"));
    assert!(stamp.starts_with("# purcool "), "{stamp}");
    assert!(stamp.contains(" config="));
    assert_eq!(header, "t,lambda1,lambda2,lambda3,purity,regime");
    let rows: Vec<String> = std::fs::read_to_string(out.join("trajectory.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .map(str::to_owned)
        .collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("0,0.5,0.3,0.2,0.5,pre"));
    assert!(rows[10].starts_with("1,") && rows[10].ends_with(",equalized"));

    let m = json(&out.join("manifest.json"));
    assert_eq!(m["tool"], "purcool");
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["policy"], "greedy");
    assert_eq!(m["samples"], 10_001);
    assert!(m["analytic"]["deviation"].as_f64().unwrap() < 2e-5);
    assert!(stamp.ends_with(m["config_hash"].as_str().unwrap()));
}

#[test]
fn policy_file_selects_the_policy() {
    let dir = tempfile::tempdir().unwrap();
    let pf = dir.path().join("policy.json");
    std::fs::write(&pf, "null").unwrap();
    let out = dir.path().join("sim");
    let o = purcool(&[
        "simulate",
        "--policy",
        "identity",
        "--policy-file",
        pf.to_str().unwrap(),
        "--horizon",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["policy"], "identity");
    assert!(m.get("analytic").is_none());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 5, "horizon": 2.0, "simulate": {"stride": 50}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = purcool(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--horizon",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["config"]["horizon"], 0.5);
    assert_eq!(m["config"]["simulate"]["stride"], 50);
    assert_eq!(m["final_time"], 0.5);
}

#[test]
fn certify_passes_and_its_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    assert_eq!(
        code(&purcool(&["certify", "--out", good.to_str().unwrap()])),
        0
    );
    let r = json(&good.join("certify_report.json"));
    assert_eq!(r["all_passed"], true);
    assert!(r["contexts"].as_u64().unwrap() >= 200);

    let bad = dir.path().join("bad");
    let o = purcool(&["certify", "--swap-mu", "--out", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let r = json(&bad.join("certify_report.json"));
    let argmax = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "argmax_identity")
        .unwrap();
    assert_eq!(argmax["passed"], false);
}

#[test]
fn dp_writes_tables_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dp");
    let o = purcool(&[
        "dp",
        "--m",
        "12",
        "--n-t",
        "200",
        "--refine",
        "--out",
        out.to_str().unwrap(),
    ]);
    // a grid this coarse misses the default deviation bound
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header) = csv_head(&out.join("value_table.csv"));
    assert_eq!(header, "i,j,k,lambda1,lambda2,lambda3,t,tau,V");
    let (_, header) = csv_head(&out.join("policy_table.csv"));
    assert_eq!(header, "i,j,k,t,tau,action,label,permutation");
    let r = json(&out.join("dp_report.json"));
    assert_eq!(r["comparison"]["m"], 12);
    assert_eq!(r["refinement"]["m"], 24);
    assert_eq!(r["refinement"]["deviation_decreased"], true);
    assert_eq!(r["terminal_exact"], true);

    let policy = std::fs::read_to_string(out.join("policy_table.csv")).unwrap();
    assert!(policy.lines().skip(2).all(|l| l.split(',').count() == 8));
}

#[test]
fn equiv_report_depends_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        code(&purcool(&[
            "equiv",
            "--samples",
            "50",
            "--seed",
            "1",
            "--out",
            a.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&purcool(&[
            "equiv",
            "--samples",
            "50",
            "--seed",
            "2",
            "--out",
            b.to_str().unwrap()
        ])),
        0
    );
    let (ra, rb) = (
        json(&a.join("equiv_report.json")),
        json(&b.join("equiv_report.json")),
    );
    assert_eq!(ra["all_passed"], true);
    assert_ne!(
        ra["perturbation"]["min_ratio"],
        rb["perturbation"]["min_ratio"]
    );
    assert_ne!(ra["config_hash"], rb["config_hash"]);
}
