use std::process::{Command, Output};

fn qdo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdo")).args(args).env_remove("QDO_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn solve_reports_regimes() {
    let o = qdo(&["solve"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("TwoThreshold") && text.contains("0.316227766017"), "{text}");

    let o = qdo(&["solve", "--b", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("NeverObserve"));
    assert!(text.lines().any(|l| l.starts_with('A') && l.ends_with(" 0.5")));
    assert!(text.lines().any(|l| l.starts_with('B') && l.ends_with(" 0.5")));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["solve", "--b", "-1"][..],
        &["solve", "--lambda", "0"],
        &["simulate", "--pi0", "2"],
        &["simulate", "--epsilon", "0.2", "--strategy", "epsilon"],
        &["solve", "--bogus", "1"],
        &["solve", "--config", "/nonexistent/file"],
    ] {
        let o = qdo(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn censoring_exits_4() {
    let o = qdo(&["simulate", "--strategy", "never", "--t_max", "0.1", "--n_paths", "10"]);
    assert_eq!(o.status.code(), Some(4));
    let o = qdo(&["simulate", "--strategy", "never", "--t_max", "0.1", "--n_paths", "10", "--allow_censoring", "true"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["result"]["summary"]["cost_stat"]["n_censored"], 10);
}

#[test]
fn json_payload_shape() {
    let o = qdo(&["simulate", "--epsilon", "0.02", "--n_paths", "200", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["n_paths"], 200);
    assert_eq!(v["config"]["quad_tol"], 1e-10);
    assert!(v["config"].get("workers").is_none());
    assert!(v["result"]["summary"]["cost_stat"]["mean"].is_f64());
}

#[test]
fn table_layout() {
    let o = qdo(&["table", "--grid_n", "200", "--epsilon", "0.02"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,g,dg,d2g,piece,L1,L2,g_eps,gamma_eps"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 201);
    let last = rows.last().unwrap();
    assert_eq!((last[0].as_str(), last[1].as_str(), last[4].as_str()), ("1", "0", "Stop"));
    let num = |s: &str| s.parse::<f64>().unwrap();
    for r in &rows {
        let (x, g, l1, l2) = (num(&r[0]), num(&r[1]), num(&r[5]), num(&r[6]));
        assert!(g >= -1e-12 && g <= 1.0 - x + 1e-12, "x={x}");
        match r[4].as_str() {
            "NoObserve" => assert!(l1.abs() < 1e-10 && l2 >= -1e-10),
            "Observe" => assert!(l2.abs() < 1e-8 && l1 >= -1e-10),
            _ => assert!(l1 >= -1e-10 && l2 >= -1e-10),
        }
        assert!(num(&r[7]) >= g - 1e-8);
        for field in r.iter().filter(|f| f.parse::<f64>().is_ok()) {
            let digits = field.trim_start_matches('-').replace('.', "").trim_start_matches('0').len();
            assert!(digits <= 12, "{field}");
        }
    }
    let plain = qdo(&["table", "--grid_n", "4"]);
    assert!(stdout(&plain).starts_with("x,g,dg,d2g,piece,L1,L2\n"));
}

#[test]
fn byte_identical_reruns_and_worker_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epsilon = 0.02\nn_paths = 500\nseed = 12\npi0 = 0.2\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    for cmd in ["solve", "table", "simulate", "validate", "hittime", "filter-demo"] {
        let runs: Vec<Vec<u8>> = ["1", "4", "8"]
            .iter()
            .map(|w| {
                // the output path is part of the echoed config, so reuse it
                let out = dir.path().join(format!("{cmd}.out"));
                let o = qdo(&[cmd, "--config", cfg, "--workers", w, "--output", out.to_str().unwrap()]);
                assert!(o.status.code() == Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
                std::fs::read(&out).unwrap()
            })
            .collect();
        assert!(!runs[0].is_empty());
        assert!(runs.iter().all(|r| r == &runs[0]), "{cmd}");
    }
}

#[test]
fn environment_seed_overrides_everything() {
    let run = |env: Option<&str>, seed: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_qdo"));
        c.args(["simulate", "--epsilon", "0.02", "--n_paths", "100", "--seed", seed]);
        match env {
            Some(s) => c.env("QDO_SEED", s),
            None => c.env_remove("QDO_SEED"),
        };
        serde_json::from_slice::<serde_json::Value>(&c.output().unwrap().stdout).unwrap()
    };
    let a = run(Some("77"), "1");
    let b = run(None, "77");
    assert_eq!(a["config"]["seed"], 77);
    assert_eq!(a, b);
    assert_ne!(run(None, "1")["result"], b["result"]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "b = 0.2\nlambda = 1\n").unwrap();
    let o = qdo(&["solve", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains("NeverObserve"));
    let o = qdo(&["solve", "--config", cfg.to_str().unwrap(), "--b", "0.05"]);
    assert!(stdout(&o).contains("TwoThreshold"));
}

#[test]
fn validate_and_friends() {
    let o = qdo(&["validate", "--epsilon", "0.02", "--pi0", "0.2", "--n_paths", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(json(&o)["result"]["pass"], true);

    let o = qdo(&["simulate", "--b", "0.2", "--pi0", "0.25", "--n_paths", "2000"]);
    let v = json(&o);
    let mean = v["result"]["summary"]["cost_raw"]["mean"].as_f64().unwrap();
    let se = v["result"]["summary"]["cost_raw"]["stderr"].as_f64().unwrap();
    let closed = v["result"]["analytic"]["never_observe_cost"].as_f64().unwrap();
    assert!((closed - (0.25 + 1.5f64.ln())).abs() < 1e-11);
    assert!((mean - closed).abs() <= 3.0 * se + 1e-3);

    let o = qdo(&["filter-demo", "--strategy", "never"]);
    let v = json(&o);
    assert_eq!(v["result"]["unobserved"], true);
    assert!(v["result"]["max_exact_vs_closed_form"].as_f64().unwrap() < 1e-6);

    let o = qdo(&["hittime", "--epsilon", "0.02", "--pi0", "0.3", "--n_paths", "4000"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn filter_demo_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.csv");
    std::fs::write(&file, "t,X,h\n0,0,1\n0.01,0.02,1\n0.02,0.05,1\n").unwrap();
    let o = qdo(&["filter-demo", "--input", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["result"]["source"], "csv");
    assert_eq!(v["result"]["steps_per_path"], 2);
    std::fs::write(&file, "t,X,h\n0,0,1\n0,0.02,1\n").unwrap();
    assert_eq!(qdo(&["filter-demo", "--input", file.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let o = qdo(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("filter-demo"));
}
