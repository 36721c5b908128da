use std::path::Path;
use std::process::{Command, Output};

fn corridor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corridor")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = corridor(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rejected_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "duration_s = -5\n").unwrap();
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "no_such_field = 1\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["evaluate", "--scenario", path(&bad), "--out", out],
        vec!["evaluate", "--scenario", path(&unknown), "--out", out],
        vec!["evaluate", "--set", "demand_level=extreme", "--out", out],
        vec!["evaluate", "--set", "nonsense", "--out", out],
        vec!["evaluate", "--strategies", "ql_coordinated", "--out", out],
        vec!["evaluate", "--agents", out, "--strategies", "ql_coordinated", "--out", out],
        vec!["train-online", "--agent", "coordinated", "--input", out, "--out", out],
        vec!["report", "--input", path(&bad), "--out", out],
        vec!["evaluate", "--replications", "0", "--strategies", "none", "--out", out],
    ];
    for args in cases {
        let o = corridor(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"), "{args:?} printed no diagnostic");
    }
}

#[test]
fn corrupt_table_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    ok(&["train-offline", "--agent", "coordinated", "--episodes", "2", "--out", d]);
    let table = dir.path().join("coordinated.qtab");
    let mut bytes = std::fs::read(&table).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&table, bytes).unwrap();
    let o = corridor(&["evaluate", "--agents", d, "--strategies", "ql_coordinated", "--replications", "1", "--out", d]);
    assert!(!o.status.success());
}

#[test]
fn full_pipeline_with_small_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let agents = dir.path().join("agents");
    let eval = dir.path().join("eval");
    let rep = dir.path().join("report");
    for agent in ["coordinated", "uncoordinated"] {
        ok(&["train-offline", "--agent", agent, "--episodes", "4", "--seed", "5", "--out", path(&agents)]);
        ok(&["train-online", "--agent", agent, "--input", path(&agents), "--iterations", "1", "--seed", "5", "--out", path(&agents)]);
    }
    for f in ["coordinated.qtab", "uncoordinated/vsl.qtab", "uncoordinated/rm.qtab", "uncoordinated/lc.qtab", "offline_log.csv", "online_log.csv"] {
        assert!(agents.join(f).exists(), "missing {f}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(agents.join("offline_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["episodes"], 4);
    let log = std::fs::read_to_string(agents.join("offline_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 5);

    let stdout = ok(&[
        "evaluate", "--agents", path(&agents), "--replications", "1", "--seed-base", "3", "--set", "duration_s=1500",
        "--set", "incident.clear_s=1200", "--out", path(&eval),
    ]);
    assert!(stdout.contains("high_incident"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("evaluation_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed_base"], 3);
    assert!(meta["scenario"].as_str().unwrap().contains("duration_s = 1500"));
    let metrics = std::fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 17);

    ok(&["report", "--input", path(&eval.join("evaluation.json")), "--out", path(&rep)]);
    assert_eq!(std::fs::read_to_string(rep.join("metrics.csv")).unwrap(), metrics);
    let trace = std::fs::read_to_string(rep.join("density_high_incident_ql_coordinated_s4.csv")).unwrap();
    assert!(trace.starts_with("time,density,rho_star"));
}

#[test]
fn calibration_writes_samples_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["calibrate-tsc", "--iterations", "1", "--seed", "4", "--out", path(dir.path())]);
    assert!(stdout.contains("R^2"));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("calibration.json")).unwrap()).unwrap();
    assert_eq!(fit["seed"], 4);
    assert_eq!(fit["samples"], 17 * 15);
    let rows = std::fs::read_to_string(dir.path().join("calibration.csv")).unwrap();
    assert_eq!(rows.lines().count(), 17 * 15 + 1);
}
