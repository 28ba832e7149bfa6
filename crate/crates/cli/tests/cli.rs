use std::path::Path;
use std::process::{Command, Output};

fn retarget(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retarget")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    retarget(&args)
}

#[test]
fn switch_run_reports_the_transition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--scenario", "switch"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("switch right_foot RemovalCompleted at tick 2809: 2309 ticks (2.309 s)"), "{out}");
    assert!(out.contains("0 violations"));
    for f in ["log.jsonl", "summary.json", "contacts.csv", "effectors.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(dir.path().join("contacts.csv")).unwrap();
    assert!(header.starts_with("format_version,tick,time,contact,"));
}

#[test]
fn empty_scenario_holds_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("empty.jsonl");
    std::fs::write(&scenario, "{\"header\":{\"model\":\"biped18\",\"ticks\":50}}\n").unwrap();
    let o = run_into(&dir.path().join("out"), &["--scenario", scenario.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ticks"], 50);
    assert_eq!(summary["saturationHistogram"].as_object().unwrap().len(), 0);
    assert!(summary["maxTrackingResidual"].as_f64().unwrap() < 1e-9);
    assert!(summary["maxEquilibriumResidual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn far_reach_saturates_the_foot_edge() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--scenario", "far_reach"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for foot in ["left_foot", "right_foot"] {
        let x = summary["maxCop"][foot][0].as_f64().unwrap();
        assert!((x - 0.11).abs() < 2e-3, "{foot} CoPx {x}");
    }
    let hist = summary["saturationHistogram"].as_object().unwrap();
    assert!(hist.keys().any(|k| k.starts_with("cop")), "{hist:?}");
}

#[test]
fn verify_catches_a_one_newton_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.jsonl");
    std::fs::write(
        &scenario,
        "{\"header\":{\"model\":\"biped18\",\"ticks\":200}}\n\
         {\"tick\":10,\"command\":{\"seq\":1,\"kind\":\"jogEffector\",\"name\":\"left_hand\",\"linear\":[0.02,0,0],\"angular\":[0,0,0]}}\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&run_into(&out, &["--scenario", scenario.to_str().unwrap()])), 0);
    let log = out.join("log.jsonl");
    let o = retarget(&["--verify", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0);

    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Line 0 is the header, line k+1 is tick k.
    let mut rec: serde_json::Value = serde_json::from_str(&lines[121]).unwrap();
    assert_eq!(rec["tick"], 120);
    let w = &mut rec["contacts"][0]["wrench"][5];
    *w = serde_json::json!(w.as_f64().unwrap() + 1.0);
    lines[121] = rec.to_string();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = retarget(&["--verify", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("violation tick 120 Equilibrium"), "{err}");
    assert!(!err.contains("tick 119") && !err.contains("tick 121"), "{err}");
}

#[test]
fn disturbance_log_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--scenario", "disturbance", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = retarget(&["--verify", dir.path().join("log.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_into(dir.path(), &["--scenario", "no_such_scenario"])), 3);
    assert_eq!(code(&retarget(&[])), 3);
    assert_eq!(code(&retarget(&["--scenario", "switch", "--rate", "-5"])), 3);

    let weights = dir.path().join("w.txt");
    std::fs::write(&weights, "wNoSuchWeight = 1\n").unwrap();
    assert_eq!(code(&run_into(dir.path(), &["--scenario", "switch", "--weights", weights.to_str().unwrap()])), 3);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"header\":{\"model\":\"biped18\"}}\n{\"tick\":\"x\"}\n").unwrap();
    let o = run_into(dir.path(), &["--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "not json\n").unwrap();
    assert_eq!(code(&retarget(&["--verify", garbage.to_str().unwrap()])), 3);
}

#[test]
fn weights_file_and_tracking_flag_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.txt");
    std::fs::write(&weights, "# heavier posture\nwPosture = 2\n").unwrap();
    let o = run_into(
        &dir.path().join("out"),
        &["--scenario", "switch", "--weights", weights.to_str().unwrap(), "--tracking", "spring-damper", "--rate", "500"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(dir.path().join("out/log.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    let header = &line["header"];
    assert_eq!(header["weights"]["wPosture"], 2.0);
    assert_eq!(header["tracking"]["mode"], "spring-damper");
    assert_eq!(header["rate"], 500.0);
}
