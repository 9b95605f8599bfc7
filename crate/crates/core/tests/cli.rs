use serde_json::Value;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn barter(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_barter"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: &[u8]) -> Vec<u8> {
    let out = barter(args, stdin);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn fraction(v: &Value) -> f64 {
    let s = v.as_str().unwrap();
    match s.split_once('/') {
        Some((p, q)) => p.parse::<f64>().unwrap() / q.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(format!("{name}-{}", std::process::id()))
}

#[test]
fn worst_case_solve_keeps_both_agents_below_twenty() {
    let inst = ok(&["gen", "worstcase"], b"");
    let doc = json(&ok(&["solve", "-", "--seed", "1"], &inst));
    for agent in ["1", "2"] {
        let d = fraction(&doc["report"]["per_agent"][agent]["D"]);
        assert!(d.abs() < 20.0, "agent {agent}: D = {d}");
    }
    assert_eq!(doc["seed"], 1);
    assert_eq!(doc["lp_objective"], "3");
}

#[test]
fn gap_instance_has_no_nonempty_balance() {
    let inst = ok(&["gen", "gap", "--n", "4"], b"");
    let doc = json(&ok(&["oracle", "-"], &inst));
    assert_eq!(doc["has_nonempty_balanced"], false);
}

#[test]
fn partition_instance_balances() {
    let inst = ok(&["gen", "partition", "--set", "2,4,6"], b"");
    let doc = json(&ok(&["oracle", "-"], &inst));
    assert_eq!(doc["has_nonempty_balanced"], true);
}

#[test]
fn solve_is_byte_identical_for_identical_inputs() {
    let inst = ok(
        &[
            "gen",
            "random",
            "--agents",
            "5",
            "--items",
            "4",
            "--max-cap",
            "3",
            "--seed",
            "9",
        ],
        b"",
    );
    let path = scratch("random.json");
    std::fs::write(&path, &inst).unwrap();
    let p = path.to_str().unwrap();
    let a = ok(&["solve", p, "--seed", "42"], b"");
    let b = ok(&["solve", p, "--seed", "42"], b"");
    let c = ok(&["solve", "-", "--seed", "42"], &inst);
    assert_eq!(a, b);
    assert_eq!(a, c);
    std::fs::remove_file(path).unwrap();
}

#[test]
fn trace_file_holds_one_json_object_per_line() {
    let inst = ok(&["gen", "worstcase"], b"");
    let path = scratch("trace.jsonl");
    ok(
        &[
            "solve",
            "-",
            "--seed",
            "5",
            "--trace",
            path.to_str().unwrap(),
        ],
        &inst,
    );
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(!lines.is_empty());
    for line in lines {
        assert!(json(line.as_bytes()).is_object(), "{line}");
    }
    std::fs::remove_file(path).unwrap();
}

#[test]
fn parse_errors_exit_one_and_name_the_field() {
    let bad = br#"{"items": [{"id": "a", "value": "x/y"}], "agents": []}"#;
    let out = barter(&["solve", "-"], bad);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("value"), "{err}");

    assert_eq!(
        barter(&["gen", "partition", "--set", "1,2,4"], b"")
            .status
            .code(),
        Some(1)
    );
    assert_eq!(barter(&["solve"], b"").status.code(), Some(1));
}

#[test]
fn infeasible_fairness_exits_two() {
    let mut inst = json(&ok(&["gen", "worstcase"], b""));
    inst["fairness"] = serde_json::json!([{"group": ["1"], "floor": "1000"}]);
    let text = serde_json::to_vec(&inst).unwrap();
    assert_eq!(barter(&["solve", "-"], &text).status.code(), Some(2));
    ok(&["solve", "-", "--fairness", "off"], &text);
}

#[test]
fn oversized_oracle_exits_three() {
    let inst = ok(&["gen", "worstcase"], b"");
    assert_eq!(
        barter(&["oracle", "-", "--edge-limit", "1"], &inst)
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn verify_passes_dr_and_fails_baseline() {
    let inst = ok(&["gen", "worstcase"], b"");
    let report = json(&ok(&["verify", "-", "--trials", "2000", "--json"], &inst));
    assert_eq!(report["overall"], "PASS");
    let out = barter(
        &["verify", "-", "--trials", "2000", "--algorithm", "gkps"],
        &inst,
    );
    assert_eq!(out.status.code(), Some(4));
}
