use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

const F1: &str = r#"{"version":1,"nPeople":2,"nFacilities":1,"budget":4.0,
"infectionProb":[0.5,0.25],"isolationCost":[4.0,4.0],"closureCost":[10.0],
"edges":[[0,0,0.5],[1,0,1.0]]}"#;

fn lockdown(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lockdown")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = lockdown(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_deterministic_and_solvable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let hist = dir.path().join("hist.csv");
    let flags = [
        "--seed",
        "3",
        "--facilities",
        "40",
        "--min-size",
        "4",
        "--max-size",
        "60",
        "--size-alpha",
        "1.1",
        "--avg-activities",
        "4",
        "--infect-alpha",
        "2",
        "--cost-mu",
        "1.1",
        "--cost-sigma",
        "0.5",
        "--isolation-frac",
        "0.01",
        "--budget-frac",
        "0.05",
    ];
    let mut args = vec!["gen"];
    args.extend(flags);
    ok(&[&args[..], &["--out", path(&a), "--summary", path(&hist)]].concat());
    ok(&[&args[..], &["--out", path(&b)]].concat());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let csv = std::fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("histogram,lower,upper,count\n"));
    assert!(!csv.contains('\r'));

    let curve = dir.path().join("curve.csv");
    let out = ok(&["solve", "--in", path(&a), "--curve", path(&curve)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ratio = v["riskReport"]["ratio"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ratio));
    let rows: Vec<String> = std::fs::read_to_string(&curve).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 102);
    assert_eq!(rows[0], "split,spentIsolation,spentClosure,totalRisk,ratio");
}

#[test]
fn solve_and_oracle_on_f1() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("f1.json");
    std::fs::write(&inst, F1).unwrap();

    let out = ok(&["solve", "--in", path(&inst)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["solution"]["isolatedPeople"], serde_json::json!([0]));
    assert_eq!(v["riskReport"]["totalRisk"], serde_json::json!(0.25));

    let out = ok(&["solve", "--in", path(&inst), "--budget", "0", "--split", "50"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["riskReport"]["ratio"], serde_json::json!(1.0));
    assert_eq!(v["splitPercent"], serde_json::json!(50.0));

    let report = dir.path().join("oracle.json");
    ok(&["oracle", "--in", path(&inst), "--out", path(&report)]);
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["solution"]["isolatedPeople"], serde_json::json!([1]));
    assert_eq!(v["riskReport"]["totalRisk"], serde_json::json!(0.125));
}

#[test]
fn export_ilp_writes_lp() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("f1.json");
    let lp = dir.path().join("model.lp");
    std::fs::write(&inst, F1).unwrap();
    ok(&["export-ilp", "--in", path(&inst), "--out", path(&lp)]);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("\nMinimize\n"));
    assert!(text.contains(" budget: - 4.0 a_0 - 4.0 a_1 - 10.0 b_0 <= -14.0"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn run_plan_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"base": {"seed": 5, "nFacilities": 30, "maxFacilitySize": 50, "budgetFraction": 0.05},
            "parameter": "costSigma", "values": [0.3, 0.5], "seeds": 2}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    ok(&["run-plan", "--plan", path(&plan), "--out", path(&out_dir)]);
    let cells = std::fs::read_to_string(out_dir.join("cells.csv")).unwrap();
    let lines: Vec<&str> = cells.lines().collect();
    assert_eq!(lines[0], "parameter,value,meanRatio,stdRatio,bestSplit,replicates");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("costSigma,0.3,"));
    let reps = std::fs::read_to_string(out_dir.join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 5);
    let json: Value = serde_json::from_slice(&std::fs::read(out_dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bad.json");
    std::fs::write(&inst, F1.replace("[1,0,1.0]", "[1,0,1.3]")).unwrap();
    let out = lockdown(&["solve", "--in", path(&inst)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 violation"), "{err}");

    let out = lockdown(&["solve", "--in", path(&dir.path().join("missing.json"))]);
    assert!(!out.status.success());

    let out = lockdown(&["gen", "--facilities", "1", "--max-size", "4", "--out", path(&dir.path().join("x.json"))]);
    assert!(!out.status.success());
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn http(port: u16, request: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.write_all(request.as_bytes()).ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[test]
fn serve_answers_health_and_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("f1.json");
    std::fs::write(&inst, F1).unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let _server = Server(
        Command::new(env!("CARGO_BIN_EXE_lockdown"))
            .args(["serve", "--in", path(&inst), "--port", &port.to_string()])
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(20);
    let health = loop {
        if let Some(r) = http(port, "GET /healthz HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(health.starts_with("HTTP/1.1 200"));
    assert!(health.ends_with("ok"));

    let body = r#"{"budget":10,"forcedClosures":[0]}"#;
    let resp = http(
        port,
        &format!(
            "POST /scenario HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    )
    .unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains(r#""ratio":0.0"#));
}
