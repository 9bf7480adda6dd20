use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

fn streetsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetsim"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn generate(dir: &Path, name: &str) -> String {
    generate_sized(dir, name, "150")
}

fn generate_sized(dir: &Path, name: &str, nodes: &str) -> String {
    let path = s(&dir.join(name));
    let out = streetsim(&["world", "generate", "--seed", "3", "--nodes", nodes, "--out", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_validate_stats() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json");
    let b = generate(dir.path(), "b.json");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let v = streetsim(&["world", "validate", &a]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("ok "));

    let st = streetsim(&["world", "stats", &a]);
    assert!(st.status.success());
    let text = String::from_utf8_lossy(&st.stdout);
    let total = text.lines().find(|l| l.starts_with("total")).unwrap();
    let cols: Vec<&str> = total.split_whitespace().collect();
    assert_eq!(cols.len(), 4);
    // nine region rows plus header and total
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn dangling_reference_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json");
    let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    doc["places"][0]["types"][0] = "not_a_type".into();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_vec(&doc).unwrap()).unwrap();
    let out = streetsim(&["world", "validate", &s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_type"));
}

#[test]
fn missing_world_file_is_io_error() {
    let out = streetsim(&["world", "validate", "/nonexistent/world.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let w = generate(dir.path(), "w.json");
    let o = s(&dir.path().join("out"));

    let no_task = streetsim(&["run", "--world", &w, "--out", &o]);
    assert_eq!(no_task.status.code(), Some(1));

    let no_endpoint = streetsim(&["run", "--world", &w, "--out", &o, "--task", "vln", "--provider", "external"]);
    assert_eq!(no_endpoint.status.code(), Some(1));

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "task = \"vln\"\nsede = 3\n").unwrap();
    let typo = streetsim(&["run", "--config", &s(&cfg), "--world", &w, "--out", &o]);
    assert_eq!(typo.status.code(), Some(1));
}

#[test]
fn unreachable_provider_exits_with_provider_code() {
    let dir = tempfile::tempdir().unwrap();
    let w = generate(dir.path(), "w.json");
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "retries = 0\ntimeout_ms = 500\n").unwrap();
    let out = streetsim(&[
        "run",
        "--config",
        &s(&cfg),
        "--world",
        &w,
        "--out",
        &s(&dir.path().join("out")),
        "--task",
        "vqa-bench",
        "--provider",
        "external",
        "--endpoint",
        &format!("http://127.0.0.1:{port}"),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let w = generate_sized(dir.path(), "w.json", "400");
    let out = dir.path().join("vln");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "world = {w:?}\ntask = \"vln\"\nseed = 4\nworkers = 1\n[suite]\nn_routes = 9\n"
        ),
    )
    .unwrap();
    let r = streetsim(&["run", "--config", &s(&cfg), "--out", &s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let records = fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 9);
    let rep = streetsim(&["report", &s(&out)]);
    assert!(rep.status.success());
    let csv = fs::read_to_string(out.join("vln.csv")).unwrap();
    assert!(csv.starts_with("region,routes,success"));
    assert!(csv.lines().last().unwrap().starts_with("all,9,1.000000"));
}

#[test]
fn workers_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let w = generate(dir.path(), "w.json");
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("w{workers}"));
        let r = streetsim(&[
            "run", "--world", &w, "--task", "detect-bench", "--provider", "noisy", "--seed", "2",
            "--workers", workers, "--out", &s(&out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push((
            fs::read(out.join("records.jsonl")).unwrap(),
            fs::read(out.join("aggregate.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}
