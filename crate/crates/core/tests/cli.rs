mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn automcp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_automcp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AUTOMCP_LOG")
        .output()
        .expect("binary runs")
}

fn spec(rel: &str) -> String {
    common::fixture(rel).display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_trello_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = automcp(&["generate", "--spec", &spec("trello.yaml"), "--out", out.to_str().unwrap(), "--emit-stub"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["tools"].as_array().unwrap().len(), 255);
    let env = std::fs::read_to_string(out.join(".env")).unwrap();
    assert!(env.contains("\nTRELLO_API_KEY=\n") || env.starts_with("TRELLO_API_KEY=\n"), "{env}");
    assert!(env.contains("\nTRELLO_API_TOKEN=\n"), "{env}");
    assert!(env.contains("\nEXTRA_HEADERS=\n"));

    let launch = read_json(&out.join("mcp_config.json"));
    let server = &launch["mcpServers"]["trello"];
    assert!(server["command"].as_str().unwrap().ends_with("automcp"));
    assert_eq!(server["args"][0], "serve");
    assert!(!out.join("oauth_config.json").exists());
    let stub = read_json(&out.join("server_stub.json"));
    assert_eq!(stub["manifest"]["tools"].as_array().unwrap().len(), 255);
}

#[test]
fn generate_writes_oauth_config_and_keeps_existing_env_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    std::fs::write(out.join(".env"), "INVENTORY_HUB_BEARER_TOKEN=keep-me\n").unwrap();
    let o = automcp(&["generate", "--spec", &spec("roundtrip.yaml"), "--out", "."], out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let env = std::fs::read_to_string(out.join(".env")).unwrap();
    assert!(env.starts_with("INVENTORY_HUB_BEARER_TOKEN=keep-me\n"), "{env}");
    assert!(env.contains("INVENTORY_HUB_USERNAME="), "{env}");
    let oauth = read_json(&out.join("oauth_config.json"));
    assert_eq!(oauth["flows"][0]["token_url"], "https://hub.example.com/oauth/token");
    assert_eq!(oauth["flows"][0]["grant"], "authorization_code");
}

#[test]
fn generate_rejects_a_broken_base_url_unless_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let rules = spec("defects/b_adp/rules.json");
    let o = automcp(&["generate", "--spec", &spec("defects/b_adp/spec.yaml"), "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[B]"), "{}", stderr(&o));

    let o = automcp(
        &["generate", "--spec", &spec("defects/b_adp/spec.yaml"), "--out", "out", "--fix", "--rules", &rules],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fixed = std::fs::read_to_string(dir.path().join("out/spec.fixed.yaml")).unwrap();
    assert!(fixed.contains("https://api.adp.com"));
    let launch = read_json(&dir.path().join("out/mcp_config.json"));
    let args = launch["mcpServers"]["adp_workers_api"]["args"].as_array().unwrap();
    assert!(args[2].as_str().unwrap().ends_with("spec.fixed.yaml"));
}

#[test]
fn exit_codes_for_unreadable_and_unparsable_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = automcp(&["lint", "--spec", "missing.yaml"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    std::fs::write(dir.path().join("bad.yaml"), "openapi: [unclosed\n").unwrap();
    let o = automcp(&["lint", "--spec", "bad.yaml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.path().join("old.yaml"), "swagger: '1.2'\npaths: {}\n").unwrap();
    let o = automcp(&["generate", "--spec", "old.yaml", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lint_reports_and_repairs() {
    let dir = tempfile::tempdir().unwrap();
    let o = automcp(&["lint", "--spec", &spec("petstore3.yaml")], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("0 findings"));

    let o = automcp(&["lint", "--spec", &spec("defects/a_apaleo/spec.yaml")], dir.path());
    assert_eq!(o.status.code(), Some(4));

    let o = automcp(&["lint", "--spec", &spec("defects/d_gitlab/spec.yaml"), "--fix", "--out", "."], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let diff = std::fs::read_to_string(dir.path().join("spec.fix.diff")).unwrap();
    assert!(diff.lines().any(|l| l.starts_with('-') && l.contains("type: integer")), "{diff}");
    assert!(diff.lines().any(|l| l.starts_with('+') && l.contains("type: string")), "{diff}");
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["report"]["loc_changed_total"], 2);

    let rules = spec("defects/c_notion/rules.json");
    let o = automcp(&["lint", "--spec", &spec("defects/c_notion/spec.yaml"), "--rules", &rules], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("EXTRA_HEADERS={\"Notion-Version\""), "{}", stderr(&o));
}

#[test]
fn sample_takes_the_stratified_path_above_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = automcp(&["sample", "--spec", &spec("library_swagger2.yaml")], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["total_selected"], 6);
    assert_eq!(report["stratified"], false);

    let o = automcp(&["sample", "--spec", &spec("petstore3.yaml"), "--threshold", "5"], dir.path());
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["stratified"], true);
    assert!(report["total_selected"].as_u64().unwrap() < 19);

    let o = automcp(&["sample", "--spec", &spec("petstore3.yaml"), "--threshold", "5", "--format", "table"], dir.path());
    assert!(String::from_utf8_lossy(&o.stdout).contains("pet"));
}

#[test]
fn serve_answers_on_stdout_and_exits_on_eof() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_automcp"))
        .args(["serve", "--spec", &spec("roundtrip.yaml"), "--env", "absent.env"])
        .current_dir(dir.path())
        .env("AUTOMCP_LOG", "debug")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let script = [
        r#"{"jsonrpc":"2.0","id":1,"method":"initialize","params":{"protocolVersion":"2025-06-18"}}"#,
        r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#,
        r#"{"jsonrpc":"2.0","id":2,"method":"tools/list"}"#,
        r#"{"jsonrpc":"2.0","id":3,"method":"tools/call","params":{"name":"list_reports","arguments":{"from":"2024-01-01"}}}"#,
    ];
    let mut stdin = child.stdin.take().unwrap();
    for line in script {
        writeln!(stdin, "{line}").unwrap();
    }
    drop(stdin);
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let responses: Vec<Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("stdout holds JSON-RPC only"))
        .collect();
    assert_eq!(responses.len(), 3);
    let by_id = |id: i64| responses.iter().find(|r| r["id"] == id).unwrap();
    assert_eq!(by_id(2)["result"]["tools"].as_array().unwrap().len(), 25);
    let call = &by_id(3)["result"];
    assert_eq!(call["isError"], true);
    assert!(call["content"][0]["text"].as_str().unwrap().contains("INVENTORY_HUB_ACCESS_TOKEN"), "{call}");
}
