//! Drives sampled tools through a real `serve` loop against the mock upstream
//! and scores each call.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, DuplexStream, Lines};

use super::mock::{run_mock_upstream, MockConfig, MockError, MockHandle};
use super::sample::{resource_group, sample, SampleReport, DEFAULT_THRESHOLD};
use crate::compiler::{HttpMethod, ParamLocation, ToolManifest, ToolSpec, BODY_KEY};
use crate::doctor::FailureClass;
use crate::envfile::EnvStore;
use crate::ingest::{BaseUrl, RawDocument};
use crate::pipeline::compile_document;
use crate::runtime::{serve, Runtime, RuntimeConfig};

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub threshold: usize,
    /// Tool names left out of the run.
    pub exclude: BTreeSet<String>,
    /// Tool names run first, in this order.
    pub order: Vec<String>,
    pub timeout: Duration,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            exclude: BTreeSet::new(),
            order: Vec::new(),
            timeout: Duration::from_secs(10),
        }
    }
}

/// One name per line; blank lines and `#` comments are ignored.
pub fn parse_name_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl EvalOptions {
    pub fn with_lists(mut self, exclude: Option<&Path>, order: Option<&Path>) -> std::io::Result<Self> {
        if let Some(p) = exclude {
            self.exclude = parse_name_list(&std::fs::read_to_string(p)?).into_iter().collect();
        }
        if let Some(p) = order {
            self.order = parse_name_list(&std::fs::read_to_string(p)?);
        }
        Ok(self)
    }
}

/// Everything an evaluation of one API needs besides the contract.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// `.env` contents handed to both the runtime and the mock.
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    #[serde(default)]
    pub mock: MockConfig,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default)]
    pub order: Vec<String>,
}

impl Scenario {
    pub fn env_store(&self) -> EnvStore {
        let mut env = EnvStore::new();
        for (k, v) in &self.env {
            env.set(k.clone(), v.clone());
        }
        env
    }

    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            exclude: self.exclude.iter().cloned().collect(),
            order: self.order.clone(),
            ..EvalOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallOutcome {
    pub tool: String,
    pub endpoint: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http_status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiReport {
    pub api: String,
    pub compiled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_class: Option<FailureClass>,
    /// Calls counted in the pass rate.
    pub attempted: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub calls: Vec<CallOutcome>,
}

impl ApiReport {
    fn finish(api: String, calls: Vec<CallOutcome>) -> Self {
        let passed = calls.iter().filter(|c| c.passed).count();
        Self {
            api,
            compiled: true,
            compile_error: None,
            failure_class: None,
            attempted: calls.len(),
            passed,
            pass_rate: ratio(passed, calls.len()),
            calls,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub apis: Vec<ApiReport>,
    pub attempted: usize,
    pub passed: usize,
    pub pass_rate: f64,
}

impl EvalReport {
    pub fn new(apis: Vec<ApiReport>) -> Self {
        let attempted = apis.iter().map(|a| a.attempted).sum();
        let passed = apis.iter().map(|a| a.passed).sum();
        Self {
            apis,
            attempted,
            passed,
            pass_rate: ratio(passed, attempted),
        }
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("{:<32} {:>8} {:>8} {:>8}\n", "api", "passed", "calls", "rate");
        for a in &self.apis {
            out.push_str(&format!(
                "{:<32} {:>8} {:>8} {:>7.1}%\n",
                a.api,
                a.passed,
                a.attempted,
                a.pass_rate * 100.0
            ));
            if let Some(e) = &a.compile_error {
                out.push_str(&format!("  compile failed: {e}\n"));
            }
            for c in a.calls.iter().filter(|c| !c.passed) {
                out.push_str(&format!("  FAIL {} ({}): {}\n", c.tool, c.endpoint, c.diagnostic.as_deref().unwrap_or("")));
            }
        }
        out.push_str(&format!(
            "{:<32} {:>8} {:>8} {:>7.1}%\n",
            "total",
            self.passed,
            self.attempted,
            self.pass_rate * 100.0
        ));
        out
    }
}

/// Report plus every byte the server wrote on its protocol stream.
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub report: ApiReport,
    pub wire: String,
}

struct RpcClient {
    writer: DuplexStream,
    reader: Lines<BufReader<DuplexStream>>,
    next_id: u64,
    wire: String,
    timeout: Duration,
}

impl RpcClient {
    async fn request(&mut self, method: &str, params: Value) -> Result<Value, String> {
        self.next_id += 1;
        let id = self.next_id;
        let msg = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params});
        let mut line = msg.to_string();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).await.map_err(|e| e.to_string())?;
        self.writer.flush().await.map_err(|e| e.to_string())?;
        loop {
            let next = tokio::time::timeout(self.timeout, self.reader.next_line())
                .await
                .map_err(|_| format!("no response to {method} within {:?}", self.timeout))?
                .map_err(|e| e.to_string())?;
            let Some(line) = next else {
                return Err("server closed the stream".into());
            };
            self.wire.push_str(&line);
            self.wire.push('\n');
            let v: Value = serde_json::from_str(&line).map_err(|e| format!("non-JSON output: {e}"))?;
            if v.get("id") == Some(&json!(id)) {
                return Ok(v);
            }
        }
    }
}

fn phase(method: HttpMethod) -> u8 {
    match method {
        HttpMethod::Post => 0,
        HttpMethod::Get | HttpMethod::Head | HttpMethod::Options => 1,
        HttpMethod::Put | HttpMethod::Patch => 2,
        HttpMethod::Delete => 3,
    }
}

/// Creates before reads before updates before deletes within a group; the
/// `order` list, when given, goes first.
pub fn call_order<'m>(manifest: &'m ToolManifest, selected: &[&'m ToolSpec], order: &[String]) -> Vec<&'m ToolSpec> {
    let mut group_rank: HashMap<String, usize> = HashMap::new();
    for t in &manifest.tools {
        let g = resource_group(&t.endpoint.path_template);
        let n = group_rank.len();
        group_rank.entry(g).or_insert(n);
    }
    let doc_index: HashMap<&str, usize> = manifest.tools.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
    let mut out: Vec<&ToolSpec> = order
        .iter()
        .filter_map(|name| selected.iter().find(|t| &t.name == name).copied())
        .collect();
    let mut rest: Vec<&ToolSpec> = selected.iter().filter(|t| !order.contains(&t.name)).copied().collect();
    rest.sort_by_key(|t| {
        (
            group_rank[&resource_group(&t.endpoint.path_template)],
            phase(t.endpoint.method),
            doc_index[t.name.as_str()],
        )
    });
    out.extend(rest);
    out
}

/// Example-free value that satisfies common schema constraints.
pub fn synthesize(schema: &Value, depth: usize) -> Value {
    for key in ["example", "default", "const"] {
        if let Some(v) = schema.get(key) {
            return v.clone();
        }
    }
    if let Some(first) = schema.get("enum").and_then(Value::as_array).and_then(|e| e.first()) {
        return first.clone();
    }
    if let Some(all) = schema.get("allOf").and_then(Value::as_array) {
        let mut merged = Map::new();
        for part in all {
            if let Value::Object(m) = synthesize(part, depth) {
                merged.extend(m);
            }
        }
        return Value::Object(merged);
    }
    for key in ["oneOf", "anyOf"] {
        if let Some(first) = schema.get(key).and_then(Value::as_array).and_then(|a| a.first()) {
            return synthesize(first, depth);
        }
    }
    let ty = match schema.get("type") {
        Some(Value::String(t)) => t.as_str(),
        Some(Value::Array(ts)) => ts.iter().filter_map(Value::as_str).find(|t| *t != "null").unwrap_or("string"),
        _ if schema.get("properties").is_some() => "object",
        _ => "string",
    };
    match ty {
        "integer" => json!(schema.get("minimum").and_then(Value::as_i64).unwrap_or(1).max(1)),
        "number" => schema.get("minimum").cloned().unwrap_or(json!(1.5)),
        "boolean" => json!(true),
        "array" => {
            let item = synthesize(schema.get("items").unwrap_or(&json!({})), depth + 1);
            let n = schema.get("minItems").and_then(Value::as_u64).unwrap_or(1).max(1) as usize;
            Value::Array(vec![item; n])
        }
        "object" => {
            let mut m = Map::new();
            if depth < 4 {
                for (k, s) in schema.get("properties").and_then(Value::as_object).into_iter().flatten() {
                    m.insert(k.clone(), synthesize(s, depth + 1));
                }
            }
            Value::Object(m)
        }
        _ => {
            let s = match schema.get("format").and_then(Value::as_str) {
                Some("date-time") => "2024-01-01T00:00:00Z".to_string(),
                Some("date") => "2024-01-01".to_string(),
                Some("email") => "user@example.com".to_string(),
                Some("uuid") => "00000000-0000-4000-8000-000000000000".to_string(),
                Some("uri" | "url") => "https://example.com".to_string(),
                _ => "sample".to_string(),
            };
            let min = schema.get("minLength").and_then(Value::as_u64).unwrap_or(0) as usize;
            if s.len() < min {
                json!(format!("{s}{}", "x".repeat(min - s.len())))
            } else {
                json!(s)
            }
        }
    }
}

fn coerce_id(id: &Value, schema: &Value) -> Value {
    let text = match id {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    match schema.get("type").and_then(Value::as_str) {
        Some("integer") => text.parse::<i64>().map(Value::from).unwrap_or(Value::String(text)),
        Some("number") => text.parse::<f64>().map(|f| json!(f)).unwrap_or(Value::String(text)),
        _ => Value::String(text),
    }
}

/// Collection template a path parameter identifies an item of (`/pets/{id}` → `/pets`).
fn collection_of(template: &str, param: &str) -> Option<String> {
    let pos = template.find(&format!("{{{param}}}"))?;
    Some(template[..pos].trim_end_matches('/').to_string())
}

/// Arguments for one call; also returns the created id the call is expected to read back.
fn build_args(tool: &ToolSpec, created: &BTreeMap<String, Value>) -> (Value, Option<Value>) {
    let ep = &tool.endpoint;
    let mut args = Map::new();
    let mut expect = None;
    for p in &ep.parameters {
        if p.location == ParamLocation::Path {
            if let Some(id) = collection_of(&ep.path_template, &p.name).and_then(|c| created.get(&c)) {
                args.insert(p.sanitized_name.clone(), coerce_id(id, &p.schema));
                if ep.path_template.trim_end_matches('/').ends_with(&format!("{{{}}}", p.name)) {
                    expect = Some(id.clone());
                }
                continue;
            }
        }
        let example = p.example.clone().or_else(|| p.schema.get("example").cloned());
        if !p.required && p.location != ParamLocation::Path && example.is_none() {
            continue;
        }
        args.insert(p.sanitized_name.clone(), example.unwrap_or_else(|| synthesize(&p.schema, 0)));
    }
    if let Some(body) = &ep.request_body {
        args.insert(BODY_KEY.to_string(), synthesize(&body.schema, 0));
    }
    if expect.is_none() && ep.method == HttpMethod::Get {
        // listing a collection this run created items in
        if let Some(id) = created.get(ep.path_template.trim_end_matches('/')) {
            expect = Some(id.clone());
        }
    }
    (Value::Object(args), expect)
}

fn same_id(item: &Value, id: &Value) -> bool {
    let text = |v: &Value| match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    item.get("id").is_some_and(|got| text(got) == text(id))
}

/// Checks the mock's echo envelope and, where applicable, state visibility.
fn check_envelope(tool: &ToolSpec, text: &str, expect: Option<&Value>) -> Result<Value, String> {
    let v: Value = serde_json::from_str(text).map_err(|_| "upstream response is not a JSON envelope".to_string())?;
    let method = v.pointer("/echo/method").and_then(Value::as_str);
    if method != Some(tool.endpoint.method.as_str()) {
        return Err(format!("echoed method {method:?} does not match {}", tool.endpoint.method));
    }
    if let Some(id) = expect {
        let data = v.get("data").unwrap_or(&Value::Null);
        let visible = match data {
            Value::Array(items) => items.iter().any(|i| same_id(i, id)),
            item => same_id(item, id),
        };
        if !visible {
            return Err(format!("created resource {id} is not visible"));
        }
    }
    Ok(v)
}

/// Runs the sampled tools of `manifest` against `mock` through a `serve` loop.
pub async fn evaluate(manifest: &ToolManifest, sample: &SampleReport, mock: &MockHandle, env: EnvStore, opts: &EvalOptions) -> EvalRun {
    let mut target = manifest.clone();
    target.base_url = BaseUrl::parse(mock.base_url()).expect("mock URL is absolute");
    let api = manifest.api_title.clone();
    let selected: Vec<&ToolSpec> = sample
        .selected_tools(manifest)
        .into_iter()
        .filter(|t| !opts.exclude.contains(&t.name))
        .collect();
    let ordered = call_order(manifest, &selected, &opts.order);
    let fail_all = |why: &str| {
        let calls = ordered
            .iter()
            .map(|t| CallOutcome {
                tool: t.name.clone(),
                endpoint: t.endpoint.label(),
                passed: false,
                http_status: None,
                diagnostic: Some(why.to_string()),
            })
            .collect();
        ApiReport::finish(api.clone(), calls)
    };
    let runtime = match Runtime::new(target, env, RuntimeConfig { timeout: opts.timeout }) {
        Ok(r) => Arc::new(r),
        Err(e) => {
            return EvalRun {
                report: fail_all(&e.to_string()),
                wire: String::new(),
            }
        }
    };
    // one pipe per direction so closing the client side is a real EOF
    let (client_out, server_in) = tokio::io::duplex(1 << 16);
    let (server_out, client_in) = tokio::io::duplex(1 << 16);
    let server_task = tokio::spawn(serve(runtime, BufReader::new(server_in), server_out));
    let mut rpc = RpcClient {
        writer: client_out,
        reader: BufReader::new(client_in).lines(),
        next_id: 0,
        wire: String::new(),
        timeout: opts.timeout + Duration::from_secs(5),
    };

    let listed: Result<BTreeSet<String>, String> = async {
        rpc.request("initialize", json!({"protocolVersion": "2025-06-18", "capabilities": {}, "clientInfo": {"name": "automcp-eval", "version": "0"}}))
            .await?;
        let list = rpc.request("tools/list", json!({})).await?;
        Ok(list
            .pointer("/result/tools")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(|t| t.get("name").and_then(Value::as_str).map(str::to_string))
            .collect())
    }
    .await;
    let listed = match listed {
        Ok(l) => l,
        Err(e) => {
            return EvalRun {
                report: fail_all(&e),
                wire: rpc.wire,
            }
        }
    };

    let mut created: BTreeMap<String, Value> = BTreeMap::new();
    let mut calls = Vec::with_capacity(ordered.len());
    for tool in ordered {
        let mut outcome = CallOutcome {
            tool: tool.name.clone(),
            endpoint: tool.endpoint.label(),
            passed: false,
            http_status: None,
            diagnostic: None,
        };
        if !listed.contains(&tool.name) {
            outcome.diagnostic = Some("tool missing from tools/list".into());
            calls.push(outcome);
            continue;
        }
        let (args, expect) = build_args(tool, &created);
        let log_before = mock.requests().len();
        let response = rpc
            .request("tools/call", json!({"name": tool.name, "arguments": args}))
            .await;
        let log = mock.requests();
        if log.len() > log_before {
            outcome.http_status = log.last().map(|r| r.status);
        }
        let verdict = response.and_then(|r| {
            if let Some(err) = r.get("error") {
                return Err(format!("JSON-RPC error {}: {}", err["code"], err["message"].as_str().unwrap_or("")));
            }
            let text = r
                .pointer("/result/content/0/text")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            if r.pointer("/result/isError") == Some(&json!(true)) {
                return Err(text);
            }
            check_envelope(tool, &text, expect.as_ref())
        });
        match verdict {
            Ok(envelope) => {
                outcome.passed = true;
                if tool.endpoint.method == HttpMethod::Post {
                    if let Some(id) = envelope.pointer("/data/id") {
                        created.insert(tool.endpoint.path_template.trim_end_matches('/').to_string(), id.clone());
                    }
                }
            }
            Err(why) => outcome.diagnostic = Some(why),
        }
        calls.push(outcome);
    }
    drop(rpc.writer);
    // drain whatever the server still writes before it exits
    while let Ok(Ok(Some(line))) = tokio::time::timeout(Duration::from_secs(5), rpc.reader.next_line()).await {
        rpc.wire.push_str(&line);
        rpc.wire.push('\n');
    }
    let _ = server_task.await;
    EvalRun {
        report: ApiReport::finish(api, calls),
        wire: rpc.wire,
    }
}

/// Compiles, starts a fresh mock, samples and evaluates one contract. A
/// contract that fails to compile scores zero over all of its operations.
pub async fn evaluate_document(raw: &RawDocument, scenario: &Scenario, opts: &EvalOptions) -> Result<EvalRun, MockError> {
    let compiled = match compile_document(raw) {
        Ok(c) => c,
        Err(e) => {
            let total = crate::compiler::count_operations(&raw.tree);
            return Ok(EvalRun {
                report: ApiReport {
                    api: raw.title(),
                    compiled: false,
                    compile_error: Some(e.to_string()),
                    failure_class: e.class(),
                    attempted: total,
                    passed: 0,
                    pass_rate: 0.0,
                    calls: Vec::new(),
                },
                wire: String::new(),
            });
        }
    };
    let env = scenario.env_store();
    let mock = run_mock_upstream(&compiled.manifest, env.clone(), scenario.mock.clone(), 0).await?;
    let report = sample(&compiled.manifest, opts.threshold);
    let run = evaluate(&compiled.manifest, &report, &mock, env, opts).await;
    mock.shutdown().await;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesized_values_respect_types() {
        assert_eq!(synthesize(&json!({"type": "integer", "minimum": 5}), 0), json!(5));
        assert_eq!(synthesize(&json!({"type": "string", "minLength": 10}), 0), json!("samplexxxx"));
        assert_eq!(synthesize(&json!({"type": "array", "items": {"type": "boolean"}}), 0), json!([true]));
        assert_eq!(
            synthesize(&json!({"properties": {"a": {"enum": ["x", "y"]}}}), 0),
            json!({"a": "x"})
        );
    }

    #[test]
    fn collection_prefix() {
        assert_eq!(collection_of("/pets/{petId}", "petId").as_deref(), Some("/pets"));
        assert_eq!(collection_of("/boards/{id}/cards", "id").as_deref(), Some("/boards"));
        assert_eq!(collection_of("/x", "id"), None);
    }

    #[test]
    fn name_lists_skip_comments() {
        assert_eq!(parse_name_list("# c\n\na\n b \n"), vec!["a", "b"]);
    }
}
