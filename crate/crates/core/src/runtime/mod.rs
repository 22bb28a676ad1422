//! MCP server over newline-delimited JSON-RPC 2.0.
//!
//! Requests are handled concurrently; every response goes through one writer
//! task so lines never interleave.

mod auth;
mod invoke;

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWrite, AsyncWriteExt};
use tokio::sync::mpsc;
use tokio::task::JoinSet;

pub use auth::{
    basic_token, merge_extra_headers, parse_extra_headers, resolve_auth, ExtraHeadersError, InjectionPlan,
    MissingCredential, Redactor, REDACTED,
};
pub use invoke::{build_url, invoke_tool, InvocationResult, InvokeContext, InvokeError, RequestEcho, ResponseBody};

use crate::compiler::ToolManifest;
use crate::envfile::EnvStore;
use crate::security::{build_env_map, EnvMap};

pub const PROTOCOL_VERSIONS: [&str; 3] = ["2025-06-18", "2025-03-26", "2024-11-05"];
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub timeout: Duration,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self { timeout: DEFAULT_TIMEOUT }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    ExtraHeaders(#[from] ExtraHeadersError),
    #[error("HTTP client: {0}")]
    Client(String),
}

/// A manifest plus the immutable credential snapshot it is served with.
pub struct Runtime {
    manifest: ToolManifest,
    env_map: EnvMap,
    env: EnvStore,
    extra_headers: Vec<(String, String)>,
    redactor: Redactor,
    client: reqwest::Client,
    config: RuntimeConfig,
}

impl Runtime {
    pub fn new(manifest: ToolManifest, env: EnvStore, config: RuntimeConfig) -> Result<Self, RuntimeError> {
        let env_map = build_env_map(&manifest.schemes, &manifest.api_title);
        let extra_headers = parse_extra_headers(&env)?;
        let redactor = Redactor::new(&env_map, &env);
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| RuntimeError::Client(e.to_string()))?;
        Ok(Self {
            manifest,
            env_map,
            env,
            extra_headers,
            redactor,
            client,
            config,
        })
    }

    pub fn manifest(&self) -> &ToolManifest {
        &self.manifest
    }

    pub fn redactor(&self) -> &Redactor {
        &self.redactor
    }

    pub fn env_map(&self) -> &EnvMap {
        &self.env_map
    }

    /// Calls a tool directly, bypassing JSON-RPC.
    pub async fn call(&self, tool_name: &str, args: &Value) -> Option<Result<InvocationResult, InvokeError>> {
        let tool = self.manifest.tool(tool_name)?;
        let ctx = InvokeContext {
            client: &self.client,
            base: &self.manifest.base_url,
            schemes: &self.manifest.schemes,
            env_map: &self.env_map,
            env: &self.env,
            extra_headers: &self.extra_headers,
            timeout: self.config.timeout,
            redactor: &self.redactor,
        };
        Some(invoke_tool(tool, args, &ctx).await)
    }

    /// Handles one parsed message; `None` for notifications and stray responses.
    pub async fn handle(&self, msg: Value) -> Option<Value> {
        let Value::Object(obj) = msg else {
            return Some(error_response(Value::Null, INVALID_REQUEST, "request must be a JSON object", None));
        };
        let id = obj.get("id").cloned();
        let Some(method) = obj.get("method").and_then(Value::as_str) else {
            if obj.contains_key("result") || obj.contains_key("error") {
                return None;
            }
            return Some(error_response(id.unwrap_or(Value::Null), INVALID_REQUEST, "missing method", None));
        };
        if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
            return id.map(|id| error_response(id, INVALID_REQUEST, "jsonrpc must be \"2.0\"", None));
        }
        // notifications never get a response
        let id = id?;
        let params = obj.get("params").cloned().unwrap_or(Value::Null);
        let outcome = match method {
            "initialize" => Ok(self.initialize(&params)),
            "ping" => Ok(json!({})),
            "tools/list" => Ok(self.manifest.tools_list()),
            "tools/call" => self.tools_call(&params).await,
            other => Err((METHOD_NOT_FOUND, format!("method not found: {other}"), None)),
        };
        Some(match outcome {
            Ok(result) => json!({"jsonrpc": "2.0", "id": id, "result": result}),
            Err((code, message, data)) => error_response(id, code, &message, data),
        })
    }

    fn initialize(&self, params: &Value) -> Value {
        let requested = params.get("protocolVersion").and_then(Value::as_str);
        let version = requested
            .filter(|v| PROTOCOL_VERSIONS.contains(v))
            .unwrap_or(PROTOCOL_VERSIONS[0]);
        json!({
            "protocolVersion": version,
            "capabilities": {"tools": {"listChanged": false}},
            "serverInfo": {"name": "automcp", "version": env!("CARGO_PKG_VERSION")},
            "instructions": format!("Tools for the {} API at {}", self.manifest.api_title, self.manifest.base_url),
        })
    }

    async fn tools_call(&self, params: &Value) -> Result<Value, (i64, String, Option<Value>)> {
        let Some(name) = params.get("name").and_then(Value::as_str) else {
            return Err((INVALID_PARAMS, "tools/call needs a string `name`".into(), None));
        };
        let args = match params.get("arguments") {
            None | Some(Value::Null) => json!({}),
            Some(v @ Value::Object(_)) => v.clone(),
            Some(_) => return Err((INVALID_PARAMS, "`arguments` must be an object".into(), None)),
        };
        let Some(outcome) = self.call(name, &args).await else {
            return Err((INVALID_PARAMS, format!("unknown tool: {name}"), None));
        };
        match outcome {
            Ok(result) => {
                let body = self.redactor.redact(&result.body.to_text());
                let text = if result.is_error {
                    format!("HTTP {}: {body}", result.http_status)
                } else {
                    body
                };
                Ok(tool_result(&text, result.is_error))
            }
            Err(InvokeError::SchemaViolation(v)) => {
                let details: Vec<String> = v.iter().map(ToString::to_string).collect();
                Err((
                    INVALID_PARAMS,
                    format!("invalid arguments for {name}"),
                    Some(json!({"violations": details})),
                ))
            }
            Err(e) => {
                tracing::warn!(tool = name, error = %self.redactor.redact(&e.to_string()), "tool call failed");
                Ok(tool_result(&self.redactor.redact(&e.to_string()), true))
            }
        }
    }
}

fn tool_result(text: &str, is_error: bool) -> Value {
    json!({"content": [{"type": "text", "text": text}], "isError": is_error})
}

fn error_response(id: Value, code: i64, message: &str, data: Option<Value>) -> Value {
    let mut error = json!({"code": code, "message": message});
    if let Some(d) = data {
        error["data"] = d;
    }
    json!({"jsonrpc": "2.0", "id": id, "error": error})
}

/// Serves until `input` reaches EOF, then waits for in-flight calls to finish.
pub async fn serve<R, W>(runtime: Arc<Runtime>, input: R, output: W) -> std::io::Result<()>
where
    R: AsyncBufRead + Unpin,
    W: AsyncWrite + Unpin + Send + 'static,
{
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        let mut output = output;
        while let Some(line) = rx.recv().await {
            output.write_all(line.as_bytes()).await?;
            output.write_all(b"\n").await?;
            output.flush().await?;
        }
        output.shutdown().await.ok();
        Ok::<_, std::io::Error>(())
    });

    let mut tasks = JoinSet::new();
    let mut lines = input.lines();
    while let Some(line) = lines.next_line().await? {
        if line.trim().is_empty() {
            continue;
        }
        let msg: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => {
                let resp = error_response(Value::Null, PARSE_ERROR, "parse error", None);
                let _ = tx.send(resp.to_string());
                continue;
            }
        };
        if msg.is_array() {
            let resp = error_response(Value::Null, INVALID_REQUEST, "batch requests are not supported", None);
            let _ = tx.send(resp.to_string());
            continue;
        }
        let rt = Arc::clone(&runtime);
        let tx = tx.clone();
        tasks.spawn(async move {
            if let Some(resp) = rt.handle(msg).await {
                let _ = tx.send(resp.to_string());
            }
        });
    }
    while tasks.join_next().await.is_some() {}
    drop(tx);
    writer.await.map_err(std::io::Error::other)?
}

/// Serves on the process's stdin/stdout.
pub async fn serve_stdio(runtime: Arc<Runtime>) -> std::io::Result<()> {
    let stdin = tokio::io::BufReader::new(tokio::io::stdin());
    serve(runtime, stdin, tokio::io::stdout()).await
}
