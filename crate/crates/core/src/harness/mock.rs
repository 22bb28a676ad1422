//! In-process stand-in for the upstream API: routes by manifest, checks
//! credentials, echoes what it received and keeps a small resource store.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::compiler::{EndpointDescriptor, HttpMethod, ParamLocation, ToolManifest};
use crate::envfile::EnvStore;
use crate::runtime::basic_token;
use crate::security::{build_env_map, ApiKeyLocation, EnvMap, Injection, SchemeKind, SecurityScheme};

/// Ground truth the contract may not state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    /// Requirement applied to endpoints whose contract declares none.
    #[serde(default)]
    pub default_security: Vec<Vec<String>>,
    /// Headers every request must carry with exactly these values.
    #[serde(default)]
    pub required_headers: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("cannot bind mock upstream to port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoggedRequest {
    pub method: String,
    pub path: String,
    pub status: u16,
    /// Route template that matched, if any.
    pub route: Option<String>,
}

struct Route {
    method: HttpMethod,
    pattern: Regex,
    literal_len: usize,
    endpoint: EndpointDescriptor,
}

#[derive(Default)]
struct Store {
    collections: BTreeMap<String, Vec<Value>>,
    next_id: u64,
}

struct MockState {
    routes: Vec<Route>,
    schemes: Vec<SecurityScheme>,
    env_map: EnvMap,
    env: EnvStore,
    config: MockConfig,
    store: Mutex<Store>,
    log: Mutex<Vec<LoggedRequest>>,
}

pub struct MockHandle {
    base_url: String,
    addr: SocketAddr,
    state: Arc<MockState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl MockHandle {
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.state.log.lock().expect("mock log").clone()
    }

    /// Empties the resource store and the request log.
    pub fn reset(&self) {
        *self.state.store.lock().expect("mock store") = Store::default();
        self.state.log.lock().expect("mock log").clear();
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

fn route_for(endpoint: &EndpointDescriptor) -> Route {
    let mut pattern = String::from("^");
    let mut literal_len = 0;
    let mut rest = endpoint.path_template.as_str();
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        pattern.push_str(&regex::escape(&rest[..open]));
        literal_len += open;
        pattern.push_str("([^/]+)");
        rest = &rest[open + close + 1..];
    }
    pattern.push_str(&regex::escape(rest));
    literal_len += rest.len();
    pattern.push_str("/?$");
    Route {
        method: endpoint.method,
        pattern: Regex::new(&pattern).expect("escaped template"),
        literal_len,
        endpoint: endpoint.clone(),
    }
}

/// Starts the mock on `127.0.0.1:port` (0 picks a free port).
pub async fn run_mock_upstream(
    manifest: &ToolManifest,
    env: EnvStore,
    config: MockConfig,
    port: u16,
) -> Result<MockHandle, MockError> {
    let state = Arc::new(MockState {
        routes: manifest.tools.iter().map(|t| route_for(&t.endpoint)).collect(),
        schemes: manifest.schemes.clone(),
        env_map: build_env_map(&manifest.schemes, &manifest.api_title),
        env,
        config,
        store: Mutex::default(),
        log: Mutex::default(),
    });
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|source| MockError::Bind { port, source })?;
    let addr = listener.local_addr().map_err(|source| MockError::Bind { port, source })?;
    let app = Router::new().fallback(handle).with_state(state.clone());
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(MockHandle {
        base_url: format!("http://{addr}"),
        addr,
        state,
        shutdown: Some(tx),
        task: Some(task),
    })
}

fn error(status: StatusCode, kind: &str, detail: String) -> Response {
    (status, Json(json!({"error": kind, "detail": detail}))).into_response()
}

fn cookies(headers: &HeaderMap) -> BTreeMap<String, String> {
    headers
        .get_all("cookie")
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

impl MockState {
    fn expected(&self, scheme: &str, injection: Injection) -> Option<&str> {
        self.env_map
            .bindings_for(scheme)
            .find(|b| b.injection == injection)
            .and_then(|b| self.env.non_empty(&b.env_var))
    }

    fn satisfies(&self, scheme_id: &str, headers: &HeaderMap, query: &[(String, String)]) -> bool {
        let Some(scheme) = self.schemes.iter().find(|s| s.id == scheme_id) else {
            return false;
        };
        let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok());
        match &scheme.kind {
            SchemeKind::ApiKey {
                location,
                parameter_name,
            } => {
                let (injection, got) = match location {
                    ApiKeyLocation::Header => (Injection::HeaderApiKey, header(parameter_name).map(str::to_string)),
                    ApiKeyLocation::Query => (
                        Injection::QueryApiKey,
                        query.iter().find(|(k, _)| k == parameter_name).map(|(_, v)| v.clone()),
                    ),
                    ApiKeyLocation::Cookie => (Injection::CookieApiKey, cookies(headers).remove(parameter_name)),
                };
                matches!((self.expected(scheme_id, injection), got), (Some(e), Some(g)) if e == g)
            }
            SchemeKind::HttpBasic => {
                let user = self.expected(scheme_id, Injection::BasicUsername);
                let pass = self.expected(scheme_id, Injection::BasicPassword);
                match (user, pass) {
                    (Some(u), Some(p)) => header("authorization") == Some(format!("Basic {}", basic_token(u, p)).as_str()),
                    _ => false,
                }
            }
            SchemeKind::HttpBearer | SchemeKind::Oauth2 { .. } => {
                let injection = if matches!(scheme.kind, SchemeKind::HttpBearer) {
                    Injection::BearerToken
                } else {
                    Injection::Oauth2AccessToken
                };
                match self.expected(scheme_id, injection) {
                    Some(t) => header("authorization") == Some(format!("Bearer {t}").as_str()),
                    None => false,
                }
            }
            SchemeKind::None => true,
        }
    }

    fn authorized(&self, ep: &EndpointDescriptor, headers: &HeaderMap, query: &[(String, String)]) -> Result<(), String> {
        let requirement = if ep.security.is_empty() {
            &self.config.default_security
        } else {
            &ep.security
        };
        if requirement.is_empty() || requirement.iter().any(|set| set.iter().all(|s| self.satisfies(s, headers, query))) {
            return Ok(());
        }
        let options: Vec<String> = requirement.iter().map(|set| set.join(" + ")).collect();
        Err(format!("missing or invalid credentials; expected one of: {}", options.join(" | ")))
    }
}

fn parse_body(headers: &HeaderMap, body: &Bytes) -> Value {
    if body.is_empty() {
        return Value::Null;
    }
    let ct = headers
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_ascii_lowercase();
    if ct.contains("json") {
        if let Ok(v) = serde_json::from_slice(body) {
            return v;
        }
    }
    if ct.starts_with("application/x-www-form-urlencoded") {
        let map: Map<String, Value> = url::form_urlencoded::parse(body)
            .map(|(k, v)| (k.into_owned(), Value::String(v.into_owned())))
            .collect();
        return Value::Object(map);
    }
    Value::String(String::from_utf8_lossy(body).into_owned())
}

fn query_echo(query: &[(String, String)], skip: &[&str]) -> Map<String, Value> {
    let mut out = Map::new();
    for (k, v) in query.iter().filter(|(k, _)| !skip.contains(&k.as_str())) {
        match out.get_mut(k) {
            Some(Value::Array(a)) => a.push(json!(v)),
            Some(prev) => *prev = json!([prev.clone(), v]),
            None => {
                out.insert(k.clone(), json!(v));
            }
        }
    }
    out
}

async fn handle(State(st): State<Arc<MockState>>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let path = uri.path().to_string();
    let (status, route, response) = respond(&st, &method, &uri, &headers, &body);
    st.log.lock().expect("mock log").push(LoggedRequest {
        method: method.to_string(),
        path,
        status: status.as_u16(),
        route,
    });
    response
}

fn respond(st: &MockState, method: &Method, uri: &Uri, headers: &HeaderMap, body: &Bytes) -> (StatusCode, Option<String>, Response) {
    let path = uri.path();
    let found = st
        .routes
        .iter()
        .filter(|r| r.method.as_str() == method.as_str() && r.pattern.is_match(path))
        .max_by_key(|r| r.literal_len);
    let Some(route) = found else {
        let s = StatusCode::NOT_FOUND;
        return (s, None, error(s, "not_in_manifest", format!("{method} {path} matches no manifest endpoint")));
    };
    let ep = &route.endpoint;
    let template = Some(ep.path_template.clone());
    let query: Vec<(String, String)> = url::form_urlencoded::parse(uri.query().unwrap_or("").as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    if let Err(detail) = st.authorized(ep, headers, &query) {
        let s = StatusCode::UNAUTHORIZED;
        return (s, template, error(s, "unauthorized", detail));
    }
    for (name, value) in &st.config.required_headers {
        let got = headers.get(name.as_str()).and_then(|v| v.to_str().ok());
        if got != Some(value.as_str()) {
            let s = StatusCode::BAD_REQUEST;
            return (s, template, error(s, "missing_header", format!("header {name} must be {value:?}")));
        }
    }
    let jar = cookies(headers);
    let mut echoed_headers = Map::new();
    let mut echoed_cookies = Map::new();
    for p in &ep.parameters {
        let present = match p.location {
            ParamLocation::Header => headers.get(p.name.as_str()).and_then(|v| v.to_str().ok()).map(|v| {
                echoed_headers.insert(p.name.clone(), json!(v));
            }),
            ParamLocation::Cookie => jar.get(&p.name).map(|v| {
                echoed_cookies.insert(p.name.clone(), json!(v));
            }),
            ParamLocation::Query => query.iter().any(|(k, _)| k == &p.name).then_some(()),
            ParamLocation::Path => Some(()),
        };
        if p.required && present.is_none() {
            let s = StatusCode::BAD_REQUEST;
            return (s, template, error(s, "missing_parameter", format!("required {:?} parameter {} is missing", p.location, p.name)));
        }
    }
    let body = parse_body(headers, body);
    if ep.request_body.as_ref().is_some_and(|b| b.required) && body.is_null() {
        let s = StatusCode::BAD_REQUEST;
        return (s, template, error(s, "missing_body", "request body is required".into()));
    }
    if let (Some(rb), Value::Object(fields)) = (&ep.request_body, &body) {
        let required = rb.schema.get("required").and_then(Value::as_array).into_iter().flatten();
        if let Some(missing) = required.filter_map(Value::as_str).find(|k| !fields.contains_key(*k)) {
            let s = StatusCode::BAD_REQUEST;
            return (s, template, error(s, "missing_field", format!("body field {missing} is required")));
        }
    }
    // credential-carrying query keys never appear in the echo
    let secret_keys: Vec<&str> = st
        .schemes
        .iter()
        .filter_map(|s| match &s.kind {
            SchemeKind::ApiKey {
                location: ApiKeyLocation::Query,
                parameter_name,
            } => Some(parameter_name.as_str()),
            _ => None,
        })
        .collect();
    let echo = json!({
        "method": method.as_str(),
        "path": path,
        "route": ep.path_template,
        "query": query_echo(&query, &secret_keys),
        "headers": echoed_headers,
        "cookies": echoed_cookies,
        "body": body,
    });
    let (status, data) = st.apply_state(method, path, &ep.path_template, &body);
    (status, template, (status, Json(json!({"echo": echo, "data": data}))).into_response())
}

fn split_item(path: &str) -> Option<(&str, &str)> {
    let trimmed = path.trim_end_matches('/');
    let (collection, id) = trimmed.rsplit_once('/')?;
    (!collection.is_empty() && !id.is_empty()).then_some((collection, id))
}

fn id_matches(item: &Value, id: &str) -> bool {
    match item.get("id") {
        Some(Value::String(s)) => s == id,
        Some(Value::Number(n)) => n.to_string() == id,
        _ => false,
    }
}

impl MockState {
    fn apply_state(&self, method: &Method, path: &str, template: &str, body: &Value) -> (StatusCode, Value) {
        let mut store = self.store.lock().expect("mock store");
        let collection = path.trim_end_matches('/').to_string();
        match *method {
            Method::POST => {
                store.next_id += 1;
                let id = store.next_id;
                let mut item = match body {
                    Value::Object(m) => m.clone(),
                    Value::Null => Map::new(),
                    other => Map::from_iter([("value".to_string(), other.clone())]),
                };
                item.insert("id".into(), json!(id));
                let item = Value::Object(item);
                store.collections.entry(collection).or_default().push(item.clone());
                (StatusCode::CREATED, item)
            }
            Method::GET | Method::HEAD => {
                if let Some(items) = store.collections.get(&collection) {
                    return (StatusCode::OK, Value::Array(items.clone()));
                }
                if !template.trim_end_matches('/').ends_with('}') {
                    return (StatusCode::OK, json!([]));
                }
                let item = split_item(path)
                    .and_then(|(c, id)| store.collections.get(c)?.iter().find(|i| id_matches(i, id)).cloned());
                (StatusCode::OK, item.unwrap_or(Value::Null))
            }
            Method::PUT | Method::PATCH => {
                let Some((c, id)) = split_item(path) else { return (StatusCode::OK, Value::Null) };
                let Some(item) = store
                    .collections
                    .get_mut(c)
                    .and_then(|items| items.iter_mut().find(|i| id_matches(i, id)))
                else {
                    return (StatusCode::OK, Value::Null);
                };
                if let (Value::Object(target), Value::Object(update)) = (&mut *item, body) {
                    for (k, v) in update {
                        if k != "id" {
                            target.insert(k.clone(), v.clone());
                        }
                    }
                }
                (StatusCode::OK, item.clone())
            }
            Method::DELETE => {
                let removed = split_item(path).and_then(|(c, id)| {
                    let items = store.collections.get_mut(c)?;
                    let pos = items.iter().position(|i| id_matches(i, id))?;
                    Some(items.remove(pos))
                });
                (StatusCode::OK, removed.unwrap_or(Value::Null))
            }
            _ => (StatusCode::OK, Value::Null),
        }
    }
}
