//! Loading OpenAPI documents and normalizing them into a single 3.x-shaped tree.
//!
//! Swagger 2.0 documents are rewritten into the 3.x layout so that every later
//! stage (ref flattening, compilation, linting) only deals with one shape:
//!
//! - `securityDefinitions` become `components.securitySchemes`
//! - `definitions` become `components.schemas`
//! - `body`/`formData` parameters become `requestBody`
//! - `produces`/`consumes` become per-operation media types
//! - `schemes` + `host` + `basePath` become a single `servers` entry

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;
use url::Url;

use crate::doctor::FailureClass;
use crate::pointer;

/// HTTP methods that may appear as keys of a path item.
pub const OPERATION_KEYS: [&str; 8] = ["get", "put", "post", "delete", "options", "head", "patch", "trace"];

const TWO_ONLY_KEYS: [&str; 9] = [
    "swagger",
    "definitions",
    "securityDefinitions",
    "schemes",
    "host",
    "basePath",
    "produces",
    "consumes",
    "parameters",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Yaml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dialect {
    #[serde(rename = "openapi_2_0")]
    OpenApi2,
    #[serde(rename = "openapi_3_x")]
    OpenApi3,
}

/// A parsed contract exactly as it was found on disk.
#[derive(Debug, Clone)]
pub struct RawDocument {
    pub source_path: PathBuf,
    pub format: Format,
    pub dialect: Dialect,
    pub tree: Value,
    /// Original source text; patches are diffed against it.
    pub text: String,
    pub warnings: Vec<String>,
}

impl RawDocument {
    pub fn title(&self) -> String {
        api_title(&self.tree)
    }
}

pub fn api_title(tree: &Value) -> String {
    tree.pointer("/info/title")
        .and_then(Value::as_str)
        .unwrap_or("api")
        .to_string()
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not valid JSON or YAML: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: neither `swagger: \"2.0\"` nor `openapi: 3.x` found at the top level")]
    Dialect { path: PathBuf },
}

/// The upstream base URL every tool request is issued against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BaseUrl(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("base URL {url:?} is unusable: {reason}")]
pub struct BaseUrlError {
    pub url: String,
    pub reason: String,
    /// Lint class this condition maps to (always B).
    pub class: FailureClass,
}

impl BaseUrl {
    /// Validates an absolute http(s) URL and strips any trailing slash.
    pub fn parse(raw: &str) -> Result<Self, BaseUrlError> {
        let fail = |reason: &str| BaseUrlError {
            url: raw.to_string(),
            reason: reason.to_string(),
            class: FailureClass::B,
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(fail("empty"));
        }
        if trimmed.contains('{') || trimmed.contains('}') {
            return Err(fail("contains an unresolved template placeholder"));
        }
        let parsed = Url::parse(trimmed).map_err(|_| fail("not an absolute URL"))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(fail("scheme must be http or https"));
        }
        if parsed.host_str().is_none_or(str::is_empty) {
            return Err(fail("missing host"));
        }
        Ok(BaseUrl(trimmed.trim_end_matches('/').to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BaseUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn load_document(path: impl AsRef<Path>) -> Result<RawDocument, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_document(&text, path)
}

/// Parses source text; JSON is tried first so documents valid in both grammars are JSON.
pub fn parse_document(text: &str, path: impl AsRef<Path>) -> Result<RawDocument, IngestError> {
    let path = path.as_ref().to_path_buf();
    let (format, tree) = match serde_json::from_str::<Value>(text) {
        Ok(tree) => (Format::Json, tree),
        Err(_) => {
            let yaml = parse_yaml(text).map_err(|message| IngestError::Parse {
                path: path.clone(),
                message,
            })?;
            (Format::Yaml, yaml)
        }
    };
    let mut warnings = Vec::new();
    let dialect = detect_dialect(&tree, &mut warnings).ok_or(IngestError::Dialect { path: path.clone() })?;
    Ok(RawDocument {
        source_path: path,
        format,
        dialect,
        tree,
        text: text.to_string(),
        warnings,
    })
}

pub(crate) fn parse_yaml(text: &str) -> Result<Value, String> {
    let mut value: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
    value.apply_merge().map_err(|e| e.to_string())?;
    Ok(yaml_to_json(value))
}

fn yaml_to_json(value: serde_yaml::Value) -> Value {
    use serde_yaml::Value as Y;
    match value {
        Y::Null => Value::Null,
        Y::Bool(b) => Value::Bool(b),
        Y::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::from(i)
            } else if let Some(u) = n.as_u64() {
                Value::from(u)
            } else {
                n.as_f64()
                    .and_then(serde_json::Number::from_f64)
                    .map(Value::Number)
                    .unwrap_or_else(|| Value::String(n.to_string()))
            }
        }
        Y::String(s) => Value::String(s),
        Y::Sequence(items) => Value::Array(items.into_iter().map(yaml_to_json).collect()),
        Y::Mapping(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                out.insert(yaml_key(k), yaml_to_json(v));
            }
            Value::Object(out)
        }
        Y::Tagged(tagged) => yaml_to_json(tagged.value),
    }
}

fn yaml_key(key: serde_yaml::Value) -> String {
    use serde_yaml::Value as Y;
    match key {
        Y::String(s) => s,
        Y::Number(n) => n.to_string(),
        Y::Bool(b) => b.to_string(),
        Y::Null => "null".to_string(),
        other => serde_yaml::to_string(&other).unwrap_or_default().trim().to_string(),
    }
}

fn version_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        // unquoted YAML versions such as `swagger: 2.0`
        Value::Number(n) => n.as_f64().map(|f| {
            let s = n.to_string();
            if s.contains('.') { s } else { format!("{f:.1}") }
        }),
        _ => None,
    }
}

fn detect_dialect(tree: &Value, warnings: &mut Vec<String>) -> Option<Dialect> {
    if let Some(v) = tree.get("swagger").and_then(version_string) {
        if v == "2.0" {
            return Some(Dialect::OpenApi2);
        }
    }
    let v = tree.get("openapi").and_then(version_string)?;
    if !v.starts_with("3.") {
        return None;
    }
    if v.starts_with("3.1") {
        warnings.push(format!("openapi {v}: 3.1 documents are read with 3.0 semantics"));
    }
    Some(Dialect::OpenApi3)
}

/// Composes the upstream base URL from the document's server declarations.
pub fn resolve_base_url(doc: &RawDocument) -> Result<BaseUrl, BaseUrlError> {
    base_url_from_tree(&doc.tree, doc.dialect)
}

pub fn base_url_from_tree(tree: &Value, dialect: Dialect) -> Result<BaseUrl, BaseUrlError> {
    match dialect {
        Dialect::OpenApi2 => BaseUrl::parse(&swagger_base_url(tree).unwrap_or_default()),
        Dialect::OpenApi3 => {
            let server = tree
                .get("servers")
                .and_then(Value::as_array)
                .and_then(|s| s.first())
                .ok_or_else(|| BaseUrlError {
                    url: String::new(),
                    reason: "no servers declared".into(),
                    class: FailureClass::B,
                })?;
            let url = server.get("url").and_then(Value::as_str).unwrap_or("");
            let substituted = substitute_server_variables(url, server.get("variables"))?;
            BaseUrl::parse(&substituted)
        }
    }
}

/// `scheme://host + basePath` for 2.0 documents; `None` when there is nothing to compose.
fn swagger_base_url(tree: &Value) -> Option<String> {
    let base_path = tree.get("basePath").and_then(Value::as_str).unwrap_or("");
    let host = tree.get("host").and_then(Value::as_str).filter(|h| !h.is_empty());
    let Some(host) = host else {
        return (!base_path.is_empty()).then(|| base_path.to_string());
    };
    let schemes: Vec<&str> = tree
        .get("schemes")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    let scheme = if schemes.is_empty() || schemes.contains(&"https") {
        "https"
    } else {
        schemes[0]
    };
    Some(format!("{scheme}://{host}{base_path}"))
}

fn server_var_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([^{}]+)\}").expect("static regex"))
}

fn substitute_server_variables(url: &str, vars: Option<&Value>) -> Result<String, BaseUrlError> {
    let mut missing = None;
    let out = server_var_regex().replace_all(url, |caps: &regex::Captures<'_>| {
        let name = &caps[1];
        match vars
            .and_then(|v| v.get(name))
            .and_then(|v| v.get("default"))
            .and_then(|d| match d {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            }) {
            Some(d) => d,
            None => {
                missing.get_or_insert_with(|| name.to_string());
                caps[0].to_string()
            }
        }
    });
    match missing {
        Some(name) => Err(BaseUrlError {
            url: url.to_string(),
            reason: format!("server variable `{name}` has no declared default"),
            class: FailureClass::B,
        }),
        None => Ok(out.into_owned()),
    }
}

/// Rewrites the document into 3.x shape and repairs duplicate operationIds and
/// undeclared path parameters.
pub fn normalize(doc: &RawDocument) -> Value {
    normalize_tree(&doc.tree, doc.dialect)
}

pub fn normalize_tree(tree: &Value, dialect: Dialect) -> Value {
    let mut out = match dialect {
        Dialect::OpenApi2 => swagger_to_openapi3(tree),
        Dialect::OpenApi3 => tree.clone(),
    };
    dedupe_operation_ids(&mut out);
    synthesize_path_params(&mut out);
    out
}

fn path_items_mut(tree: &mut Value) -> impl Iterator<Item = (&String, &mut Map<String, Value>)> {
    tree.get_mut("paths")
        .and_then(Value::as_object_mut)
        .into_iter()
        .flat_map(|paths| paths.iter_mut())
        .filter_map(|(p, item)| item.as_object_mut().map(|m| (p, m)))
}

fn dedupe_operation_ids(tree: &mut Value) {
    let mut taken: HashSet<String> = HashSet::new();
    // first pass: collect all ids so generated suffixes never collide with later originals
    let all: HashSet<String> = path_items_mut(tree)
        .flat_map(|(_, item)| {
            OPERATION_KEYS
                .iter()
                .filter_map(|m| item.get(*m)?.get("operationId")?.as_str().map(str::to_string))
                .collect::<Vec<_>>()
        })
        .collect();
    for (_, item) in path_items_mut(tree) {
        for (method, op) in item.iter_mut() {
            if !OPERATION_KEYS.contains(&method.as_str()) {
                continue;
            }
            let Some(id) = op.get("operationId").and_then(Value::as_str).map(str::to_string) else {
                continue;
            };
            if taken.insert(id.clone()) {
                continue;
            }
            let mut n = 2;
            let fresh = loop {
                let candidate = format!("{id}_{n}");
                if !taken.contains(&candidate) && !all.contains(&candidate) {
                    break candidate;
                }
                n += 1;
            };
            taken.insert(fresh.clone());
            op["operationId"] = Value::String(fresh);
        }
    }
}

/// Names of `{var}` segments in a path template, in order.
pub fn template_vars(path: &str) -> Vec<String> {
    let mut vars = Vec::new();
    let mut rest = path;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else { break };
        let name = &rest[start + 1..start + len];
        if !name.is_empty() && !vars.iter().any(|v| v == name) {
            vars.push(name.to_string());
        }
        rest = &rest[start + len + 1..];
    }
    vars
}

fn declared_path_params(root: &Value, params: Option<&Value>) -> HashSet<String> {
    params
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|p| {
            let p = match p.get("$ref").and_then(Value::as_str) {
                Some(r) => root.pointer(&pointer::follow_refs(root, &pointer::from_fragment(r)?)?)?,
                None => p,
            };
            (p.get("in")?.as_str()? == "path").then(|| p.get("name")?.as_str().map(str::to_string))?
        })
        .collect()
}

fn synthesize_path_params(tree: &mut Value) {
    let snapshot = tree.clone();
    for (path, item) in path_items_mut(tree) {
        let vars = template_vars(path);
        if vars.is_empty() {
            continue;
        }
        let path_level = declared_path_params(&snapshot, item.get("parameters"));
        for (method, op) in item.iter_mut() {
            if !OPERATION_KEYS.contains(&method.as_str()) || !op.is_object() {
                continue;
            }
            let op_level = declared_path_params(&snapshot, op.get("parameters"));
            let missing: Vec<&String> = vars
                .iter()
                .filter(|v| !path_level.contains(*v) && !op_level.contains(*v))
                .collect();
            if missing.is_empty() {
                continue;
            }
            let params = op
                .as_object_mut()
                .expect("checked object")
                .entry("parameters")
                .or_insert_with(|| Value::Array(Vec::new()));
            if !params.is_array() {
                *params = Value::Array(Vec::new());
            }
            let list = params.as_array_mut().expect("array");
            for name in missing {
                list.push(json!({
                    "name": name,
                    "in": "path",
                    "required": true,
                    "schema": {"type": "string"}
                }));
            }
        }
    }
}

fn rewrite_ref(reference: &str) -> String {
    const MOVES: [(&str, &str); 4] = [
        ("#/definitions/", "#/components/schemas/"),
        ("#/parameters/", "#/components/parameters/"),
        ("#/responses/", "#/components/responses/"),
        ("#/securityDefinitions/", "#/components/securitySchemes/"),
    ];
    for (from, to) in MOVES {
        if let Some(rest) = reference.strip_prefix(from) {
            return format!("{to}{rest}");
        }
    }
    reference.to_string()
}

fn rewrite_refs(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if k == "$ref" {
                    if let Value::String(s) = v {
                        *s = rewrite_ref(s);
                    }
                } else {
                    rewrite_refs(v);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(rewrite_refs),
        _ => {}
    }
}

const PARAM_SCHEMA_KEYS: [&str; 17] = [
    "type",
    "format",
    "items",
    "default",
    "maximum",
    "exclusiveMaximum",
    "minimum",
    "exclusiveMinimum",
    "maxLength",
    "minLength",
    "pattern",
    "maxItems",
    "minItems",
    "uniqueItems",
    "enum",
    "multipleOf",
    "allowEmptyValue",
];

fn fix_file_type(schema: &mut Value) {
    if schema.get("type").and_then(Value::as_str) == Some("file") {
        schema["type"] = json!("string");
        schema["format"] = json!("binary");
    }
    if let Some(items) = schema.get_mut("items") {
        fix_file_type(items);
    }
}

struct SwaggerContext<'a> {
    root: &'a Value,
    produces: Vec<String>,
    consumes: Vec<String>,
}

fn string_list(v: Option<&Value>) -> Option<Vec<String>> {
    v.and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
}

impl SwaggerContext<'_> {
    /// Inlines a parameter `$ref` when its target is a body/formData parameter,
    /// since those have no 3.x `components.parameters` equivalent.
    fn deref_param<'p>(&'p self, param: &'p Value) -> &'p Value {
        if let Some(r) = param.get("$ref").and_then(Value::as_str) {
            if let Some(target) = pointer::from_fragment(r).and_then(|p| self.root.pointer(&p)) {
                if matches!(target.get("in").and_then(Value::as_str), Some("body" | "formData")) {
                    return target;
                }
            }
        }
        param
    }

    fn convert_param(&self, param: &Value) -> Value {
        let Some(obj) = param.as_object() else { return param.clone() };
        if obj.contains_key("$ref") {
            return param.clone();
        }
        let mut out = Map::new();
        let mut schema = Map::new();
        for (k, v) in obj {
            if PARAM_SCHEMA_KEYS.contains(&k.as_str()) {
                if k != "allowEmptyValue" {
                    schema.insert(k.clone(), v.clone());
                } else {
                    out.insert(k.clone(), v.clone());
                }
            } else if k == "collectionFormat" {
                continue;
            } else if k == "x-example" {
                out.insert("example".into(), v.clone());
            } else {
                out.insert(k.clone(), v.clone());
            }
        }
        if !schema.is_empty() {
            let mut schema = Value::Object(schema);
            fix_file_type(&mut schema);
            out.insert("schema".into(), schema);
        }
        Value::Object(out)
    }

    fn convert_operation(&self, op: &Value, path_params: &[Value]) -> Value {
        let Some(obj) = op.as_object() else { return op.clone() };
        let consumes = string_list(obj.get("consumes")).unwrap_or_else(|| self.consumes.clone());
        let produces = string_list(obj.get("produces")).unwrap_or_else(|| self.produces.clone());

        let mut params: Vec<&Value> = Vec::new();
        // path-level body/formData parameters only make sense per operation
        for p in path_params {
            let p = self.deref_param(p);
            if matches!(p.get("in").and_then(Value::as_str), Some("body" | "formData")) {
                params.push(p);
            }
        }
        if let Some(list) = obj.get("parameters").and_then(Value::as_array) {
            params.extend(list.iter().map(|p| self.deref_param(p)));
        }

        let mut regular = Vec::new();
        let mut body: Option<Value> = None;
        let mut form_props = Map::new();
        let mut form_required = Vec::new();
        for p in params {
            match p.get("in").and_then(Value::as_str) {
                Some("body") => {
                    let mut rb = Map::new();
                    if let Some(d) = p.get("description") {
                        rb.insert("description".into(), d.clone());
                    }
                    if let Some(r) = p.get("required") {
                        rb.insert("required".into(), r.clone());
                    }
                    let schema = p.get("schema").cloned().unwrap_or_else(|| json!({}));
                    let media: Vec<String> = if consumes.is_empty() {
                        vec!["application/json".into()]
                    } else {
                        consumes.clone()
                    };
                    let content: Map<String, Value> = media
                        .into_iter()
                        .map(|m| (m, json!({ "schema": schema.clone() })))
                        .collect();
                    rb.insert("content".into(), Value::Object(content));
                    body = Some(Value::Object(rb));
                }
                Some("formData") => {
                    let name = p.get("name").and_then(Value::as_str).unwrap_or("field").to_string();
                    let converted = self.convert_param(p);
                    let mut schema = converted.get("schema").cloned().unwrap_or_else(|| json!({"type": "string"}));
                    if let Some(d) = p.get("description") {
                        schema["description"] = d.clone();
                    }
                    if p.get("required").and_then(Value::as_bool) == Some(true) {
                        form_required.push(Value::String(name.clone()));
                    }
                    form_props.insert(name, schema);
                }
                _ => regular.push(self.convert_param(p)),
            }
        }
        if body.is_none() && !form_props.is_empty() {
            let media = consumes
                .iter()
                .find(|m| m.starts_with("multipart/") || m.starts_with("application/x-www-form-urlencoded"))
                .cloned()
                .unwrap_or_else(|| "application/x-www-form-urlencoded".into());
            let mut schema = json!({"type": "object", "properties": form_props});
            if !form_required.is_empty() {
                schema["required"] = Value::Array(form_required.clone());
            }
            let mut rb = json!({"content": {media: {"schema": schema}}});
            if !form_required.is_empty() {
                rb["required"] = json!(true);
            }
            body = Some(rb);
        }

        let mut out = Map::new();
        for (k, v) in obj {
            match k.as_str() {
                "consumes" | "produces" | "schemes" => {}
                "parameters" => {
                    if !regular.is_empty() {
                        out.insert(k.clone(), Value::Array(std::mem::take(&mut regular)));
                    }
                    if let Some(b) = body.take() {
                        out.insert("requestBody".into(), b);
                    }
                }
                "responses" => {
                    out.insert(k.clone(), self.convert_responses(v, &produces));
                }
                _ => {
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        if let Some(b) = body {
            out.insert("requestBody".into(), b);
        }
        Value::Object(out)
    }

    fn convert_response(&self, resp: &Value, produces: &[String]) -> Value {
        let Some(obj) = resp.as_object() else { return resp.clone() };
        if obj.contains_key("$ref") {
            return resp.clone();
        }
        let mut out = Map::new();
        for (k, v) in obj {
            match k.as_str() {
                "schema" => {
                    let media: Vec<String> = if produces.is_empty() {
                        vec!["application/json".into()]
                    } else {
                        produces.to_vec()
                    };
                    let mut schema = v.clone();
                    fix_file_type(&mut schema);
                    let content: Map<String, Value> =
                        media.into_iter().map(|m| (m, json!({"schema": schema.clone()}))).collect();
                    out.insert("content".into(), Value::Object(content));
                }
                "examples" => {}
                "headers" => {
                    let headers = v
                        .as_object()
                        .map(|h| {
                            h.iter()
                                .map(|(name, spec)| (name.clone(), self.convert_header(spec)))
                                .collect::<Map<_, _>>()
                        })
                        .unwrap_or_default();
                    out.insert(k.clone(), Value::Object(headers));
                }
                _ => {
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        if !out.contains_key("description") {
            out.insert("description".into(), json!(""));
        }
        Value::Object(out)
    }

    fn convert_header(&self, header: &Value) -> Value {
        let Some(obj) = header.as_object() else { return header.clone() };
        let mut out = Map::new();
        let mut schema = Map::new();
        for (k, v) in obj {
            if PARAM_SCHEMA_KEYS.contains(&k.as_str()) {
                schema.insert(k.clone(), v.clone());
            } else if k != "collectionFormat" {
                out.insert(k.clone(), v.clone());
            }
        }
        if !schema.is_empty() {
            out.insert("schema".into(), Value::Object(schema));
        }
        Value::Object(out)
    }

    fn convert_responses(&self, responses: &Value, produces: &[String]) -> Value {
        match responses.as_object() {
            Some(map) => Value::Object(
                map.iter()
                    .map(|(code, r)| (code.clone(), self.convert_response(r, produces)))
                    .collect(),
            ),
            None => responses.clone(),
        }
    }

    fn convert_path_item(&self, item: &Value) -> Value {
        let Some(obj) = item.as_object() else { return item.clone() };
        let path_params: Vec<Value> = obj
            .get("parameters")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        let mut out = Map::new();
        for (k, v) in obj {
            if k == "parameters" {
                let kept: Vec<Value> = path_params
                    .iter()
                    .filter(|p| {
                        !matches!(
                            self.deref_param(p).get("in").and_then(Value::as_str),
                            Some("body" | "formData")
                        )
                    })
                    .map(|p| self.convert_param(p))
                    .collect();
                if !kept.is_empty() {
                    out.insert(k.clone(), Value::Array(kept));
                }
            } else if OPERATION_KEYS.contains(&k.as_str()) {
                out.insert(k.clone(), self.convert_operation(v, &path_params));
            } else {
                out.insert(k.clone(), v.clone());
            }
        }
        Value::Object(out)
    }
}

fn convert_security_scheme(scheme: &Value) -> Value {
    let Some(obj) = scheme.as_object() else { return scheme.clone() };
    match obj.get("type").and_then(Value::as_str) {
        Some("basic") => {
            let mut out = Map::new();
            out.insert("type".into(), json!("http"));
            out.insert("scheme".into(), json!("basic"));
            if let Some(d) = obj.get("description") {
                out.insert("description".into(), d.clone());
            }
            Value::Object(out)
        }
        Some("oauth2") => {
            let flow_name = match obj.get("flow").and_then(Value::as_str) {
                Some("implicit") => "implicit",
                Some("password") => "password",
                Some("application") => "clientCredentials",
                Some("accessCode") => "authorizationCode",
                Some(other) => other,
                None => "authorizationCode",
            };
            let mut flow = Map::new();
            for key in ["authorizationUrl", "tokenUrl", "refreshUrl"] {
                if let Some(v) = obj.get(key) {
                    flow.insert(key.into(), v.clone());
                }
            }
            flow.insert("scopes".into(), obj.get("scopes").cloned().unwrap_or_else(|| json!({})));
            let mut out = Map::new();
            out.insert("type".into(), json!("oauth2"));
            if let Some(d) = obj.get("description") {
                out.insert("description".into(), d.clone());
            }
            out.insert("flows".into(), json!({ flow_name: flow }));
            Value::Object(out)
        }
        _ => scheme.clone(),
    }
}

fn swagger_to_openapi3(tree: &Value) -> Value {
    let Some(src) = tree.as_object() else { return tree.clone() };
    let ctx = SwaggerContext {
        root: tree,
        produces: string_list(src.get("produces")).unwrap_or_default(),
        consumes: string_list(src.get("consumes")).unwrap_or_default(),
    };

    let mut out = Map::new();
    out.insert("openapi".into(), json!("3.0.3"));
    if let Some(info) = src.get("info") {
        out.insert("info".into(), info.clone());
    }
    if let Some(url) = swagger_base_url(tree) {
        out.insert("servers".into(), json!([{ "url": url }]));
    }

    let mut components = Map::new();
    for (k, v) in src {
        match k.as_str() {
            "info" => {}
            "paths" => {
                let paths: Map<String, Value> = v
                    .as_object()
                    .map(|m| m.iter().map(|(p, item)| (p.clone(), ctx.convert_path_item(item))).collect())
                    .unwrap_or_default();
                out.insert("paths".into(), Value::Object(paths));
            }
            "definitions" => {
                let mut defs = v.clone();
                if let Some(map) = defs.as_object_mut() {
                    map.values_mut().for_each(fix_file_type);
                }
                components.insert("schemas".into(), defs);
            }
            "parameters" => {
                let params: Map<String, Value> = v
                    .as_object()
                    .map(|m| {
                        m.iter()
                            .filter(|(_, p)| {
                                !matches!(p.get("in").and_then(Value::as_str), Some("body" | "formData"))
                            })
                            .map(|(name, p)| (name.clone(), ctx.convert_param(p)))
                            .collect()
                    })
                    .unwrap_or_default();
                if !params.is_empty() {
                    components.insert("parameters".into(), Value::Object(params));
                }
            }
            "responses" => {
                components.insert("responses".into(), ctx.convert_responses(v, &ctx.produces));
            }
            "securityDefinitions" => {
                let schemes: Map<String, Value> = v
                    .as_object()
                    .map(|m| m.iter().map(|(n, s)| (n.clone(), convert_security_scheme(s))).collect())
                    .unwrap_or_default();
                components.insert("securitySchemes".into(), Value::Object(schemes));
            }
            _ if TWO_ONLY_KEYS.contains(&k.as_str()) => {}
            _ => {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    if !components.is_empty() {
        out.insert("components".into(), Value::Object(components));
    }
    let mut out = Value::Object(out);
    rewrite_refs(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> RawDocument {
        parse_document(text, "test").unwrap()
    }

    #[test]
    fn detects_json_and_openapi3() {
        let d = doc(r#"{"openapi":"3.0.0","info":{"title":"t","version":"1"},"paths":{}}"#);
        assert_eq!(d.format, Format::Json);
        assert_eq!(d.dialect, Dialect::OpenApi3);
    }

    #[test]
    fn detects_yaml_swagger() {
        let d = doc("swagger: \"2.0\"\ninfo:\n  title: t\npaths: {}\n");
        assert_eq!(d.format, Format::Yaml);
        assert_eq!(d.dialect, Dialect::OpenApi2);
        let unquoted = doc("swagger: 2.0\npaths: {}\n");
        assert_eq!(unquoted.dialect, Dialect::OpenApi2);
    }

    #[test]
    fn rejects_other_dialects() {
        let err = parse_document("asyncapi: \"2.0\"\n", "x").unwrap_err();
        assert!(matches!(err, IngestError::Dialect { .. }));
        let err = parse_document("{ not: [valid", "x").unwrap_err();
        assert!(matches!(err, IngestError::Parse { .. }));
    }

    #[test]
    fn openapi_31_warns() {
        let d = doc("openapi: 3.1.0\npaths: {}\n");
        assert_eq!(d.dialect, Dialect::OpenApi3);
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn yaml_integer_keys_become_strings() {
        let d = doc("openapi: 3.0.0\npaths:\n  /a:\n    get:\n      responses:\n        200:\n          description: ok\n");
        assert!(d.tree.pointer("/paths/~1a/get/responses/200").is_some());
    }

    #[test]
    fn swagger_base_url_composition() {
        let d = doc("swagger: '2.0'\nschemes: [https]\nhost: api.example.com\nbasePath: /v1\npaths: {}\n");
        assert_eq!(resolve_base_url(&d).unwrap().as_str(), "https://api.example.com/v1");
        let both = doc("swagger: '2.0'\nschemes: [http, https]\nhost: h.io\npaths: {}\n");
        assert_eq!(resolve_base_url(&both).unwrap().as_str(), "https://h.io");
        let only_http = doc("swagger: '2.0'\nschemes: [http]\nhost: h.io\nbasePath: /\npaths: {}\n");
        assert_eq!(resolve_base_url(&only_http).unwrap().as_str(), "http://h.io");
        let relative = doc("swagger: '2.0'\nbasePath: /v1\npaths: {}\n");
        assert_eq!(resolve_base_url(&relative).unwrap_err().class, FailureClass::B);
    }

    #[test]
    fn openapi3_servers() {
        let d = doc("openapi: 3.0.0\nservers:\n  - url: 'https://api.adp.com'\npaths: {}\n");
        assert_eq!(resolve_base_url(&d).unwrap().as_str(), "https://api.adp.com");
        let bad = doc("openapi: 3.0.0\nservers:\n  - url: '{{service-root}}'\npaths: {}\n");
        let err = resolve_base_url(&bad).unwrap_err();
        assert_eq!(err.class, FailureClass::B);
        let vars = doc(
            "openapi: 3.0.0\nservers:\n  - url: 'https://{region}.x.io/{v}/'\n    variables:\n      region: {default: eu}\n      v: {default: v2}\npaths: {}\n",
        );
        assert_eq!(resolve_base_url(&vars).unwrap().as_str(), "https://eu.x.io/v2");
        let nodefault = doc(
            "openapi: 3.0.0\nservers:\n  - url: 'https://{region}.x.io'\n    variables:\n      region: {enum: [eu]}\npaths: {}\n",
        );
        assert!(resolve_base_url(&nodefault).is_err());
        let relative = doc("openapi: 3.0.0\nservers:\n  - url: /api\npaths: {}\n");
        assert!(resolve_base_url(&relative).is_err());
        let none = doc("openapi: 3.0.0\npaths: {}\n");
        assert!(resolve_base_url(&none).is_err());
    }

    #[test]
    fn relocates_swagger_sections() {
        let d = doc(
            r##"
swagger: "2.0"
info: {title: Pets, version: "1"}
host: pets.io
securityDefinitions:
  api_key: {type: apiKey, in: header, name: X-Key}
  basic: {type: basic}
definitions:
  Pet: {type: object, properties: {name: {type: string}}}
paths:
  /pets:
    post:
      consumes: [application/json]
      parameters:
        - in: body
          name: pet
          required: true
          schema: {$ref: "#/definitions/Pet"}
      responses:
        201: {description: created, schema: {$ref: "#/definitions/Pet"}}
"##,
        );
        let n = normalize(&d);
        assert!(n.pointer("/components/securitySchemes/api_key").is_some());
        assert_eq!(n.pointer("/components/securitySchemes/basic/scheme").unwrap(), "basic");
        assert!(n.pointer("/components/schemas/Pet").is_some());
        assert_eq!(
            n.pointer("/paths/~1pets/post/requestBody/content/application~1json/schema/$ref").unwrap(),
            "#/components/schemas/Pet"
        );
        assert_eq!(n.pointer("/paths/~1pets/post/requestBody/required").unwrap(), true);
        assert!(n.pointer("/paths/~1pets/post/responses/201/content/application~1json/schema").is_some());
        assert_eq!(n["servers"][0]["url"], "https://pets.io");
        for key in ["swagger", "definitions", "securityDefinitions", "schemes", "host", "basePath"] {
            assert!(n.get(key).is_none(), "{key} survived");
        }
    }

    #[test]
    fn dedupes_operation_ids_in_document_order() {
        let d = doc(
            "openapi: 3.0.0\npaths:\n  /a:\n    get: {operationId: listItems, responses: {200: {description: ok}}}\n  /b:\n    get: {operationId: listItems, responses: {200: {description: ok}}}\n",
        );
        let n = normalize(&d);
        assert_eq!(n.pointer("/paths/~1a/get/operationId").unwrap(), "listItems");
        assert_eq!(n.pointer("/paths/~1b/get/operationId").unwrap(), "listItems_2");
    }

    #[test]
    fn synthesizes_missing_path_params() {
        let d = doc("openapi: 3.0.0\npaths:\n  /users/{id}:\n    get:\n      responses: {200: {description: ok}}\n");
        let n = normalize(&d);
        let params = n.pointer("/paths/~1users~1{id}/get/parameters").unwrap();
        assert_eq!(params, &json!([{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}]));
    }

    #[test]
    fn path_level_declaration_counts() {
        let d = doc(
            "openapi: 3.0.0\ncomponents:\n  parameters:\n    Id: {name: id, in: path, required: true, schema: {type: integer}}\npaths:\n  /users/{id}:\n    parameters:\n      - $ref: '#/components/parameters/Id'\n    get:\n      responses: {200: {description: ok}}\n",
        );
        let n = normalize(&d);
        assert!(n.pointer("/paths/~1users~1{id}/get/parameters").is_none());
    }

    #[test]
    fn template_vars_in_order() {
        assert_eq!(template_vars("/repos/{owner}/{repo}/branches"), vec!["owner", "repo"]);
        assert!(template_vars("/plain").is_empty());
    }
}
