//! Contract linting for the five defect classes that block automation, with
//! minimal repairs expressed as structured edits.
//!
//! Findings point into the raw document (not the normalized one) so patches can
//! be applied to the file the user actually maintains.

mod json_text;
pub mod patch;
pub mod rules;
mod yaml_text;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;
use url::Url;

pub use patch::{apply_patch, apply_to_tree, unified_diff, Applied, Edit, EditOp, Patch, PointerError};
pub use rules::{Rules, RulesError, VendorRule};

use crate::ingest::{base_url_from_tree, normalize, BaseUrl, Dialect, RawDocument, OPERATION_KEYS};
use crate::pointer;
use crate::refs::{flatten, FlattenedContract, RefError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureClass {
    A,
    B,
    C,
    D,
    E,
}

impl FailureClass {
    pub const ALL: [FailureClass; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];

    pub fn description(self) -> &'static str {
        match self {
            Self::A => "Incorrect or missing security schemes",
            Self::B => "Malformed or relative base URLs",
            Self::C => "Undocumented runtime headers and token prefixes",
            Self::D => "Parameter type mismatches",
            Self::E => "Missing endpoint-level auth",
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintFinding {
    pub class: FailureClass,
    /// JSON pointer into the raw document.
    pub location: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<Patch>,
    /// `.env` line that addresses an advisory finding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

impl LintFinding {
    fn new(class: FailureClass, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            class,
            location: location.into(),
            message: message.into(),
            patch: None,
            suggestion: None,
        }
    }

    fn with_edits(mut self, edits: Vec<Edit>) -> Self {
        if !edits.is_empty() {
            self.patch = Some(Patch { edits, loc_changed: 0 });
        }
        self
    }

    pub fn is_patchable(&self) -> bool {
        self.class != FailureClass::C && self.patch.is_some()
    }
}

/// Read-only helpers over the raw tree that know where each dialect keeps things.
struct View<'a> {
    tree: &'a Value,
    dialect: Dialect,
}

struct RawOp<'a> {
    path: &'a str,
    method: &'a str,
    ptr: String,
    node: &'a Value,
}

struct RawParam<'a> {
    /// Pointer of the node holding the content once `$ref`s are followed.
    resolved_ptr: String,
    entry: &'a Value,
    node: &'a Value,
}

impl<'a> View<'a> {
    fn schemes_base(&self) -> Vec<&'static str> {
        match self.dialect {
            Dialect::OpenApi2 => vec!["securityDefinitions"],
            Dialect::OpenApi3 => vec!["components", "securitySchemes"],
        }
    }

    fn schemes_ptr(&self) -> String {
        pointer::join(self.schemes_base())
    }

    fn scheme_ptr(&self, id: &str) -> String {
        let mut t: Vec<&str> = self.schemes_base();
        t.push(id);
        pointer::join(t)
    }

    fn schemes(&self) -> Option<&'a Map<String, Value>> {
        self.tree.pointer(&self.schemes_ptr()).and_then(Value::as_object)
    }

    fn operations(&self) -> Vec<RawOp<'a>> {
        let mut out = Vec::new();
        for (path, item) in self.tree.get("paths").and_then(Value::as_object).into_iter().flatten() {
            let Some(item) = item.as_object() else { continue };
            for (method, node) in item {
                if !OPERATION_KEYS.contains(&method.as_str()) || method == "trace" {
                    continue;
                }
                out.push(RawOp {
                    path,
                    method,
                    ptr: pointer::join(["paths", path.as_str(), method.as_str()]),
                    node,
                });
            }
        }
        out
    }

    fn resolve(&self, ptr: &str) -> Option<(String, &'a Value)> {
        let resolved = pointer::follow_refs(self.tree, ptr)?;
        let node = self.tree.pointer(&resolved)?;
        Some((resolved, node))
    }

    /// Path-level then operation-level parameters; operation entries override by (name, in).
    fn params(&self, op: &RawOp<'a>) -> Vec<RawParam<'a>> {
        let item_ptr = pointer::join(["paths", op.path]);
        let mut out: Vec<RawParam<'a>> = Vec::new();
        for base in [item_ptr, op.ptr.clone()] {
            let list_ptr = pointer::child(&base, "parameters");
            let Some(list) = self.tree.pointer(&list_ptr).and_then(Value::as_array) else { continue };
            for (i, entry) in list.iter().enumerate() {
                let entry_ptr = pointer::child(&list_ptr, &i.to_string());
                let Some((resolved_ptr, node)) = self.resolve(&entry_ptr) else { continue };
                let key = |n: &Value| {
                    (
                        n.get("name").and_then(Value::as_str).map(str::to_string),
                        n.get("in").and_then(Value::as_str).map(str::to_string),
                    )
                };
                out.retain(|p| key(p.node) != key(node));
                out.push(RawParam {
                    resolved_ptr,
                    entry,
                    node,
                });
            }
        }
        out
    }
}

/// Lints a contract. `contract` is the flattened form of `raw`.
pub fn lint(contract: &FlattenedContract, raw: &RawDocument, rules: &Rules) -> Vec<LintFinding> {
    let view = View {
        tree: &raw.tree,
        dialect: raw.dialect,
    };
    let rule = rules.for_title(&raw.title());
    let mut findings = Vec::new();
    lint_security_schemes(&view, &rule, &mut findings);
    lint_base_url(&view, &rule, &mut findings);
    lint_headers(&view, contract, &rule, &mut findings);
    lint_param_types(&view, &rule, &mut findings);
    lint_endpoint_auth(&view, &mut findings);
    for f in &mut findings {
        if let Some(p) = &mut f.patch {
            match apply_patch(raw, p) {
                Ok(applied) => p.loc_changed = applied.loc_changed,
                Err(_) => f.patch = None,
            }
        }
    }
    findings
}

/// Normalizes and flattens `raw`, then lints it.
pub fn lint_document(raw: &RawDocument, rules: &Rules) -> Result<Vec<LintFinding>, RefError> {
    let contract = flatten(&normalize(raw))?;
    Ok(lint(&contract, raw, rules))
}

// ---------------------------------------------------------------- class A

fn requirement_sites<'a>(view: &View<'a>) -> Vec<(String, &'a Value)> {
    let mut sites = Vec::new();
    if let Some(s) = view.tree.get("security") {
        sites.push(("/security".to_string(), s));
    }
    for op in view.operations() {
        if let Some(s) = op.node.get("security") {
            sites.push((pointer::child(&op.ptr, "security"), s));
        }
    }
    sites
}

fn infer_scheme(name: &str, dialect: Dialect) -> Value {
    let lower = name.to_ascii_lowercase();
    match dialect {
        Dialect::OpenApi3 if lower.contains("basic") => json!({"type": "http", "scheme": "basic"}),
        Dialect::OpenApi2 if lower.contains("basic") => json!({"type": "basic"}),
        _ if lower.contains("key") => json!({"type": "apiKey", "in": "header", "name": name}),
        Dialect::OpenApi3 => json!({"type": "http", "scheme": "bearer"}),
        Dialect::OpenApi2 => json!({"type": "apiKey", "in": "header", "name": "Authorization"}),
    }
}

/// Token endpoint next to an authorization endpoint.
pub fn derive_token_url(authorization_url: &str, rule: &VendorRule) -> Option<String> {
    if let Some(t) = &rule.token_url {
        return Some(t.clone());
    }
    let mut url = Url::parse(authorization_url).ok()?;
    let path = url.path().trim_end_matches('/').to_string();
    let new_path = match path.rsplit_once('/') {
        Some((head, "authorize" | "authorization" | "auth")) => format!("{head}/token"),
        _ => "/oauth/token".to_string(),
    };
    url.set_path(&new_path);
    url.set_query(None);
    Some(url.to_string())
}

fn lint_security_schemes(view: &View<'_>, rule: &VendorRule, out: &mut Vec<LintFinding>) {
    let declared = view.schemes();
    let mut reported: BTreeSet<String> = BTreeSet::new();
    for (site, stanza) in requirement_sites(view) {
        for set in crate::security::requirement_sets(stanza) {
            for name in set {
                if declared.is_some_and(|d| d.contains_key(&name)) || !reported.insert(name.clone()) {
                    continue;
                }
                let value = rule
                    .schemes
                    .get(&name)
                    .cloned()
                    .unwrap_or_else(|| infer_scheme(&name, view.dialect));
                out.push(
                    LintFinding::new(
                        FailureClass::A,
                        site.clone(),
                        format!("security requirement names `{name}` but no such scheme is declared"),
                    )
                    .with_edits(vec![Edit::add(view.scheme_ptr(&name), value)]),
                );
            }
        }
    }
    let Some(declared) = declared else { return };
    for (id, spec) in declared {
        let ptr = view.scheme_ptr(id);
        let ty = spec.get("type").and_then(Value::as_str).unwrap_or("");
        match (view.dialect, ty) {
            (_, "apiKey") => {
                let name_ok = spec.get("name").and_then(Value::as_str).is_some_and(|n| !n.is_empty());
                let in_ok = matches!(spec.get("in").and_then(Value::as_str), Some("header" | "query" | "cookie"));
                if !name_ok || !in_ok {
                    out.push(LintFinding::new(
                        FailureClass::A,
                        ptr,
                        format!("apiKey scheme `{id}` needs both `name` and `in` (header, query or cookie)"),
                    ));
                }
            }
            (Dialect::OpenApi3, "http") => {
                let scheme = spec.get("scheme").and_then(Value::as_str).unwrap_or("").to_ascii_lowercase();
                if scheme != "basic" && scheme != "bearer" {
                    out.push(LintFinding::new(
                        FailureClass::A,
                        pointer::child(&ptr, "scheme"),
                        format!("http scheme `{id}` uses unsupported auth scheme {scheme:?}"),
                    ));
                }
            }
            (Dialect::OpenApi2, "basic") => {}
            (_, "oauth2") => lint_oauth(view, id, spec, &ptr, rule, out),
            (dialect, other) => out.push(fix_scheme_type(dialect, id, other, &ptr)),
        }
    }
}

fn fix_scheme_type(dialect: Dialect, id: &str, ty: &str, ptr: &str) -> LintFinding {
    let finding = LintFinding::new(
        FailureClass::A,
        pointer::child(ptr, "type"),
        format!("security scheme `{id}` has unrecognized type {ty:?}"),
    );
    let type_ptr = pointer::child(ptr, "type");
    let lower = ty.to_ascii_lowercase();
    let edits = match (dialect, lower.as_str()) {
        (_, "apikey" | "api_key") => vec![Edit::add(type_ptr, json!("apiKey"))],
        (_, "oauth2" | "oauth") => vec![Edit::add(type_ptr, json!("oauth2"))],
        (Dialect::OpenApi3, "http") => vec![Edit::add(type_ptr, json!("http"))],
        (Dialect::OpenApi3, "basic" | "bearer") => vec![
            Edit::add(type_ptr, json!("http")),
            Edit::add(pointer::child(ptr, "scheme"), json!(lower)),
        ],
        (Dialect::OpenApi2, "basic") => vec![Edit::add(type_ptr, json!("basic"))],
        _ => vec![],
    };
    finding.with_edits(edits)
}

fn lint_oauth(view: &View<'_>, id: &str, spec: &Value, ptr: &str, rule: &VendorRule, out: &mut Vec<LintFinding>) {
    let s = |v: &Value, k: &str| v.get(k).and_then(Value::as_str).filter(|x| !x.is_empty()).map(str::to_string);
    match view.dialect {
        Dialect::OpenApi3 => {
            let flows_ptr = pointer::child(ptr, "flows");
            let Some(flows) = spec.get("flows").and_then(Value::as_object) else {
                out.push(LintFinding::new(FailureClass::A, ptr, format!("oauth2 scheme `{id}` declares no flows")));
                return;
            };
            if let Some(code) = flows.get("authorizationCode") {
                let code_ptr = pointer::child(&flows_ptr, "authorizationCode");
                if s(code, "tokenUrl").is_none() {
                    let edits = s(code, "authorizationUrl")
                        .and_then(|a| derive_token_url(&a, rule))
                        .map(|t| vec![Edit::add(pointer::child(&code_ptr, "tokenUrl"), json!(t))])
                        .unwrap_or_default();
                    out.push(
                        LintFinding::new(
                            FailureClass::A,
                            code_ptr,
                            format!("authorizationCode flow of `{id}` is missing the mandatory tokenUrl"),
                        )
                        .with_edits(edits),
                    );
                }
                return;
            }
            if let Some(cc) = flows.get("clientCredentials") {
                if s(cc, "tokenUrl").is_none() {
                    let cc_ptr = pointer::child(&flows_ptr, "clientCredentials");
                    let edits = rule
                        .token_url
                        .as_ref()
                        .map(|t| vec![Edit::add(pointer::child(&cc_ptr, "tokenUrl"), json!(t))])
                        .unwrap_or_default();
                    out.push(
                        LintFinding::new(FailureClass::A, cc_ptr, format!("clientCredentials flow of `{id}` has no tokenUrl"))
                            .with_edits(edits),
                    );
                }
                return;
            }
            let mut finding = LintFinding::new(
                FailureClass::A,
                flows_ptr.clone(),
                format!(
                    "oauth2 scheme `{id}` only declares {} flow(s), which cannot be automated",
                    flows.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            );
            if let Some(implicit) = flows.get("implicit") {
                if let Some(auth) = s(implicit, "authorizationUrl") {
                    if let Some(token) = derive_token_url(&auth, rule) {
                        let scopes = implicit.get("scopes").cloned().unwrap_or_else(|| json!({}));
                        finding = finding.with_edits(vec![Edit::add(
                            pointer::child(&flows_ptr, "authorizationCode"),
                            json!({"authorizationUrl": auth, "tokenUrl": token, "scopes": scopes}),
                        )]);
                    }
                }
            }
            out.push(finding);
        }
        Dialect::OpenApi2 => {
            let flow = spec.get("flow").and_then(Value::as_str).unwrap_or("");
            let has_token = s(spec, "tokenUrl").is_some();
            let token_ptr = pointer::child(ptr, "tokenUrl");
            let derived = || s(spec, "authorizationUrl").and_then(|a| derive_token_url(&a, rule));
            let (message, edits) = match flow {
                "accessCode" if !has_token => (
                    "accessCode flow is missing the mandatory tokenUrl",
                    derived().map(|t| vec![Edit::add(token_ptr, json!(t))]).unwrap_or_default(),
                ),
                "implicit" => (
                    "implicit flow cannot be automated",
                    derived()
                        .map(|t| {
                            let mut e = vec![Edit::add(pointer::child(ptr, "flow"), json!("accessCode"))];
                            if !has_token {
                                e.push(Edit::add(token_ptr, json!(t)));
                            }
                            e
                        })
                        .unwrap_or_default(),
                ),
                "application" if !has_token => (
                    "application flow has no tokenUrl",
                    rule.token_url.as_ref().map(|t| vec![Edit::add(token_ptr, json!(t))]).unwrap_or_default(),
                ),
                "accessCode" | "application" => return,
                _ => ("oauth2 flow cannot be automated", vec![]),
            };
            out.push(LintFinding::new(FailureClass::A, ptr, format!("`{id}`: {message}")).with_edits(edits));
        }
    }
}

// ---------------------------------------------------------------- class B

fn lint_base_url(view: &View<'_>, rule: &VendorRule, out: &mut Vec<LintFinding>) {
    let Err(err) = base_url_from_tree(view.tree, view.dialect) else { return };
    let replacement = rule.base_url.as_deref().and_then(|u| BaseUrl::parse(u).ok());
    match view.dialect {
        Dialect::OpenApi3 => {
            let server = view.tree.pointer("/servers/0");
            let mut edits = Vec::new();
            if let Some(server) = server {
                edits = default_from_enum(server);
                if edits.is_empty() {
                    if let Some(r) = &replacement {
                        edits.push(Edit::replace("/servers/0/url", json!(r.as_str())));
                    }
                }
            } else if let Some(r) = &replacement {
                edits.push(Edit::add("/servers", json!([{"url": r.as_str()}])));
            }
            out.push(LintFinding::new(FailureClass::B, "/servers/0/url", err.to_string()).with_edits(edits));
        }
        Dialect::OpenApi2 => {
            let mut edits = Vec::new();
            if let Some(r) = replacement.as_ref().and_then(|r| Url::parse(r.as_str()).ok()) {
                let host = match r.port() {
                    Some(p) => format!("{}:{p}", r.host_str().unwrap_or_default()),
                    None => r.host_str().unwrap_or_default().to_string(),
                };
                edits.push(Edit::add("/host", json!(host)));
                let schemes: Vec<&str> = view
                    .tree
                    .get("schemes")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().filter_map(Value::as_str).collect())
                    .unwrap_or_default();
                if !schemes.contains(&r.scheme()) && !(schemes.is_empty() && r.scheme() == "https") {
                    edits.push(Edit::add("/schemes", json!([r.scheme()])));
                }
                let path = r.path().trim_end_matches('/');
                if !path.is_empty() && view.tree.get("basePath").and_then(Value::as_str) != Some(path) {
                    edits.push(Edit::add("/basePath", json!(path)));
                }
            }
            out.push(LintFinding::new(FailureClass::B, "/host", err.to_string()).with_edits(edits));
        }
    }
}

/// Adds `default: enum[0]` for server variables that lack a default but list options.
fn default_from_enum(server: &Value) -> Vec<Edit> {
    let url = server.get("url").and_then(Value::as_str).unwrap_or("");
    let vars = crate::ingest::template_vars(url);
    if vars.is_empty() {
        return vec![];
    }
    let mut edits = Vec::new();
    let mut substituted = url.to_string();
    for v in vars {
        let decl = server.get("variables").and_then(|vs| vs.get(&v));
        let default = decl.and_then(|d| d.get("default")).and_then(Value::as_str).map(str::to_string);
        let value = match default {
            Some(d) => d,
            None => match decl.and_then(|d| d.get("enum")).and_then(Value::as_array).and_then(|e| e.first()).and_then(Value::as_str) {
                Some(first) => {
                    edits.push(Edit::add(pointer::join(["servers", "0", "variables", v.as_str(), "default"]), json!(first)));
                    first.to_string()
                }
                None => return vec![],
            },
        };
        substituted = substituted.replace(&format!("{{{v}}}"), &value);
    }
    if BaseUrl::parse(&substituted).is_ok() {
        edits
    } else {
        vec![]
    }
}

// ---------------------------------------------------------------- class C

fn lint_headers(view: &View<'_>, contract: &FlattenedContract, rule: &VendorRule, out: &mut Vec<LintFinding>) {
    if rule.headers.is_empty() {
        return;
    }
    let declared_everywhere = |header: &str| {
        let ops = view.operations();
        !ops.is_empty()
            && ops.iter().all(|op| {
                view.params(op).iter().any(|p| {
                    p.node.get("in").and_then(Value::as_str) == Some("header")
                        && p.node.get("name").and_then(Value::as_str).is_some_and(|n| n.eq_ignore_ascii_case(header))
                })
            })
    };
    let missing: BTreeMap<&String, &String> = rule.headers.iter().filter(|(k, _)| !declared_everywhere(k)).collect();
    if missing.is_empty() {
        return;
    }
    let names: Vec<&str> = missing.keys().map(|k| k.as_str()).collect();
    let value = serde_json::to_string(&missing).expect("string map");
    let mut f = LintFinding::new(
        FailureClass::C,
        "",
        format!(
            "{} requires header(s) {} on every request, which the contract does not declare",
            crate::ingest::api_title(&contract.tree),
            names.join(", ")
        ),
    );
    f.suggestion = Some(format!("{}={value}", crate::security::EXTRA_HEADERS));
    out.push(f);
}

// ---------------------------------------------------------------- class D

fn is_id_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower == "id" || lower.ends_with("_id")
}

fn non_numeric_string(v: &Value) -> bool {
    matches!(v, Value::String(s) if s.trim().parse::<f64>().is_err())
}

fn lint_param_types(view: &View<'_>, rule: &VendorRule, out: &mut Vec<LintFinding>) {
    let mut seen: HashSet<String> = HashSet::new();
    for op in view.operations() {
        for p in view.params(&op) {
            if p.node.get("in").and_then(Value::as_str) != Some("path") {
                continue;
            }
            let name = p.node.get("name").and_then(Value::as_str).unwrap_or("");
            let forced = rule.string_params.iter().any(|s| s.eq_ignore_ascii_case(name));
            if !forced && !is_id_name(name) {
                continue;
            }
            let (type_holder, schema_node) = match view.dialect {
                Dialect::OpenApi2 => (Some(p.resolved_ptr.clone()), Some(p.node)),
                Dialect::OpenApi3 => match view.resolve(&pointer::child(&p.resolved_ptr, "schema")) {
                    Some((ptr, node)) => (Some(ptr), Some(node)),
                    None => (None, None),
                },
            };
            let (Some(type_holder), Some(schema_node)) = (type_holder, schema_node) else { continue };
            let ty = schema_node.get("type").and_then(Value::as_str).unwrap_or("");
            if ty != "integer" && ty != "number" {
                continue;
            }
            let mut examples: Vec<&Value> = Vec::new();
            examples.extend(p.node.get("example"));
            examples.extend(p.node.get("x-example"));
            examples.extend(schema_node.get("example"));
            if let Some(ex) = p.node.get("examples").and_then(Value::as_object) {
                examples.extend(ex.values().filter_map(|e| e.get("value")));
            }
            let contradicted = examples.iter().find(|e| non_numeric_string(e));
            if !forced && contradicted.is_none() {
                continue;
            }
            let type_ptr = pointer::child(&type_holder, "type");
            if !seen.insert(type_ptr.clone()) {
                continue;
            }
            let why = match contradicted {
                Some(e) => format!("its example {e} is not a number"),
                None => "the vendor rules list it as a string identifier".to_string(),
            };
            out.push(
                LintFinding::new(
                    FailureClass::D,
                    type_ptr.clone(),
                    format!("path parameter `{name}` is typed {ty} but {why}"),
                )
                .with_edits(vec![Edit::replace(type_ptr, json!("string"))]),
            );
        }
    }
}

// ---------------------------------------------------------------- class E

/// First literal path segment, used to group sibling operations.
fn path_group(path: &str) -> &str {
    path.split('/').find(|s| !s.is_empty() && !s.starts_with('{')).unwrap_or("")
}

enum Coverage {
    Stanza(Value),
    Param(Value),
}

fn lint_endpoint_auth(view: &View<'_>, out: &mut Vec<LintFinding>) {
    let declared = view.schemes();
    let api_key_slots: Vec<(String, String, String)> = declared
        .into_iter()
        .flatten()
        .filter(|(_, s)| s.get("type").and_then(Value::as_str) == Some("apiKey"))
        .filter_map(|(id, s)| {
            Some((
                id.clone(),
                s.get("name")?.as_str()?.to_string(),
                s.get("in")?.as_str()?.to_string(),
            ))
        })
        .collect();
    let doc_security = view.tree.get("security").filter(|s| s.as_array().is_some_and(|a| !a.is_empty()));
    let ops = view.operations();

    // per operation: how it is covered, or whether it is explicitly public
    let mut coverage: Vec<(Option<Coverage>, bool, Vec<String>)> = Vec::new();
    for op in &ops {
        let explicit_public = op.node.get("security").and_then(Value::as_array).is_some_and(|a| a.is_empty());
        let stanza = op.node.get("security").filter(|s| s.as_array().is_some_and(|a| !a.is_empty()));
        let mut schemes: Vec<String> = stanza
            .or(if explicit_public { None } else { doc_security })
            .map(|s| crate::security::requirement_sets(s).into_iter().flatten().collect())
            .unwrap_or_default();
        let mut cov = stanza.map(|s| Coverage::Stanza(s.clone()));
        for p in view.params(op) {
            let name = p.node.get("name").and_then(Value::as_str).unwrap_or("");
            let loc = p.node.get("in").and_then(Value::as_str).unwrap_or("");
            if let Some((id, _, _)) = api_key_slots.iter().find(|(_, n, l)| n.eq_ignore_ascii_case(name) && l == loc) {
                schemes.push(id.clone());
                if cov.is_none() {
                    cov = Some(Coverage::Param(p.entry.clone()));
                }
            }
        }
        if cov.is_none() && !schemes.is_empty() {
            // covered by the document-level default; nothing to copy
            cov = Some(Coverage::Stanza(Value::Null));
        }
        coverage.push((cov, explicit_public, schemes));
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, op) in ops.iter().enumerate() {
        groups.entry(path_group(op.path)).or_default().push(i);
    }
    let mut uncovered: Vec<(usize, usize)> = Vec::new();
    for members in groups.values() {
        let Some(&source) = members.iter().find(|&&i| coverage[i].0.is_some()) else { continue };
        for &i in members {
            if coverage[i].0.is_none() && !coverage[i].1 {
                uncovered.push((i, source));
            }
        }
    }
    uncovered.sort_unstable();
    for (i, source) in uncovered {
        let op = &ops[i];
        let src = &ops[source];
        let schemes: Vec<String> = coverage[source].2.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let edits = match &coverage[source].0 {
            Some(Coverage::Stanza(s)) if !s.is_null() => vec![Edit::add(pointer::child(&op.ptr, "security"), s.clone())],
            Some(Coverage::Param(entry)) => {
                if op.node.get("parameters").and_then(Value::as_array).is_some() {
                    vec![Edit::add(format!("{}/parameters/0", op.ptr), entry.clone())]
                } else {
                    vec![Edit::add(pointer::child(&op.ptr, "parameters"), json!([entry]))]
                }
            }
            _ => vec![],
        };
        out.push(
            LintFinding::new(
                FailureClass::E,
                op.ptr.clone(),
                format!(
                    "{} {} has no auth requirement while {} {} in the same group uses {}",
                    op.method.to_ascii_uppercase(),
                    op.path,
                    src.method.to_ascii_uppercase(),
                    src.path,
                    schemes.join(" + ")
                ),
            )
            .with_edits(edits),
        );
    }
}

// ---------------------------------------------------------------- fix loop

pub const DEFAULT_FIX_CAP: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FixReport {
    pub iterations: usize,
    /// Findings that were patched, by class.
    pub findings: BTreeMap<FailureClass, Vec<LintFinding>>,
    pub loc_changed: BTreeMap<FailureClass, usize>,
    pub loc_changed_total: usize,
    /// Class C advisories; their fix belongs in `.env`.
    pub residual_advisories: Vec<LintFinding>,
    /// Findings no patch exists for.
    pub residual: Vec<LintFinding>,
}

impl FixReport {
    /// `.env` lines suggested by the advisories.
    pub fn suggestions(&self) -> Vec<String> {
        self.residual_advisories.iter().filter_map(|f| f.suggestion.clone()).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.residual.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct FixOutcome {
    pub document: RawDocument,
    /// Unified diff of the whole repair against the original text.
    pub diff: String,
    pub report: FixReport,
}

#[derive(Debug, Error)]
pub enum FixError {
    #[error(transparent)]
    Ref(#[from] RefError),
    #[error(transparent)]
    Pointer(#[from] PointerError),
    #[error("findings remain after {cap} fix iterations: {}", .remaining.iter().map(|f| format!("[{}] {}", f.class, f.message)).collect::<Vec<_>>().join("; "))]
    NonConvergence {
        cap: usize,
        remaining: Vec<LintFinding>,
        report: Box<FixReport>,
    },
}

/// Lint, patch, re-lint until nothing patchable is left or `cap` rounds ran.
pub fn fix_loop(raw: &RawDocument, rules: &Rules, cap: usize) -> Result<FixOutcome, FixError> {
    let mut current = raw.clone();
    let mut report = FixReport::default();
    loop {
        let findings = lint_document(&current, rules)?;
        let (patchable, rest): (Vec<_>, Vec<_>) = findings.into_iter().partition(LintFinding::is_patchable);
        if patchable.is_empty() {
            let (advisories, residual): (Vec<_>, Vec<_>) = rest.into_iter().partition(|f| f.class == FailureClass::C);
            report.residual_advisories = advisories;
            report.residual = residual;
            break;
        }
        if report.iterations >= cap {
            return Err(FixError::NonConvergence {
                cap,
                remaining: patchable,
                report: Box::new(report),
            });
        }
        report.iterations += 1;
        for class in FailureClass::ALL {
            let of_class: Vec<&LintFinding> = patchable.iter().filter(|f| f.class == class).collect();
            if of_class.is_empty() {
                continue;
            }
            let edits: Vec<Edit> = of_class
                .iter()
                .flat_map(|f| f.patch.as_ref().map(|p| p.edits.clone()).unwrap_or_default())
                .collect();
            let applied = apply_patch(&current, &Patch { edits, loc_changed: 0 })?;
            *report.loc_changed.entry(class).or_default() += applied.loc_changed;
            report
                .findings
                .entry(class)
                .or_default()
                .extend(of_class.into_iter().cloned());
            current = applied.document;
        }
    }
    let name = raw
        .source_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "spec".into());
    let (diff, total) = unified_diff(&raw.text, &current.text, &name);
    report.loc_changed_total = total;
    Ok(FixOutcome {
        document: current,
        diff,
        report,
    })
}

#[cfg(test)]
mod tests;
