//! Compilation of flattened contracts into MCP tool manifests.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ident;
use crate::ingest::{api_title, template_vars, BaseUrl};
use crate::pointer;
use crate::refs::FlattenedContract;
use crate::security::{requirement_sets, ApiKeyLocation, SchemeKind, SecurityScheme};

pub const MAX_TOOL_NAME: usize = 64;
pub const BODY_KEY: &str = "body";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
    Put,
    Patch,
    Delete,
    Head,
    Options,
}

impl HttpMethod {
    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "get" => Self::Get,
            "post" => Self::Post,
            "put" => Self::Put,
            "patch" => Self::Patch,
            "delete" => Self::Delete,
            "head" => Self::Head,
            "options" => Self::Options,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Get => "GET",
            Self::Post => "POST",
            Self::Put => "PUT",
            Self::Patch => "PATCH",
            Self::Delete => "DELETE",
            Self::Head => "HEAD",
            Self::Options => "OPTIONS",
        }
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamLocation {
    Path,
    Query,
    Header,
    Cookie,
}

impl ParamLocation {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "path" => Self::Path,
            "query" => Self::Query,
            "header" => Self::Header,
            "cookie" => Self::Cookie,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub location: ParamLocation,
    pub required: bool,
    pub schema: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<Value>,
    pub sanitized_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestBody {
    pub media_type: String,
    pub required: bool,
    /// Schema advertised for the `body` argument; a raw string unless JSON or a url-encoded object.
    pub schema: Value,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointDescriptor {
    pub method: HttpMethod,
    pub path_template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub parameters: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_body: Option<RequestBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_schema: Option<Value>,
    pub success_status: u16,
    /// Alternatives (OR) of scheme-id sets (AND).
    pub security: Vec<Vec<String>>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub deprecated: bool,
}

impl EndpointDescriptor {
    pub fn label(&self) -> String {
        format!("{} {}", self.method, self.path_template)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub input_schema: Value,
    pub output_schema: Value,
    pub endpoint: EndpointDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolManifest {
    pub api_title: String,
    pub base_url: BaseUrl,
    pub schemes: Vec<SecurityScheme>,
    pub tools: Vec<ToolSpec>,
}

impl ToolManifest {
    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn scheme(&self, id: &str) -> Option<&SecurityScheme> {
        self.schemes.iter().find(|s| s.id == id)
    }

    /// The `tools/list` result shape: `{"tools": [{name, description, inputSchema}]}`.
    pub fn tools_list(&self) -> Value {
        let tools: Vec<Value> = self
            .tools
            .iter()
            .map(|t| json!({"name": t.name, "description": t.description, "inputSchema": t.input_schema}))
            .collect();
        json!({ "tools": tools })
    }

    /// `tools_list` plus the API title and base URL under `_meta`; written by `generate`.
    pub fn to_manifest_json(&self) -> Value {
        let mut v = self.tools_list();
        v["_meta"] = json!({"apiTitle": self.api_title, "baseUrl": self.base_url});
        v
    }
}

fn credential_slot<'a>(schemes: &'a [SecurityScheme], name: &str, location: ParamLocation) -> Option<&'a str> {
    schemes.iter().find_map(|s| match &s.kind {
        SchemeKind::ApiKey {
            location: loc,
            parameter_name,
        } if parameter_name.eq_ignore_ascii_case(name)
            && matches!(
                (loc, location),
                (ApiKeyLocation::Header, ParamLocation::Header)
                    | (ApiKeyLocation::Query, ParamLocation::Query)
                    | (ApiKeyLocation::Cookie, ParamLocation::Cookie)
            ) =>
        {
            Some(s.id.as_str())
        }
        _ => None,
    })
}

fn parse_param(p: &Value) -> Option<ParamSpec> {
    let name = p.get("name")?.as_str().filter(|n| !n.is_empty())?.to_string();
    let location = ParamLocation::parse(p.get("in")?.as_str()?)?;
    let mut schema = p
        .get("schema")
        .cloned()
        .or_else(|| {
            // content-based parameters carry their schema one level down
            p.get("content")?.as_object()?.values().next()?.get("schema").cloned()
        })
        .unwrap_or_else(|| json!({"type": "string"}));
    if !schema.is_object() {
        schema = json!({});
    }
    let example = p
        .get("example")
        .cloned()
        .or_else(|| p.get("examples")?.as_object()?.values().next()?.get("value").cloned());
    Some(ParamSpec {
        required: location == ParamLocation::Path || p.get("required").and_then(Value::as_bool).unwrap_or(false),
        description: p.get("description").and_then(Value::as_str).map(str::to_string),
        name,
        location,
        schema,
        example,
        sanitized_name: String::new(),
    })
}

fn is_json_media(media: &str) -> bool {
    let base = media.split(';').next().unwrap_or("").trim();
    base == "application/json" || base.ends_with("+json") || base == "*/*"
}

fn pick_media(content: &Map<String, Value>) -> Option<(&String, &Value)> {
    content
        .iter()
        .find(|(m, _)| m.split(';').next().unwrap_or("").trim() == "application/json")
        .or_else(|| content.iter().next())
}

fn parse_body(op: &Value) -> Option<RequestBody> {
    let rb = op.get("requestBody")?;
    let content = rb.get("content")?.as_object()?;
    let (media, entry) = pick_media(content)?;
    let json = is_json_media(media);
    let declared = entry.get("schema").cloned().filter(Value::is_object);
    let form_object = media.split(';').next().unwrap_or("").trim() == "application/x-www-form-urlencoded"
        && declared.as_ref().is_some_and(|s| s.get("properties").is_some());
    let schema = if json {
        declared.unwrap_or_else(|| json!({}))
    } else if form_object {
        declared.expect("checked")
    } else {
        json!({"type": "string", "description": format!("Raw {media} payload")})
    };
    Some(RequestBody {
        media_type: if media == "*/*" { "application/json".into() } else { media.clone() },
        required: rb.get("required").and_then(Value::as_bool).unwrap_or(false),
        schema,
        json,
    })
}

fn success_response(op: &Value) -> (u16, Option<Value>) {
    let Some(responses) = op.get("responses").and_then(Value::as_object) else {
        return (200, None);
    };
    let best = responses
        .iter()
        .filter_map(|(code, r)| code.parse::<u16>().ok().filter(|c| (200..300).contains(c)).map(|c| (c, r)))
        .min_by_key(|(c, _)| *c);
    match best {
        Some((code, r)) => {
            let schema = r
                .get("content")
                .and_then(Value::as_object)
                .and_then(pick_media)
                .and_then(|(_, e)| e.get("schema").cloned());
            (code, schema)
        }
        None => (200, None),
    }
}

/// One descriptor per path-method pair, in document order.
pub fn list_endpoints(contract: &FlattenedContract, schemes: &[SecurityScheme]) -> Vec<EndpointDescriptor> {
    let tree = &contract.tree;
    let doc_security = tree.get("security").map(requirement_sets).unwrap_or_default();
    let mut out = Vec::new();
    let Some(paths) = tree.get("paths").and_then(Value::as_object) else {
        return out;
    };
    for (path, item) in paths {
        let path_params: Vec<ParamSpec> = item
            .get("parameters")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(parse_param)
            .collect();
        let Some(item_obj) = item.as_object() else { continue };
        for (key, op) in item_obj {
            let Some(method) = HttpMethod::from_key(key) else { continue };
            let mut params: Vec<ParamSpec> = Vec::new();
            let op_params: Vec<ParamSpec> = op
                .get("parameters")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(parse_param)
                .collect();
            for p in path_params.iter().chain(op_params.iter()) {
                // operation-level declarations win over path-level ones
                if let Some(existing) = params.iter_mut().find(|e| e.name == p.name && e.location == p.location) {
                    *existing = p.clone();
                } else {
                    params.push(p.clone());
                }
            }
            let mut security = match op.get("security") {
                Some(s) => requirement_sets(s),
                None => doc_security.clone(),
            };
            // parameters that duplicate an apiKey scheme are credentials, filled from the environment
            params.retain(|p| match credential_slot(schemes, &p.name, p.location) {
                Some(id) => {
                    if !security.iter().any(|set| set.iter().any(|s| s == id)) {
                        if security.is_empty() {
                            security.push(vec![id.to_string()]);
                        } else {
                            security.iter_mut().for_each(|set| set.push(id.to_string()));
                        }
                    }
                    false
                }
                None => true,
            });
            for var in template_vars(path) {
                if !params.iter().any(|p| p.location == ParamLocation::Path && p.name == var) {
                    params.push(ParamSpec {
                        name: var,
                        location: ParamLocation::Path,
                        required: true,
                        schema: json!({"type": "string"}),
                        description: None,
                        example: None,
                        sanitized_name: String::new(),
                    });
                }
            }
            let request_body = parse_body(op);
            assign_sanitized_names(&mut params, request_body.is_some());
            let (success_status, success_schema) = success_response(op);
            let text = |k: &str| op.get(k).and_then(Value::as_str).filter(|s| !s.is_empty()).map(str::to_string);
            out.push(EndpointDescriptor {
                method,
                path_template: path.clone(),
                operation_id: text("operationId"),
                summary: text("summary"),
                description: text("description"),
                parameters: params,
                request_body,
                success_schema,
                success_status,
                security,
                tags: op
                    .get("tags")
                    .and_then(Value::as_array)
                    .map(|t| t.iter().filter_map(Value::as_str).map(str::to_string).collect())
                    .unwrap_or_default(),
                deprecated: op.get("deprecated").and_then(Value::as_bool).unwrap_or(false),
            });
        }
    }
    out
}

fn assign_sanitized_names(params: &mut [ParamSpec], has_body: bool) {
    let mut taken: HashSet<String> = HashSet::new();
    if has_body {
        taken.insert(BODY_KEY.to_string());
    }
    for p in params.iter_mut() {
        let mut base = ident::snake(&p.name);
        if base.is_empty() {
            base = "param".into();
        }
        if base.starts_with(|c: char| c.is_ascii_digit()) {
            base = format!("_{base}");
        }
        let name = ident::unique(&base, usize::MAX, |c| taken.contains(c));
        taken.insert(name.clone());
        p.sanitized_name = name;
    }
}

/// Stable tool identifier: sanitized operationId, else `<method>_<path words>`.
pub fn derive_tool_name(ep: &EndpointDescriptor, taken: &HashSet<String>) -> String {
    let from_id = ep.operation_id.as_deref().map(ident::snake).filter(|s| !s.is_empty());
    let mut base = from_id.unwrap_or_else(|| {
        let words: Vec<String> = ep
            .path_template
            .split('/')
            .map(ident::snake)
            .filter(|w| !w.is_empty())
            .collect();
        let method = ep.method.as_str().to_ascii_lowercase();
        if words.is_empty() {
            format!("{method}_root")
        } else {
            format!("{method}_{}", words.join("_"))
        }
    });
    if base.starts_with(|c: char| c.is_ascii_digit()) {
        base = format!("op_{base}");
    }
    ident::unique(&base, MAX_TOOL_NAME, |c| taken.contains(c))
}

pub fn synthesize_input_schema(ep: &EndpointDescriptor) -> Value {
    let mut properties = Map::new();
    let mut required = Vec::new();
    for p in &ep.parameters {
        let mut schema = p.schema.clone();
        if let Some(obj) = schema.as_object_mut() {
            if let Some(d) = &p.description {
                obj.entry("description").or_insert_with(|| Value::String(d.clone()));
            }
            if let Some(ex) = &p.example {
                obj.entry("example").or_insert_with(|| ex.clone());
            }
        }
        properties.insert(p.sanitized_name.clone(), schema);
        if p.required {
            required.push(Value::String(p.sanitized_name.clone()));
        }
    }
    if let Some(body) = &ep.request_body {
        properties.insert(BODY_KEY.into(), body.schema.clone());
        if body.required {
            required.push(Value::String(BODY_KEY.into()));
        }
    }
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false,
    })
}

fn describe(ep: &EndpointDescriptor) -> String {
    let base = ep
        .summary
        .clone()
        .or_else(|| ep.description.clone())
        .unwrap_or_else(|| ep.label());
    if ep.deprecated {
        format!("[DEPRECATED] {base}")
    } else {
        base
    }
}

pub fn compile_manifest(contract: &FlattenedContract, schemes: &[SecurityScheme], base_url: BaseUrl) -> ToolManifest {
    let mut taken = HashSet::new();
    let tools = list_endpoints(contract, schemes)
        .into_iter()
        .map(|ep| {
            let name = derive_tool_name(&ep, &taken);
            taken.insert(name.clone());
            ToolSpec {
                description: describe(&ep),
                input_schema: synthesize_input_schema(&ep),
                output_schema: ep.success_schema.clone().unwrap_or_else(|| json!({})),
                name,
                endpoint: ep,
            }
        })
        .collect();
    ToolManifest {
        api_title: api_title(&contract.tree),
        base_url,
        schemes: schemes.to_vec(),
        tools,
    }
}

/// Number of compilable operations (supported methods) in a tree; used when a
/// contract fails before a manifest exists.
pub fn count_operations(tree: &Value) -> usize {
    tree.get("paths")
        .and_then(Value::as_object)
        .map(|paths| {
            paths
                .values()
                .filter_map(Value::as_object)
                .map(|item| item.keys().filter(|k| HttpMethod::from_key(k).is_some()).count())
                .sum()
        })
        .unwrap_or(0)
}

/// Pointer to an operation object inside a (raw or normalized) tree.
pub fn operation_pointer(path: &str, method: HttpMethod) -> String {
    pointer::join(["paths", path, &method.as_str().to_ascii_lowercase()])
}
