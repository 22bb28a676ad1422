//! Random manifests for the sampling properties and the brute-force cover oracle.

use std::collections::BTreeSet;

use automcp::compiler::ParamLocation;
use automcp::harness::Axes;
use automcp::{ToolManifest, ToolSpec};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

const GROUPS: [&str; 6] = ["/users", "/repos", "/v1/cards", "/api/boards", "/rest/v2/lists", "/"];
const METHODS: [&str; 5] = ["get", "post", "put", "patch", "delete"];
const SCHEMES: [&str; 5] = ["key", "basic", "bearer", "oauth", "public"];
const LOCATIONS: [&str; 3] = ["query", "header", "cookie"];

#[derive(Debug, Clone)]
struct Op {
    group: usize,
    item: bool,
    tail: Option<String>,
    method: usize,
    security: Vec<usize>,
    params: Vec<usize>,
    body: bool,
}

fn op() -> impl Strategy<Value = Op> {
    (
        0..GROUPS.len(),
        any::<bool>(),
        prop::option::of("[a-z]{1,5}"),
        0..METHODS.len(),
        prop::collection::vec(0..SCHEMES.len(), 0..3),
        prop::collection::vec(0..LOCATIONS.len(), 0..3),
        any::<bool>(),
    )
        .prop_map(|(group, item, tail, method, security, params, body)| Op { group, item, tail, method, security, params, body })
}

/// An OpenAPI 3 document of 1..=max_ops operations spread over a few resource groups.
pub fn manifest_doc(max_ops: usize) -> impl Strategy<Value = Value> {
    prop::collection::vec(op(), 1..=max_ops).prop_map(|ops| {
        let mut paths: Map<String, Value> = Map::new();
        for o in ops {
            let mut path = GROUPS[o.group].trim_end_matches('/').to_string();
            if o.item {
                path.push_str("/{id}");
            }
            if let Some(t) = &o.tail {
                path.push('/');
                path.push_str(t);
            }
            if path.is_empty() {
                path.push('/');
            }
            let item = paths.entry(path).or_insert_with(|| json!({}));
            let method = METHODS[o.method];
            if item.get(method).is_some() {
                continue;
            }
            let mut params: Vec<Value> = Vec::new();
            if o.item {
                params.push(json!({"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}));
            }
            for (i, loc) in o.params.iter().enumerate() {
                params.push(json!({"name": format!("p{i}"), "in": LOCATIONS[*loc], "schema": {"type": "string"}}));
            }
            let security: Vec<Value> = if o.security.contains(&4) {
                vec![]
            } else {
                o.security.iter().map(|s| json!({ SCHEMES[*s]: [] })).collect()
            };
            let mut op = json!({"parameters": params, "security": security, "responses": {"200": {"description": "ok"}}});
            if o.body {
                op["requestBody"] = json!({"content": {"application/json": {"schema": {"type": "object"}}}});
            }
            item[method] = op;
        }
        json!({
            "openapi": "3.0.3",
            "info": {"title": "Sample", "version": "1"},
            "servers": [{"url": "https://x.example"}],
            "paths": paths,
            "components": {"securitySchemes": {
                "key": {"type": "apiKey", "in": "header", "name": "X-Key"},
                "basic": {"type": "http", "scheme": "basic"},
                "bearer": {"type": "http", "scheme": "bearer"},
                "oauth": {"type": "oauth2", "flows": {"clientCredentials": {"tokenUrl": "https://x.example/token", "scopes": {}}}},
            }},
        })
    })
}

/// Axis values of one tool, computed from the endpoint without the sampler's helpers.
pub fn axes_of(manifest: &ToolManifest, tool: &ToolSpec) -> Axes {
    let ep = &tool.endpoint;
    let mut auth: BTreeSet<String> = BTreeSet::new();
    for id in ep.security.iter().flatten() {
        let scheme = manifest.schemes.iter().find(|s| &s.id == id).unwrap();
        auth.insert(scheme.kind_label().to_string());
    }
    if auth.is_empty() {
        auth.insert("none".into());
    }
    let mut modalities: BTreeSet<String> = ep
        .parameters
        .iter()
        .map(|p| match p.location {
            ParamLocation::Path => "path".to_string(),
            ParamLocation::Query => "query".into(),
            ParamLocation::Header => "header".into(),
            ParamLocation::Cookie => "cookie".into(),
        })
        .collect();
    if ep.request_body.is_some() {
        modalities.insert("body".into());
    }
    if modalities.is_empty() {
        modalities.insert("none".into());
    }
    Axes {
        verbs: BTreeSet::from([ep.method.as_str().to_string()]),
        auth,
        modalities,
    }
}

pub fn union(axes: &[&Axes]) -> Axes {
    let mut u = Axes::default();
    for a in axes {
        u.verbs.extend(a.verbs.iter().cloned());
        u.auth.extend(a.auth.iter().cloned());
        u.modalities.extend(a.modalities.iter().cloned());
    }
    u
}

/// Random endpoint axes drawn from small universes so covers are non-trivial.
pub fn axes_group(max: usize) -> impl Strategy<Value = Vec<Axes>> {
    let one = (
        prop::collection::btree_set(prop::sample::select(vec!["GET", "POST", "PUT", "DELETE"]), 1..=1),
        prop::collection::btree_set(prop::sample::select(vec!["none", "api_key", "http_basic", "oauth2"]), 1..=2),
        prop::collection::btree_set(prop::sample::select(vec!["path", "query", "header", "cookie", "body"]), 1..=3),
    )
        .prop_map(|(v, a, m)| Axes {
            verbs: v.into_iter().map(String::from).collect(),
            auth: a.into_iter().map(String::from).collect(),
            modalities: m.into_iter().map(String::from).collect(),
        });
    prop::collection::vec(one, 1..=max)
}

/// Size of the smallest subset whose union equals the union of all `axes`.
pub fn brute_force_min_cover(axes: &[Axes]) -> usize {
    let all: Vec<&Axes> = axes.iter().collect();
    let target = union(&all);
    (1u32..(1 << axes.len()))
        .filter(|mask| {
            let chosen: Vec<&Axes> = (0..axes.len()).filter(|i| mask & (1 << i) != 0).map(|i| &axes[i]).collect();
            union(&chosen) == target
        })
        .map(u32::count_ones)
        .min()
        .unwrap_or(0) as usize
}
