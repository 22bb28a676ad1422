//! Random `$ref` graphs over `components/schemas` and the single-step substitution oracle.

use proptest::prelude::*;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub struct Node {
    pub layer: usize,
    pub scalar: i64,
    /// (target index, sibling description on the ref object)
    pub refs: Vec<(usize, Option<String>)>,
    /// Whole node is a bare alias of its first ref.
    pub alias: bool,
}

pub const MAX_LAYERS: usize = 6;

/// A layered acyclic graph: refs only point to strictly deeper layers.
pub fn dag(max_nodes: usize) -> impl Strategy<Value = Vec<Node>> {
    prop::collection::vec((0..MAX_LAYERS, any::<i64>(), prop::collection::vec((any::<prop::sample::Index>(), prop::option::of("[a-z]{1,6}")), 0..3), prop::bool::weighted(0.15)), 1..=max_nodes)
        .prop_map(|raw| {
            let mut nodes: Vec<Node> = raw
                .into_iter()
                .map(|(layer, scalar, refs, alias)| Node {
                    layer,
                    scalar,
                    refs: refs.into_iter().map(|(i, d)| (i.index(usize::MAX), d)).collect(),
                    alias,
                })
                .collect();
            let layers: Vec<usize> = nodes.iter().map(|n| n.layer).collect();
            for n in &mut nodes {
                let deeper: Vec<usize> = (0..layers.len()).filter(|&j| layers[j] > n.layer).collect();
                n.refs = if deeper.is_empty() {
                    Vec::new()
                } else {
                    n.refs.iter().map(|(i, d)| (deeper[i % deeper.len()], d.clone())).collect()
                };
                n.alias &= !n.refs.is_empty();
            }
            nodes
        })
}

/// Any directed graph, cycles and self-references included.
pub fn graph(max_nodes: usize) -> impl Strategy<Value = Vec<Node>> {
    prop::collection::vec((any::<i64>(), prop::collection::vec(any::<prop::sample::Index>(), 0..3)), 1..=max_nodes).prop_map(|raw| {
        let n = raw.len();
        raw.into_iter()
            .map(|(scalar, refs)| Node {
                layer: 0,
                scalar,
                refs: refs.into_iter().map(|i| (i.index(n), None)).collect(),
                alias: false,
            })
            .collect()
    })
}

fn reference(i: usize, description: &Option<String>) -> Value {
    let mut m = Map::new();
    m.insert("$ref".into(), json!(format!("#/components/schemas/N{i}")));
    if let Some(d) = description {
        m.insert("description".into(), json!(d));
    }
    Value::Object(m)
}

pub fn document(nodes: &[Node]) -> Value {
    let mut schemas = Map::new();
    for (i, n) in nodes.iter().enumerate() {
        let body = if n.alias {
            reference(n.refs[0].0, &n.refs[0].1)
        } else {
            let mut props = Map::new();
            props.insert("v".into(), json!({"type": "integer", "example": n.scalar}));
            for (k, (target, d)) in n.refs.iter().enumerate() {
                props.insert(format!("r{k}"), reference(*target, d));
            }
            json!({"type": "object", "properties": props})
        };
        schemas.insert(format!("N{i}"), body);
    }
    let roots: Vec<Value> = (0..nodes.len()).filter(|i| nodes[*i].layer == 0).map(|i| reference(i, &None)).collect();
    json!({
        "openapi": "3.0.3",
        "info": {"title": "dag", "version": "1"},
        "paths": {"/x": {"get": {"responses": {"200": {"description": "ok", "content": {"application/json": {"schema": {"type": "array", "items": {"anyOf": roots}}}}}}}}},
        "components": {"schemas": schemas},
    })
}

fn first_ref(v: &Value, at: &mut Vec<String>) -> bool {
    match v {
        Value::Object(m) if m.contains_key("$ref") => true,
        Value::Object(m) => m.iter().any(|(k, c)| {
            at.push(k.clone());
            first_ref(c, at) || {
                at.pop();
                false
            }
        }),
        Value::Array(a) => a.iter().enumerate().any(|(i, c)| {
            at.push(i.to_string());
            first_ref(c, at) || {
                at.pop();
                false
            }
        }),
        _ => false,
    }
}

fn to_pointer(tokens: &[String]) -> String {
    tokens.iter().map(|t| format!("/{}", t.replace('~', "~0").replace('/', "~1"))).collect()
}

/// Replaces one `$ref` at a time with its current target until none are left.
pub fn substitute_to_fixpoint(doc: &Value) -> Value {
    let mut tree = doc.clone();
    loop {
        let mut at = Vec::new();
        if !first_ref(&tree, &mut at) {
            return tree;
        }
        let ptr = to_pointer(&at);
        let node = tree.pointer(&ptr).unwrap().as_object().unwrap().clone();
        let target_ptr = node["$ref"].as_str().unwrap().trim_start_matches('#').to_string();
        let mut replacement = tree.pointer(&target_ptr).expect("acyclic fixture has no dangling refs").clone();
        if let Value::Object(obj) = &mut replacement {
            for (k, v) in node.iter().filter(|(k, _)| *k != "$ref") {
                obj.insert(k.clone(), v.clone());
            }
        }
        *tree.pointer_mut(&ptr).unwrap() = replacement;
    }
}

pub fn contains_ref(v: &Value) -> bool {
    first_ref(v, &mut Vec::new())
}
