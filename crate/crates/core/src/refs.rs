//! Inlining of intra-document `$ref` pointers and structural validation of the
//! flattened result.
//!
//! Every `$ref` is replaced by a deep copy of its target. Back-edges of a
//! reference cycle become a permissive `{type: object}` placeholder whose
//! description names the pointer it stands in for.

use std::collections::HashMap;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::ingest::OPERATION_KEYS;
use crate::pointer;

/// A normalized contract with every reference materialized in place.
#[derive(Debug, Clone)]
pub struct FlattenedContract {
    pub tree: Value,
    pub ref_count_resolved: usize,
    /// Targets of references that closed a cycle, deduplicated, in discovery order.
    pub cycles_detected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefError {
    #[error("dangling reference {reference} at {at}")]
    Dangling { reference: String, at: String },
    #[error("external reference {reference} at {at} is not supported")]
    External { reference: String, at: String },
}

pub fn flatten(tree: &Value) -> Result<FlattenedContract, RefError> {
    let mut resolver = Resolver {
        root: tree,
        stack: Vec::new(),
        memo: HashMap::new(),
        resolved: 0,
        cycles: Vec::new(),
    };
    let (flat, _) = resolver.expand(tree, "")?;
    Ok(FlattenedContract {
        tree: flat,
        ref_count_resolved: resolver.resolved,
        cycles_detected: resolver.cycles,
    })
}

struct Resolver<'a> {
    root: &'a Value,
    stack: Vec<String>,
    /// Expansions that never hit a back-edge do not depend on the stack and can be reused.
    memo: HashMap<String, Value>,
    resolved: usize,
    cycles: Vec<String>,
}

impl Resolver<'_> {
    /// Returns the expanded value and whether a cycle was cut somewhere inside it.
    fn expand(&mut self, node: &Value, at: &str) -> Result<(Value, bool), RefError> {
        match node {
            Value::Object(map) => {
                if let Some(Value::String(reference)) = map.get("$ref") {
                    return self.expand_ref(reference, map, at);
                }
                let mut out = Map::new();
                let mut cut = false;
                for (k, v) in map {
                    let (child, c) = self.expand(v, &pointer::child(at, k))?;
                    cut |= c;
                    out.insert(k.clone(), child);
                }
                Ok((Value::Object(out), cut))
            }
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                let mut cut = false;
                for (i, v) in items.iter().enumerate() {
                    let (child, c) = self.expand(v, &pointer::child(at, &i.to_string()))?;
                    cut |= c;
                    out.push(child);
                }
                Ok((Value::Array(out), cut))
            }
            scalar => Ok((scalar.clone(), false)),
        }
    }

    fn expand_ref(
        &mut self,
        reference: &str,
        node: &Map<String, Value>,
        at: &str,
    ) -> Result<(Value, bool), RefError> {
        let target_ptr = pointer::from_fragment(reference).ok_or_else(|| RefError::External {
            reference: reference.to_string(),
            at: at.to_string(),
        })?;
        if self.stack.contains(&target_ptr) {
            if !self.cycles.contains(&reference.to_string()) {
                self.cycles.push(reference.to_string());
            }
            return Ok((cycle_placeholder(reference), true));
        }
        let (mut value, cut) = match self.memo.get(&target_ptr) {
            Some(v) => (v.clone(), false),
            None => {
                let target = self.root.pointer(&target_ptr).ok_or_else(|| RefError::Dangling {
                    reference: reference.to_string(),
                    at: at.to_string(),
                })?;
                self.stack.push(target_ptr.clone());
                let result = self.expand(target, &target_ptr);
                self.stack.pop();
                let (value, cut) = result?;
                if !cut {
                    self.memo.insert(target_ptr, value.clone());
                }
                (value, cut)
            }
        };
        self.resolved += 1;
        let mut cut = cut;
        if node.len() > 1 {
            // sibling keys of a $ref override the resolved content
            let mut siblings = Map::new();
            for (k, v) in node.iter().filter(|(k, _)| k.as_str() != "$ref") {
                let (child, c) = self.expand(v, &pointer::child(at, k))?;
                cut |= c;
                siblings.insert(k.clone(), child);
            }
            value = merge_siblings(value, siblings);
        }
        Ok((value, cut))
    }
}

pub(crate) fn merge_siblings(value: Value, siblings: Map<String, Value>) -> Value {
    match value {
        Value::Object(mut obj) => {
            for (k, v) in siblings {
                obj.insert(k, v);
            }
            Value::Object(obj)
        }
        other => other,
    }
}

pub fn cycle_placeholder(reference: &str) -> Value {
    json!({
        "type": "object",
        "description": format!("recursive reference to {reference}"),
    })
}

/// A structural problem found in a flattened contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationFinding {
    pub pointer: String,
    pub message: String,
    /// Fatal findings abort compilation.
    pub fatal: bool,
}

const PATH_ITEM_KEYS: [&str; 5] = ["parameters", "summary", "description", "servers", "$ref"];

pub fn validate(contract: &FlattenedContract) -> Vec<ValidationFinding> {
    let tree = &contract.tree;
    let mut findings = Vec::new();
    let Some(paths) = tree.get("paths").and_then(Value::as_object) else {
        findings.push(ValidationFinding {
            pointer: "/paths".into(),
            message: "document has no `paths` object".into(),
            fatal: true,
        });
        return findings;
    };
    let mut operations = 0usize;
    for (path, item) in paths {
        let item_ptr = pointer::join(["paths", path.as_str()]);
        let Some(item) = item.as_object() else {
            findings.push(finding(&item_ptr, "path item is not an object"));
            continue;
        };
        check_params(item.get("parameters"), &pointer::child(&item_ptr, "parameters"), &mut findings);
        for (key, op) in item {
            if key.starts_with("x-") || PATH_ITEM_KEYS.contains(&key.as_str()) {
                continue;
            }
            let op_ptr = pointer::child(&item_ptr, key);
            if !OPERATION_KEYS.contains(&key.as_str()) || key == "trace" {
                findings.push(finding(&op_ptr, &format!("unsupported HTTP method `{key}`")));
                continue;
            }
            operations += 1;
            check_params(op.get("parameters"), &pointer::child(&op_ptr, "parameters"), &mut findings);
            match op.get("responses").and_then(Value::as_object) {
                Some(r) if !r.is_empty() => {}
                _ => findings.push(finding(&pointer::child(&op_ptr, "responses"), "operation declares no responses")),
            }
        }
    }
    if operations == 0 {
        findings.push(finding("/paths", "no operations"));
    }
    findings
}

fn finding(ptr: &str, message: &str) -> ValidationFinding {
    ValidationFinding {
        pointer: ptr.to_string(),
        message: message.to_string(),
        fatal: false,
    }
}

fn check_params(params: Option<&Value>, base: &str, out: &mut Vec<ValidationFinding>) {
    let Some(list) = params.and_then(Value::as_array) else { return };
    for (i, p) in list.iter().enumerate() {
        let ptr = pointer::child(base, &i.to_string());
        if p.get("name").and_then(Value::as_str).is_none_or(str::is_empty) {
            out.push(finding(&ptr, "parameter has no `name`"));
        }
        match p.get("in").and_then(Value::as_str) {
            Some("path" | "query" | "header" | "cookie") => {}
            _ => out.push(finding(&ptr, "parameter has no valid `in` location")),
        }
    }
}
