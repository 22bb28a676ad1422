//! Structured patches and their application to source text.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use similar::{ChangeTag, TextDiff};
use thiserror::Error;

use super::{json_text, yaml_text};
use crate::ingest::{parse_document, Format, RawDocument};
use crate::pointer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Add,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub pointer: String,
    pub op: EditOp,
    pub value: Value,
}

impl Edit {
    pub fn add(pointer: impl Into<String>, value: Value) -> Self {
        Self {
            pointer: pointer.into(),
            op: EditOp::Add,
            value,
        }
    }

    pub fn replace(pointer: impl Into<String>, value: Value) -> Self {
        Self {
            pointer: pointer.into(),
            op: EditOp::Replace,
            value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub edits: Vec<Edit>,
    /// Added plus removed lines of the rendered diff against the source.
    pub loc_changed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot {op:?} at {pointer}: {reason}")]
pub struct PointerError {
    pub pointer: String,
    pub op: EditOp,
    pub reason: String,
}

/// Text-level operation after missing parents have been folded into the value.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TextOp {
    Replace { at: Vec<String>, value: Value },
    Insert { parent: Vec<String>, key: String, value: Value },
    Append { parent: Vec<String>, value: Value },
    Prepend { parent: Vec<String>, value: Value },
}

fn nest(tokens: &[String], value: Value) -> Value {
    tokens.iter().rev().fold(value, |acc, t| {
        if t == "-" {
            Value::Array(vec![acc])
        } else {
            let mut m = Map::new();
            m.insert(t.clone(), acc);
            Value::Object(m)
        }
    })
}

/// Applies one edit to `tree` and returns the matching text operation.
fn apply_edit(tree: &mut Value, edit: &Edit) -> Result<TextOp, PointerError> {
    let fail = |reason: &str| PointerError {
        pointer: edit.pointer.clone(),
        op: edit.op,
        reason: reason.to_string(),
    };
    let tokens = pointer::split(&edit.pointer).ok_or_else(|| fail("not a JSON pointer"))?;
    if tokens.is_empty() {
        return Err(fail("the document root cannot be edited"));
    }
    let last = tokens.last().map(String::as_str);
    let array_parent = tokens.len() > 1 && tree.pointer(&pointer::join(&tokens[..tokens.len() - 1])).is_some_and(Value::is_array);
    if edit.op == EditOp::Add && array_parent && last == Some("0") {
        let parent_tokens = tokens[..tokens.len() - 1].to_vec();
        let Some(Value::Array(a)) = tree.pointer_mut(&pointer::join(&parent_tokens)) else { unreachable!() };
        if !a.is_empty() {
            a.insert(0, edit.value.clone());
            return Ok(TextOp::Prepend {
                parent: parent_tokens,
                value: edit.value.clone(),
            });
        }
    }
    if tree.pointer(&edit.pointer).is_some() && last != Some("-") {
        *tree.pointer_mut(&edit.pointer).expect("checked") = edit.value.clone();
        return Ok(TextOp::Replace {
            at: tokens,
            value: edit.value.clone(),
        });
    }
    if edit.op == EditOp::Replace {
        return Err(fail("target does not exist"));
    }
    // deepest existing ancestor
    let mut depth = tokens.len() - 1;
    while depth > 0 && tree.pointer(&pointer::join(&tokens[..depth])).is_none() {
        depth -= 1;
    }
    let parent_tokens = tokens[..depth].to_vec();
    let parent = tree.pointer_mut(&pointer::join(&parent_tokens)).expect("ancestor exists");
    let head = tokens[depth].clone();
    let value = nest(&tokens[depth + 1..], edit.value.clone());
    match parent {
        Value::Object(m) => {
            m.insert(head.clone(), value.clone());
            Ok(TextOp::Insert {
                parent: parent_tokens,
                key: head,
                value,
            })
        }
        Value::Array(a) => {
            let appends = head == "-" || head.parse::<usize>().ok() == Some(a.len());
            if !appends {
                return Err(fail("array index out of range"));
            }
            a.push(value.clone());
            Ok(TextOp::Append {
                parent: parent_tokens,
                value,
            })
        }
        _ => Err(fail("parent is a scalar")),
    }
}

/// Applies edits to a tree without touching any text.
pub fn apply_to_tree(tree: &Value, edits: &[Edit]) -> Result<Value, PointerError> {
    let mut out = tree.clone();
    for e in edits {
        apply_edit(&mut out, e)?;
    }
    Ok(out)
}

fn reserialize(tree: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(tree).expect("in-memory serialization");
            s.push('\n');
            s
        }
        Format::Yaml => serde_yaml::to_string(tree).expect("in-memory serialization"),
    }
}

/// Unified diff of two texts and its added + removed line count.
pub fn unified_diff(old: &str, new: &str, name: &str) -> (String, usize) {
    let diff = TextDiff::from_lines(old, new);
    let changed = diff
        .iter_all_changes()
        .filter(|c| c.tag() != ChangeTag::Equal)
        .count();
    if changed == 0 {
        return (String::new(), 0);
    }
    let rendered = diff
        .unified_diff()
        .context_radius(3)
        .header(&format!("a/{name}"), &format!("b/{name}"))
        .to_string();
    (rendered, changed)
}

#[derive(Debug, Clone)]
pub struct Applied {
    pub document: RawDocument,
    pub diff: String,
    pub loc_changed: usize,
    /// True when formatting could not be preserved and the document was re-serialized.
    pub reserialized: bool,
}

/// Applies a patch, preserving the formatting of untouched regions.
pub fn apply_patch(raw: &RawDocument, patch: &Patch) -> Result<Applied, PointerError> {
    let mut tree = raw.tree.clone();
    let mut ops = Vec::with_capacity(patch.edits.len());
    for e in &patch.edits {
        ops.push(apply_edit(&mut tree, e)?);
    }
    if ops.is_empty() {
        return Ok(Applied {
            document: raw.clone(),
            diff: String::new(),
            loc_changed: 0,
            reserialized: false,
        });
    }
    let surgical = ops.iter().try_fold(raw.text.clone(), |text, op| match raw.format {
        Format::Json => json_text::apply(&text, op),
        Format::Yaml => yaml_text::apply(&text, op),
    });
    let (text, reserialized) = match surgical.and_then(|t| parse_document(&t, &raw.source_path).ok().map(|d| (t, d))) {
        Some((t, d)) if d.tree == tree => (t, false),
        _ => (reserialize(&tree, raw.format), true),
    };
    let mut document = parse_document(&text, &raw.source_path).map_err(|e| PointerError {
        pointer: String::new(),
        op: EditOp::Add,
        reason: format!("patched document does not parse: {e}"),
    })?;
    document.warnings = raw.warnings.clone();
    let name = raw
        .source_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "spec".into());
    let (diff, loc_changed) = unified_diff(&raw.text, &text, &name);
    Ok(Applied {
        document,
        diff,
        loc_changed,
        reserialized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(text: &str) -> RawDocument {
        parse_document(text, "spec.yaml").unwrap()
    }

    #[test]
    fn empty_patch_is_identity() {
        let d = doc("openapi: 3.0.0\npaths: {}\n");
        let a = apply_patch(&d, &Patch::default()).unwrap();
        assert_eq!(a.document.text, d.text);
        assert_eq!(a.loc_changed, 0);
    }

    #[test]
    fn add_creates_parents() {
        let d = doc("openapi: 3.0.0\npaths: {}\n");
        let p = Patch {
            edits: vec![Edit::add("/components/securitySchemes/bearer", json!({"type": "http", "scheme": "bearer"}))],
            loc_changed: 0,
        };
        let a = apply_patch(&d, &p).unwrap();
        assert!(!a.reserialized);
        assert_eq!(a.document.tree.pointer("/components/securitySchemes/bearer/scheme").unwrap(), "bearer");
        assert_eq!(a.loc_changed, 5);
    }

    #[test]
    fn replace_missing_is_pointer_error() {
        let d = doc("openapi: 3.0.0\npaths: {}\n");
        let p = Patch {
            edits: vec![Edit::replace("/nope/x", json!(1))],
            loc_changed: 0,
        };
        assert!(apply_patch(&d, &p).is_err());
        let p = Patch {
            edits: vec![Edit::add("/openapi/x", json!(1))],
            loc_changed: 0,
        };
        assert!(apply_patch(&d, &p).is_err());
    }

    #[test]
    fn diff_counts_lines() {
        let (d, n) = unified_diff("a\nb\n", "a\nc\n", "x");
        assert_eq!(n, 2);
        assert!(d.contains("-b\n+c"));
    }
}
