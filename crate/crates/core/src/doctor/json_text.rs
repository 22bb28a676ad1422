//! In-place edits of JSON source text that leave untouched regions byte-identical.

use serde_json::Value;

use super::patch::TextOp;

#[derive(Debug)]
struct Node {
    start: usize,
    end: usize,
    kind: Kind,
}

#[derive(Debug)]
enum Kind {
    Object(Vec<(String, usize, Node)>),
    Array(Vec<Node>),
    Scalar,
}

struct Scanner<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Scanner<'_> {
    fn ws(&mut self) {
        while self.pos < self.b.len() && self.b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn string_end(&mut self) -> Option<usize> {
        // assumes self.b[self.pos] == b'"'
        let mut i = self.pos + 1;
        while i < self.b.len() {
            match self.b[i] {
                b'\\' => i += 2,
                b'"' => return Some(i + 1),
                _ => i += 1,
            }
        }
        None
    }

    fn value(&mut self) -> Option<Node> {
        self.ws();
        let start = self.pos;
        match *self.b.get(self.pos)? {
            b'{' => {
                self.pos += 1;
                let mut members = Vec::new();
                loop {
                    self.ws();
                    match *self.b.get(self.pos)? {
                        b'}' => {
                            self.pos += 1;
                            break;
                        }
                        b',' => self.pos += 1,
                        b'"' => {
                            let key_start = self.pos;
                            let key_end = self.string_end()?;
                            let key: String = serde_json::from_slice(&self.b[key_start..key_end]).ok()?;
                            self.pos = key_end;
                            self.ws();
                            if self.b.get(self.pos) != Some(&b':') {
                                return None;
                            }
                            self.pos += 1;
                            let v = self.value()?;
                            members.push((key, key_start, v));
                        }
                        _ => return None,
                    }
                }
                Some(Node {
                    start,
                    end: self.pos,
                    kind: Kind::Object(members),
                })
            }
            b'[' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.ws();
                    match *self.b.get(self.pos)? {
                        b']' => {
                            self.pos += 1;
                            break;
                        }
                        b',' => self.pos += 1,
                        _ => items.push(self.value()?),
                    }
                }
                Some(Node {
                    start,
                    end: self.pos,
                    kind: Kind::Array(items),
                })
            }
            b'"' => {
                self.pos = self.string_end()?;
                Some(Node {
                    start,
                    end: self.pos,
                    kind: Kind::Scalar,
                })
            }
            _ => {
                while self.pos < self.b.len() && !matches!(self.b[self.pos], b',' | b'}' | b']') && !self.b[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                (self.pos > start).then_some(Node {
                    start,
                    end: self.pos,
                    kind: Kind::Scalar,
                })
            }
        }
    }
}

fn scan(text: &str) -> Option<Node> {
    Scanner { b: text.as_bytes(), pos: 0 }.value()
}

fn locate<'a>(root: &'a Node, tokens: &[String]) -> Option<&'a Node> {
    let mut node = root;
    for t in tokens {
        node = match &node.kind {
            Kind::Object(members) => &members.iter().rev().find(|(k, _, _)| k == t)?.2,
            Kind::Array(items) => items.get(t.parse::<usize>().ok()?)?,
            Kind::Scalar => return None,
        };
    }
    Some(node)
}

fn line_start(text: &str, pos: usize) -> usize {
    text[..pos].rfind('\n').map_or(0, |i| i + 1)
}

fn indent_at(text: &str, pos: usize) -> String {
    let ls = line_start(text, pos);
    text[ls..].chars().take_while(|c| *c == ' ' || *c == '\t').collect()
}

fn same_line(text: &str, a: usize, b: usize) -> bool {
    !text[a.min(b)..a.max(b)].contains('\n')
}

/// Indentation unit of the document (the smallest non-zero leading whitespace).
fn indent_unit(text: &str) -> String {
    text.lines()
        .map(|l| l.chars().take_while(|c| *c == ' ' || *c == '\t').collect::<String>())
        .filter(|w| !w.is_empty())
        .min_by_key(String::len)
        .unwrap_or_else(|| "  ".into())
}

/// One-line rendering with a space after `:` and `,`.
pub(crate) fn inline(v: &Value) -> String {
    match v {
        Value::Object(m) if m.is_empty() => "{}".into(),
        Value::Array(a) if a.is_empty() => "[]".into(),
        Value::Object(m) => format!(
            "{{{}}}",
            m.iter()
                .map(|(k, v)| format!("{}: {}", Value::String(k.clone()), inline(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Value::Array(a) => format!("[{}]", a.iter().map(inline).collect::<Vec<_>>().join(", ")),
        scalar => scalar.to_string(),
    }
}

const INLINE_LIMIT: usize = 100;

fn render(v: &Value, base_indent: &str, unit: &str) -> String {
    let one = inline(v);
    if one.len() <= INLINE_LIMIT || !(v.is_object() || v.is_array()) {
        return one;
    }
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(unit.as_bytes());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    serde::Serialize::serialize(v, &mut ser).expect("in-memory serialization");
    let pretty = String::from_utf8(buf).expect("utf8");
    pretty.replace('\n', &format!("\n{base_indent}"))
}

pub(crate) fn apply(text: &str, op: &TextOp) -> Option<String> {
    let root = scan(text)?;
    let unit = indent_unit(text);
    let splice = |start: usize, end: usize, with: &str| format!("{}{}{}", &text[..start], with, &text[end..]);
    match op {
        TextOp::Replace { at, value } => {
            let node = locate(&root, at)?;
            let indent = indent_at(text, node.start);
            Some(splice(node.start, node.end, &render(value, &indent, &unit)))
        }
        TextOp::Insert { parent, key, value } => {
            let node = locate(&root, parent)?;
            let Kind::Object(members) = &node.kind else { return None };
            let key_text = Value::String(key.clone()).to_string();
            match members.last() {
                None => {
                    let indent = indent_at(text, node.start);
                    let inner = format!("{indent}{unit}");
                    let body = format!("{{\n{inner}{key_text}: {}\n{indent}}}", render(value, &inner, &unit));
                    Some(splice(node.start, node.end, &body))
                }
                Some((_, key_start, last)) => {
                    if same_line(text, node.start, *key_start) {
                        let ins = format!(", {key_text}: {}", inline(value));
                        Some(splice(last.end, last.end, &ins))
                    } else {
                        // placed ahead of the final member so its line keeps its missing comma
                        let indent = indent_at(text, *key_start);
                        let ins = format!("{key_text}: {},\n{indent}", render(value, &indent, &unit));
                        Some(splice(*key_start, *key_start, &ins))
                    }
                }
            }
        }
        TextOp::Append { parent, value } => {
            let node = locate(&root, parent)?;
            let Kind::Array(items) = &node.kind else { return None };
            match items.last() {
                None => {
                    let indent = indent_at(text, node.start);
                    let inner = format!("{indent}{unit}");
                    let body = format!("[\n{inner}{}\n{indent}]", render(value, &inner, &unit));
                    Some(splice(node.start, node.end, &body))
                }
                Some(last) => {
                    if same_line(text, node.start, last.start) {
                        Some(splice(last.end, last.end, &format!(", {}", inline(value))))
                    } else {
                        let indent = indent_at(text, last.start);
                        let ins = format!(",\n{indent}{}", render(value, &indent, &unit));
                        Some(splice(last.end, last.end, &ins))
                    }
                }
            }
        }
        TextOp::Prepend { parent, value } => {
            let node = locate(&root, parent)?;
            let Kind::Array(items) = &node.kind else { return None };
            let first = items.first()?;
            if same_line(text, node.start, first.start) {
                Some(splice(first.start, first.start, &format!("{}, ", inline(value))))
            } else {
                let indent = indent_at(text, first.start);
                let ins = format!("{},\n{indent}", render(value, &indent, &unit));
                Some(splice(first.start, first.start, &ins))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn toks(p: &[&str]) -> Vec<String> {
        p.iter().map(|s| s.to_string()).collect()
    }

    const DOC: &str = "{\n  \"a\": {\n    \"b\": 1,\n    \"c\": [\n      {\"x\": 1}\n    ]\n  },\n  \"d\": {}\n}\n";

    #[test]
    fn replace_scalar() {
        let out = apply(DOC, &TextOp::Replace { at: toks(&["a", "b"]), value: json!("s") }).unwrap();
        assert!(out.contains("\"b\": \"s\","));
        assert_eq!(out.lines().count(), DOC.lines().count());
    }

    #[test]
    fn insert_member_and_append() {
        let out = apply(DOC, &TextOp::Insert { parent: toks(&["a"]), key: "k".into(), value: json!([1]) }).unwrap();
        assert!(out.contains("    \"b\": 1,\n    \"k\": [1],\n    \"c\": ["));
        let out = apply(DOC, &TextOp::Append { parent: toks(&["a", "c"]), value: json!({"y": 2}) }).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["a"]["c"][1], json!({"y": 2}));
        let out = apply(DOC, &TextOp::Insert { parent: toks(&["d"]), key: "k".into(), value: json!(true) }).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["d"]["k"], json!(true));
    }

    #[test]
    fn prepend_keeps_neighbours() {
        let out = apply(DOC, &TextOp::Prepend { parent: toks(&["a", "c"]), value: json!({"y": 2}) }).unwrap();
        assert!(out.contains("      {\"y\": 2},\n      {\"x\": 1}\n"));
        let out = apply("[1, 2]", &TextOp::Prepend { parent: vec![], value: json!(0) }).unwrap();
        assert_eq!(out, "[0, 1, 2]");
    }

    #[test]
    fn escaped_keys_and_inline_objects() {
        let doc = "{\"p\": {\"/a~b\": {\"q\": \"x\\\"y\"}}}";
        let out = apply(doc, &TextOp::Insert { parent: toks(&["p", "/a~b"]), key: "r".into(), value: json!(1) }).unwrap();
        assert_eq!(out, "{\"p\": {\"/a~b\": {\"q\": \"x\\\"y\", \"r\": 1}}}");
    }
}
