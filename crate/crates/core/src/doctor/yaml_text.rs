//! In-place edits of block-style YAML. Nodes are located by indentation; flow
//! collections and block scalars can only be replaced whole or not at all, in
//! which case the caller falls back to re-serialization.

use serde_json::Value;

use super::json_text::inline;
use super::patch::TextOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    /// Entries at column `indent`; the first line may be a `- key: v` sequence item.
    Map { indent: usize, start: usize, end: usize },
    Seq { indent: usize, start: usize, end: usize },
    /// A scalar or flow collection on one line, owned by an entry or item at `owner`.
    Inline { line: usize, col: usize, end: usize, owner: usize },
    /// `key:` with nothing after it and no nested block.
    Empty { line: usize, owner: usize },
    Opaque,
}

struct Lines<'a> {
    lines: Vec<&'a str>,
}

fn indent_of(l: &str) -> usize {
    l.len() - l.trim_start_matches(' ').len()
}

fn is_content(l: &str) -> bool {
    let t = l.trim();
    !t.is_empty() && !t.starts_with('#') && t != "---"
}

fn is_item(l: &str, col: usize) -> bool {
    let rest = &l[col.min(l.len())..];
    rest == "-" || rest.starts_with("- ")
}

/// Column after `- ` (and any extra spaces) for an item line.
fn after_dash(l: &str, col: usize) -> usize {
    let mut c = col + 1;
    while l.as_bytes().get(c) == Some(&b' ') {
        c += 1;
    }
    c
}

/// Parses `key:` at `col`; returns the key and the column just after the colon.
fn key_at(l: &str, col: usize) -> Option<(String, usize)> {
    let rest = l.get(col..)?;
    let (key, after) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let end = quoted_end(rest, q)?;
        let parsed: String = match q {
            '"' => serde_json::from_str(&rest[..end]).ok()?,
            _ => rest[1..end - 1].replace("''", "'"),
        };
        let tail = rest[end..].trim_start_matches(' ');
        if !tail.starts_with(':') {
            return None;
        }
        (parsed, col + (rest.len() - tail.len()) + 1)
    } else {
        if rest.starts_with(['-', '#', '{', '[', '|', '>', '&', '*', '!']) && !rest.starts_with("-:") {
            return None;
        }
        let bytes = rest.as_bytes();
        let mut i = 0;
        loop {
            if i >= bytes.len() {
                return None;
            }
            if bytes[i] == b':' && (i + 1 == bytes.len() || bytes[i + 1] == b' ') {
                break;
            }
            if bytes[i] == b' ' && bytes.get(i + 1) == Some(&b'#') {
                return None;
            }
            i += 1;
        }
        (rest[..i].trim_end().to_string(), col + i + 1)
    };
    let next = l.as_bytes().get(after);
    (next.is_none() || next == Some(&b' ')).then_some((key, after))
}

fn quoted_end(s: &str, q: char) -> Option<usize> {
    let b = s.as_bytes();
    let mut i = 1;
    while i < b.len() {
        if q == '"' && b[i] == b'\\' {
            i += 2;
            continue;
        }
        if b[i] == q as u8 {
            if q == '\'' && b.get(i + 1) == Some(&b'\'') {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        i += 1;
    }
    None
}

/// End column of an inline value starting at `col`.
fn value_end(l: &str, col: usize) -> Option<usize> {
    let rest = &l[col..];
    let first = rest.chars().next()?;
    let len = match first {
        '\'' | '"' => quoted_end(rest, first)?,
        '{' | '[' => {
            let mut depth = 0i32;
            let mut end = None;
            let mut in_q: Option<char> = None;
            for (i, c) in rest.char_indices() {
                match (in_q, c) {
                    (Some(q), c) if c == q => in_q = None,
                    (Some(_), _) => {}
                    (None, '\'' | '"') => in_q = Some(c),
                    (None, '{' | '[') => depth += 1,
                    (None, '}' | ']') => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(i + 1);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            end?
        }
        _ => rest.find(" #").unwrap_or(rest.len()),
    };
    Some(col + rest[..len].trim_end().len())
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.split('\n').collect(),
        }
    }

    fn next_content(&self, from: usize, limit: usize) -> Option<usize> {
        (from..limit).find(|&i| is_content(self.lines[i]))
    }

    /// One past the last content line of a block whose lines sit at `ind` or deeper.
    fn block_end(&self, start: usize, ind: usize, limit: usize, indentless_seq: bool) -> usize {
        let mut last = start;
        for i in start + 1..limit {
            let l = self.lines[i];
            if !is_content(l) {
                continue;
            }
            let li = indent_of(l);
            if li < ind || (indentless_seq && li == ind && !is_item(l, li)) {
                break;
            }
            last = i;
        }
        last + 1
    }

    fn root(&self) -> Option<Node> {
        let first = self.next_content(0, self.lines.len())?;
        let l = self.lines[first];
        if l.trim_start().starts_with(['{', '[']) {
            return None;
        }
        let indent = indent_of(l);
        Some(Node::Map {
            indent,
            start: first,
            end: self.block_end(first, indent, self.lines.len(), false),
        })
    }

    /// The node holding the value that starts after column `col` of `line`.
    fn value_node(&self, line: usize, col: usize, owner: usize, limit: usize) -> Node {
        let l = self.lines[line];
        let mut c = col;
        while l.as_bytes().get(c) == Some(&b' ') {
            c += 1;
        }
        if c < l.len() && !l[c..].starts_with('#') {
            if l[c..].starts_with(['|', '>', '&', '*', '!']) {
                return Node::Opaque;
            }
            return match value_end(l, c) {
                Some(end) => Node::Inline { line, col: c, end, owner },
                None => Node::Opaque,
            };
        }
        let Some(next) = self.next_content(line + 1, limit) else {
            return Node::Empty { line, owner };
        };
        let nl = self.lines[next];
        let ni = indent_of(nl);
        if ni > owner {
            if is_item(nl, ni) {
                Node::Seq { indent: ni, start: next, end: self.block_end(next, ni, limit, false) }
            } else {
                Node::Map { indent: ni, start: next, end: self.block_end(next, ni, limit, false) }
            }
        } else if ni == owner && is_item(nl, ni) {
            Node::Seq { indent: ni, start: next, end: self.block_end(next, ni, limit, true) }
        } else {
            Node::Empty { line, owner }
        }
    }

    fn entry(&self, indent: usize, start: usize, end: usize, key: &str) -> Option<Node> {
        for i in start..end {
            let l = self.lines[i];
            if !is_content(l) {
                continue;
            }
            let li = indent_of(l);
            let col = if li == indent {
                li
            } else if i == start && is_item(l, li) && after_dash(l, li) == indent {
                indent
            } else {
                continue;
            };
            if let Some((k, after)) = key_at(l, col) {
                if k == key {
                    return Some(self.value_node(i, after, indent, end));
                }
            }
        }
        None
    }

    fn item(&self, indent: usize, start: usize, end: usize, index: usize) -> Option<Node> {
        let starts: Vec<usize> = (start..end)
            .filter(|&i| {
                let l = self.lines[i];
                is_content(l) && indent_of(l) == indent && is_item(l, indent)
            })
            .collect();
        let line = *starts.get(index)?;
        let item_end = starts.get(index + 1).copied().unwrap_or(end);
        let l = self.lines[line];
        let c = after_dash(l, indent);
        if c < l.len() && key_at(l, c).is_some() {
            let map_end = self.block_end(line, c, item_end, false).max(line + 1);
            return Some(Node::Map { indent: c, start: line, end: map_end.min(item_end) });
        }
        Some(self.value_node(line, indent + 1, indent, item_end))
    }

    fn locate(&self, tokens: &[String]) -> Option<Node> {
        let mut node = self.root()?;
        for t in tokens {
            node = match node {
                Node::Map { indent, start, end } => self.entry(indent, start, end, t)?,
                Node::Seq { indent, start, end } => self.item(indent, start, end, t.parse().ok()?)?,
                _ => return None,
            };
        }
        Some(node)
    }
}

pub(crate) fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => {
            let rendered = serde_yaml::to_string(s).unwrap_or_default();
            let rendered = rendered.trim_end_matches('\n');
            if rendered.contains('\n') {
                Value::String(s.clone()).to_string()
            } else {
                rendered.to_string()
            }
        }
        Value::Object(_) | Value::Array(_) => inline(v),
        other => other.to_string(),
    }
}

fn styled_scalar(old: &str, v: &Value) -> String {
    match (old.chars().next(), v) {
        (Some('\''), Value::String(s)) => format!("'{}'", s.replace('\'', "''")),
        (Some('"'), Value::String(_)) => v.to_string(),
        _ => scalar(v),
    }
}

fn is_compact(v: &Value) -> bool {
    match v {
        Value::Object(m) => m.is_empty(),
        Value::Array(a) => a.is_empty(),
        _ => true,
    }
}

fn block(v: &Value, ind: usize) -> Vec<String> {
    let pad = " ".repeat(ind);
    serde_yaml::to_string(v)
        .unwrap_or_default()
        .lines()
        .map(|l| format!("{pad}{l}"))
        .collect()
}

fn entry_lines(key: &str, v: &Value, ind: usize) -> Vec<String> {
    let pad = " ".repeat(ind);
    let k = scalar(&Value::String(key.to_string()));
    if is_compact(v) {
        vec![format!("{pad}{k}: {}", scalar(v))]
    } else {
        let mut out = vec![format!("{pad}{k}:")];
        out.extend(block(v, ind + 2));
        out
    }
}

fn item_lines(v: &Value, ind: usize) -> Vec<String> {
    let pad = " ".repeat(ind);
    match v {
        Value::Object(m) if !m.is_empty() => {
            let mut lines = block(v, ind + 2);
            if let Some(first) = lines.first_mut() {
                *first = format!("{pad}- {}", &first[ind + 2..]);
            }
            lines
        }
        other => vec![format!("{pad}- {}", scalar(other))],
    }
}

fn splice(lines: &[&str], at: usize, remove: usize, insert: Vec<String>) -> String {
    let mut out: Vec<String> = lines[..at].iter().map(|s| s.to_string()).collect();
    out.extend(insert);
    out.extend(lines[at + remove..].iter().map(|s| s.to_string()));
    out.join("\n")
}

fn replace_inline(lines: &[&str], line: usize, col: usize, end: usize, with: &str) -> String {
    let l = lines[line];
    let new_line = format!("{}{}{}", &l[..col], with, &l[end..]);
    splice(lines, line, 1, vec![new_line])
}

/// Drops an empty flow collection (`{}`/`[]`) from its line so block lines can follow.
fn clear_inline(lines: &[&str], line: usize, col: usize, end: usize) -> Option<String> {
    let l = lines[line];
    if !matches!(l[col..end].trim(), "{}" | "[]") {
        return None;
    }
    Some(format!("{}{}", l[..col].trim_end(), &l[end..]))
}

pub(crate) fn apply(text: &str, op: &TextOp) -> Option<String> {
    let doc = Lines::new(text);
    let lines = &doc.lines;
    match op {
        TextOp::Replace { at, value } => match doc.locate(at)? {
            Node::Inline { line, col, end, .. } => {
                let rendered = styled_scalar(&lines[line][col..end], value);
                Some(replace_inline(lines, line, col, end, &rendered))
            }
            Node::Empty { line, .. } => {
                let l = lines[line].trim_end();
                Some(splice(lines, line, 1, vec![format!("{l} {}", scalar(value))]))
            }
            _ => None,
        },
        TextOp::Insert { parent, key, value } => match doc.locate(parent)? {
            Node::Map { indent, end, .. } => Some(splice(lines, end, 0, entry_lines(key, value, indent))),
            Node::Empty { line, owner } => Some(splice(lines, line + 1, 0, entry_lines(key, value, owner + 2))),
            Node::Inline { line, col, end, owner } => {
                let cleared = clear_inline(lines, line, col, end)?;
                let mut insert = vec![cleared];
                insert.extend(entry_lines(key, value, owner + 2));
                Some(splice(lines, line, 1, insert))
            }
            _ => None,
        },
        TextOp::Append { parent, value } => match doc.locate(parent)? {
            Node::Seq { indent, end, .. } => Some(splice(lines, end, 0, item_lines(value, indent))),
            Node::Empty { line, owner } => Some(splice(lines, line + 1, 0, item_lines(value, owner + 2))),
            Node::Inline { line, col, end, owner } => {
                let cleared = clear_inline(lines, line, col, end)?;
                let mut insert = vec![cleared];
                insert.extend(item_lines(value, owner + 2));
                Some(splice(lines, line, 1, insert))
            }
            _ => None,
        },
        TextOp::Prepend { parent, value } => match doc.locate(parent)? {
            Node::Seq { indent, start, .. } => Some(splice(lines, start, 0, item_lines(value, indent))),
            _ => None,
        },
    }
}
