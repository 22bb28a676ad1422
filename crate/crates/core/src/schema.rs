//! A small JSON-schema validator covering the subset OpenAPI schemas use for
//! tool arguments. Unknown keywords are ignored.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// JSON pointer into the instance.
    pub at: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.at.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.at, self.message)
        }
    }
}

pub fn validate(schema: &Value, instance: &Value) -> Vec<Violation> {
    let mut out = Vec::new();
    check(schema, instance, "", &mut out);
    out
}

pub fn is_valid(schema: &Value, instance: &Value) -> bool {
    validate(schema, instance).is_empty()
}

fn push(out: &mut Vec<Violation>, at: &str, message: String) {
    out.push(Violation {
        at: at.to_string(),
        message,
    });
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => match v {
            Value::Number(n) => n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0),
            _ => false,
        },
        _ => true,
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn check(schema: &Value, v: &Value, at: &str, out: &mut Vec<Violation>) {
    let Some(s) = schema.as_object() else {
        if schema == &Value::Bool(false) {
            push(out, at, "no value is allowed here".into());
        }
        return;
    };
    if v.is_null() && s.get("nullable").and_then(Value::as_bool) == Some(true) {
        return;
    }

    if let Some(ty) = s.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(t) => vec![t.as_str()],
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        if !allowed.is_empty() && !allowed.iter().any(|t| type_matches(t, v)) {
            push(out, at, format!("expected {}, got {}", allowed.join(" or "), type_name(v)));
            return;
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.iter().any(|o| o == v) {
            push(out, at, format!("value {v} is not one of the allowed values"));
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            push(out, at, format!("value must equal {c}"));
        }
    }

    match v {
        Value::Object(map) => {
            if let Some(req) = s.get("required").and_then(Value::as_array) {
                for name in req.iter().filter_map(Value::as_str) {
                    if !map.contains_key(name) {
                        push(out, at, format!("missing required property `{name}`"));
                    }
                }
            }
            let props = s.get("properties").and_then(Value::as_object);
            for (k, child) in map {
                let child_at = crate::pointer::child(at, k);
                match props.and_then(|p| p.get(k)) {
                    Some(sub) => check(sub, child, &child_at, out),
                    None => match s.get("additionalProperties") {
                        Some(Value::Bool(false)) => push(out, at, format!("unexpected property `{k}`")),
                        Some(extra @ Value::Object(_)) => check(extra, child, &child_at, out),
                        _ => {}
                    },
                }
            }
        }
        Value::Array(items) => {
            if let Some(item_schema) = s.get("items") {
                for (i, item) in items.iter().enumerate() {
                    check(item_schema, item, &crate::pointer::child(at, &i.to_string()), out);
                }
            }
            bound(s, "minItems", items.len() as f64, at, out, |n, b| n >= b, "fewer items than");
            bound(s, "maxItems", items.len() as f64, at, out, |n, b| n <= b, "more items than");
        }
        Value::String(text) => {
            let len = text.chars().count() as f64;
            bound(s, "minLength", len, at, out, |n, b| n >= b, "shorter than");
            bound(s, "maxLength", len, at, out, |n, b| n <= b, "longer than");
            if let Some(p) = s.get("pattern").and_then(Value::as_str) {
                if let Ok(re) = regex::Regex::new(p) {
                    if !re.is_match(text) {
                        push(out, at, format!("does not match pattern {p}"));
                    }
                }
            }
        }
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(0.0);
            let exclusive = |k: &str| s.get(k).and_then(Value::as_bool) == Some(true);
            if let Some(min) = s.get("minimum").and_then(Value::as_f64) {
                if x < min || (exclusive("exclusiveMinimum") && x == min) {
                    push(out, at, format!("{x} is below the minimum {min}"));
                }
            }
            if let Some(max) = s.get("maximum").and_then(Value::as_f64) {
                if x > max || (exclusive("exclusiveMaximum") && x == max) {
                    push(out, at, format!("{x} is above the maximum {max}"));
                }
            }
        }
        _ => {}
    }

    if let Some(all) = s.get("allOf").and_then(Value::as_array) {
        for sub in all {
            check(sub, v, at, out);
        }
    }
    if let Some(any) = s.get("anyOf").and_then(Value::as_array) {
        if !any.is_empty() && !any.iter().any(|sub| is_valid(sub, v)) {
            push(out, at, "matches none of the anyOf alternatives".into());
        }
    }
    if let Some(one) = s.get("oneOf").and_then(Value::as_array) {
        let hits = one.iter().filter(|sub| is_valid(sub, v)).count();
        if !one.is_empty() && hits != 1 {
            push(out, at, format!("matches {hits} oneOf alternatives, expected exactly 1"));
        }
    }
}

fn bound(
    s: &serde_json::Map<String, Value>,
    key: &str,
    actual: f64,
    at: &str,
    out: &mut Vec<Violation>,
    ok: impl Fn(f64, f64) -> bool,
    what: &str,
) {
    if let Some(b) = s.get(key).and_then(Value::as_f64) {
        if !ok(actual, b) {
            push(out, at, format!("{what} {key} {b}"));
        }
    }
}
