//! JSON pointer helpers (RFC 6901) shared by the resolver, compiler and linter.

use serde_json::Value;

pub fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

pub fn unescape(token: &str) -> String {
    token.replace("~1", "/").replace("~0", "~")
}

/// Builds a pointer from unescaped tokens.
pub fn join<I, S>(tokens: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for t in tokens {
        out.push('/');
        out.push_str(&escape(t.as_ref()));
    }
    out
}

/// Appends one unescaped token to an existing pointer.
pub fn child(base: &str, token: &str) -> String {
    format!("{base}/{}", escape(token))
}

/// Splits a pointer into unescaped tokens. `""` is the whole document.
pub fn split(pointer: &str) -> Option<Vec<String>> {
    if pointer.is_empty() {
        return Some(Vec::new());
    }
    let rest = pointer.strip_prefix('/')?;
    Some(rest.split('/').map(unescape).collect())
}

/// Converts a `$ref` fragment (`#/a/b`) into a pointer (`/a/b`), percent-decoding it.
pub fn from_fragment(reference: &str) -> Option<String> {
    let frag = reference.strip_prefix('#')?;
    let decoded = percent_encoding::percent_decode_str(frag)
        .decode_utf8()
        .ok()?
        .into_owned();
    if decoded.is_empty() || decoded.starts_with('/') {
        Some(decoded)
    } else {
        None
    }
}

pub fn get<'a>(root: &'a Value, pointer: &str) -> Option<&'a Value> {
    root.pointer(pointer)
}

/// Follows a chain of local `$ref`s starting at `pointer` and returns the pointer
/// of the node that actually holds the content.
pub fn follow_refs(root: &Value, pointer: &str) -> Option<String> {
    let mut current = pointer.to_string();
    for _ in 0..64 {
        let node = root.pointer(&current)?;
        match node.get("$ref").and_then(Value::as_str) {
            Some(r) => current = from_fragment(r)?,
            None => return Some(current),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn escapes_path_keys() {
        assert_eq!(join(["paths", "/users/{id}", "get"]), "/paths/~1users~1{id}/get");
        assert_eq!(split("/paths/~1a~0b").unwrap(), vec!["paths", "/a~b"]);
    }

    #[test]
    fn fragment_decoding() {
        assert_eq!(from_fragment("#/components/schemas/Pet").unwrap(), "/components/schemas/Pet");
        assert_eq!(from_fragment("#/paths/~1a%7Bb%7D").unwrap(), "/paths/~1a{b}");
        assert_eq!(from_fragment("#").unwrap(), "");
        assert!(from_fragment("other.yaml#/x").is_none());
    }

    #[test]
    fn follows_ref_chains() {
        let doc = json!({"a": {"$ref": "#/b"}, "b": {"$ref": "#/c"}, "c": {"x": 1}});
        assert_eq!(follow_refs(&doc, "/a").unwrap(), "/c");
    }
}
