//! Identifier sanitization shared by tool names, parameter names and env vars.

/// Lowercase snake_case made of `[a-z0-9_]`, with camelCase boundaries split,
/// separators mapped to `_`, other characters dropped and runs of `_` collapsed.
pub fn snake(raw: &str) -> String {
    sanitize(raw, true)
}

/// Like [`snake`] but keeps camelCase words whole (`GitHub` -> `github`).
pub fn snake_words(raw: &str) -> String {
    sanitize(raw, false)
}

fn sanitize(raw: &str, split_camel: bool) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut prev: Option<char> = None;
    for c in raw.chars() {
        if c.is_ascii_alphanumeric() {
            if split_camel && c.is_ascii_uppercase() {
                if let Some(p) = prev {
                    if p.is_ascii_lowercase() || p.is_ascii_digit() {
                        out.push('_');
                    }
                }
            }
            out.push(c.to_ascii_lowercase());
        } else if matches!(c, '/' | '-' | '.' | ' ' | '_' | ':') {
            out.push('_');
        }
        prev = Some(c);
    }
    collapse_underscores(&out)
}

fn collapse_underscores(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '_' && out.ends_with('_') {
            continue;
        }
        out.push(c);
    }
    out.trim_matches('_').to_string()
}

/// `SCREAMING_SNAKE` form used for environment variable names.
pub fn screaming(raw: &str) -> String {
    snake(raw).to_ascii_uppercase()
}

/// Appends `_2`, `_3`, ... until `taken` rejects nothing, keeping the result within `max_len`.
pub fn unique(base: &str, max_len: usize, is_taken: impl Fn(&str) -> bool) -> String {
    let base = truncate(base, max_len);
    if !is_taken(&base) {
        return base;
    }
    let mut n = 2usize;
    loop {
        let suffix = format!("_{n}");
        let head = truncate(&base, max_len.saturating_sub(suffix.len()));
        let candidate = format!("{head}{suffix}");
        if !is_taken(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

fn truncate(s: &str, max_len: usize) -> String {
    // identifiers are ASCII so byte truncation is safe
    let cut = &s[..s.len().min(max_len)];
    let trimmed = cut.trim_end_matches('_');
    if trimmed.is_empty() { cut.to_string() } else { trimmed.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snake_cases() {
        assert_eq!(snake("repos/list-branches"), "repos_list_branches");
        assert_eq!(snake("getPetById"), "get_pet_by_id");
        assert_eq!(snake("X-Request-ID"), "x_request_id");
        assert_eq!(snake("a//b--c"), "a_b_c");
        assert_eq!(snake("héllo wörld!"), "hllo_wrld");
        assert_eq!(snake("__"), "");
    }

    #[test]
    fn unique_suffixes_and_truncates() {
        let taken = ["get_items".to_string(), "get_items_2".to_string()];
        assert_eq!(unique("get_items", 64, |c| taken.iter().any(|t| t == c)), "get_items_3");
        let long = "a".repeat(70);
        let u = unique(&long, 64, |c| c.len() == 64 && c.chars().all(|x| x == 'a'));
        assert_eq!(u.len(), 64);
        assert!(u.ends_with("_2"));
    }
}
