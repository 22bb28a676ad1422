//! `.env` files: one `KEY=value` per line, `#` comments, values taken verbatim.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

/// Snapshot of credentials and settings visible to the runtime.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnvStore {
    vars: BTreeMap<String, String>,
}

impl EnvStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Self {
        let mut vars = BTreeMap::new();
        for line in text.lines() {
            if let Some((k, v)) = parse_line(line) {
                vars.insert(k.to_string(), v.to_string());
            }
        }
        Self { vars }
    }

    /// Reads `path` (a missing file yields an empty store).
    pub fn load(path: &Path) -> io::Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(Self::parse(&text)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e),
        }
    }

    /// Reads `path` and lets process environment variables override it for the given keys.
    pub fn load_with_process<'a>(path: &Path, keys: impl IntoIterator<Item = &'a str>) -> io::Result<Self> {
        let mut store = Self::load(path)?;
        for key in keys {
            if let Ok(v) = std::env::var(key) {
                store.set(key, v);
            }
        }
        Ok(store)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str)
    }

    /// Value for `key` when it is set and non-empty.
    pub fn non_empty(&self, key: &str) -> Option<&str> {
        self.get(key).filter(|v| !v.is_empty())
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.vars.insert(key.into(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// All non-empty values; used to scrub secrets from anything leaving the process.
    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.vars.values().map(String::as_str).filter(|v| !v.is_empty())
    }
}

fn parse_line(line: &str) -> Option<(&str, &str)> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return None;
    }
    let (k, v) = trimmed.split_once('=')?;
    let k = k.trim();
    let k = k.strip_prefix("export ").map(str::trim).unwrap_or(k);
    if k.is_empty() {
        return None;
    }
    Some((k, v.trim()))
}

/// Sets `updates` in the `.env` text, replacing existing assignments in place and
/// appending new ones; every other line is kept untouched.
pub fn upsert(text: &str, updates: &[(&str, &str)]) -> String {
    let mut done = vec![false; updates.len()];
    let mut out = String::with_capacity(text.len() + 64);
    for line in text.lines() {
        let replaced = parse_line(line).and_then(|(k, _)| {
            updates.iter().position(|(key, _)| *key == k).map(|i| {
                done[i] = true;
                format!("{}={}", updates[i].0, updates[i].1)
            })
        });
        out.push_str(replaced.as_deref().unwrap_or(line));
        out.push('\n');
    }
    for (i, (k, v)) in updates.iter().enumerate() {
        if !done[i] {
            out.push_str(&format!("{k}={v}\n"));
        }
    }
    out
}

pub fn write_vars(path: &Path, updates: &[(&str, &str)]) -> io::Result<()> {
    let existing = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e),
    };
    std::fs::write(path, upsert(&existing, updates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_raw_values() {
        let store = EnvStore::parse("# c\nA=1\n\nEXTRA_HEADERS={\"X-A\": \"b=c\"}\nEMPTY=\n");
        assert_eq!(store.get("A"), Some("1"));
        assert_eq!(store.get("EXTRA_HEADERS"), Some("{\"X-A\": \"b=c\"}"));
        assert_eq!(store.get("EMPTY"), Some(""));
        assert_eq!(store.non_empty("EMPTY"), None);
    }

    #[test]
    fn upsert_keeps_other_lines() {
        let text = "# header\nA=\nB=2\n";
        assert_eq!(upsert(text, &[("A", "tok"), ("C", "3")]), "# header\nA=tok\nB=2\nC=3\n");
    }
}
