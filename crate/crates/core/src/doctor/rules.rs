//! Vendor rules: facts about an API that its contract does not state.
//!
//! The file is a JSON object keyed by a case-insensitive regex over the API
//! title. A value is either a plain header map or an extended rule:
//!
//! ```json
//! {
//!   "^Notion": {"Notion-Version": "2022-06-28"},
//!   "ADP": {"base_url": "https://api.adp.com"},
//!   "GitLab": {"string_params": ["project_id"]}
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendorRule {
    /// Headers every request must carry (class C advisories).
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    /// Absolute base URL used to repair class B defects.
    #[serde(default)]
    pub base_url: Option<String>,
    /// Token endpoint used to repair OAuth2 flows missing one.
    #[serde(default)]
    pub token_url: Option<String>,
    /// Path parameters known to carry string identifiers (class D).
    #[serde(default)]
    pub string_params: Vec<String>,
    /// Scheme declarations to insert when a requirement names an undeclared scheme.
    #[serde(default)]
    pub schemes: Map<String, Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RuleEntry {
    Extended(VendorRule),
    Headers(BTreeMap<String, String>),
}

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("cannot read rules file: {0}")]
    Io(#[from] std::io::Error),
    #[error("rules file is not a JSON object of rules: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid title pattern {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Rules {
    entries: Vec<(Regex, VendorRule)>,
}

impl Rules {
    pub fn parse(text: &str) -> Result<Self, RulesError> {
        let raw: serde_json::Map<String, Value> = serde_json::from_str(text)?;
        let mut entries = Vec::new();
        for (pattern, value) in raw {
            let re = Regex::new(&format!("(?i){pattern}")).map_err(|source| RulesError::Pattern {
                pattern: pattern.clone(),
                source,
            })?;
            let rule = match serde_json::from_value::<RuleEntry>(value)? {
                RuleEntry::Extended(r) => r,
                RuleEntry::Headers(headers) => VendorRule {
                    headers,
                    ..Default::default()
                },
            };
            entries.push((re, rule));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, RulesError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// All rules whose pattern matches `title`, merged in file order.
    pub fn for_title(&self, title: &str) -> VendorRule {
        let mut merged = VendorRule::default();
        for (re, rule) in &self.entries {
            if !re.is_match(title) {
                continue;
            }
            merged.headers.extend(rule.headers.clone());
            merged.base_url = rule.base_url.clone().or(merged.base_url);
            merged.token_url = rule.token_url.clone().or(merged.token_url);
            merged.string_params.extend(rule.string_params.iter().cloned());
            merged.schemes.extend(rule.schemes.clone());
        }
        merged
    }
}
