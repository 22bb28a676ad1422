//! Credential injection and secret redaction.

use base64::Engine;
use serde_json::Value;
use thiserror::Error;

use crate::envfile::EnvStore;
use crate::security::{EnvMap, Injection, SchemeKind, SecurityScheme, EXTRA_HEADERS};

/// Headers, query pairs and cookies added to one upstream request.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionPlan {
    pub headers: Vec<(String, String)>,
    pub query: Vec<(String, String)>,
    pub cookies: Vec<(String, String)>,
}

impl InjectionPlan {
    /// Sets a header, replacing any existing one with the same case-insensitive name.
    pub fn set_header(&mut self, name: &str, value: &str) {
        self.headers.retain(|(k, _)| !k.eq_ignore_ascii_case(name));
        self.headers.push((name.to_string(), value.to_string()));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("missing credential: set {}", .vars.join(", "))]
pub struct MissingCredential {
    /// Variables that would satisfy the first requirement alternative.
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{EXTRA_HEADERS} must be a JSON object of header names to string values: {reason}")]
pub struct ExtraHeadersError {
    pub reason: String,
}

/// Picks the first requirement alternative whose every binding has a value and
/// turns it into an injection plan. Empty requirements need nothing.
pub fn resolve_auth(
    requirements: &[Vec<String>],
    schemes: &[SecurityScheme],
    env_map: &EnvMap,
    env: &EnvStore,
) -> Result<InjectionPlan, MissingCredential> {
    if requirements.is_empty() || requirements.iter().any(Vec::is_empty) {
        return Ok(InjectionPlan::default());
    }
    let mut first_missing: Option<Vec<String>> = None;
    for set in requirements {
        let mut plan = InjectionPlan::default();
        let mut missing = Vec::new();
        for scheme_id in set {
            let Some(scheme) = schemes.iter().find(|s| &s.id == scheme_id) else {
                missing.push(format!("<undeclared scheme {scheme_id}>"));
                continue;
            };
            let mut basic = (None, None);
            for binding in env_map.bindings_for(scheme_id) {
                let Some(value) = env.non_empty(&binding.env_var) else {
                    missing.push(binding.env_var.clone());
                    continue;
                };
                match (binding.injection, &scheme.kind) {
                    (Injection::HeaderApiKey, SchemeKind::ApiKey { parameter_name, .. }) => {
                        plan.set_header(parameter_name, value)
                    }
                    (Injection::QueryApiKey, SchemeKind::ApiKey { parameter_name, .. }) => {
                        plan.query.push((parameter_name.clone(), value.to_string()))
                    }
                    (Injection::CookieApiKey, SchemeKind::ApiKey { parameter_name, .. }) => {
                        plan.cookies.push((parameter_name.clone(), value.to_string()))
                    }
                    (Injection::BasicUsername, _) => basic.0 = Some(value),
                    (Injection::BasicPassword, _) => basic.1 = Some(value),
                    (Injection::BearerToken | Injection::Oauth2AccessToken, _) => {
                        plan.set_header("Authorization", &format!("Bearer {value}"))
                    }
                    _ => {}
                }
            }
            if let (Some(user), Some(pass)) = basic {
                plan.set_header("Authorization", &format!("Basic {}", basic_token(user, pass)));
            }
        }
        if missing.is_empty() {
            return Ok(plan);
        }
        first_missing.get_or_insert(missing);
    }
    Err(MissingCredential {
        vars: first_missing.unwrap_or_default(),
    })
}

pub fn basic_token(user: &str, pass: &str) -> String {
    base64::engine::general_purpose::STANDARD.encode(format!("{user}:{pass}"))
}

/// Parses `EXTRA_HEADERS`; an unset or empty variable yields no headers.
pub fn parse_extra_headers(env: &EnvStore) -> Result<Vec<(String, String)>, ExtraHeadersError> {
    let Some(raw) = env.non_empty(EXTRA_HEADERS) else {
        return Ok(Vec::new());
    };
    let parsed: Value = serde_json::from_str(raw).map_err(|e| ExtraHeadersError { reason: e.to_string() })?;
    let Value::Object(map) = parsed else {
        return Err(ExtraHeadersError {
            reason: "value is not an object".into(),
        });
    };
    map.into_iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k, s)),
            Value::Number(n) => Ok((k, n.to_string())),
            Value::Bool(b) => Ok((k, b.to_string())),
            _ => Err(ExtraHeadersError {
                reason: format!("header `{k}` must have a string value"),
            }),
        })
        .collect()
}

/// Merges extra headers last so they win over anything already planned.
pub fn merge_extra_headers(mut plan: InjectionPlan, extra: &[(String, String)]) -> InjectionPlan {
    for (k, v) in extra {
        plan.set_header(k, v);
    }
    plan
}

/// Scrubs credential values (and their common encodings) out of text.
#[derive(Debug, Clone, Default)]
pub struct Redactor {
    secrets: Vec<String>,
}

pub const REDACTED: &str = "***";

impl Redactor {
    pub fn new(env_map: &EnvMap, env: &EnvStore) -> Self {
        let mut secrets: Vec<String> = Vec::new();
        let value = |var: &str| env.non_empty(var).map(str::to_string);
        for b in &env_map.bindings {
            if let Some(v) = value(&b.env_var) {
                let encoded = percent_encoding::utf8_percent_encode(&v, percent_encoding::NON_ALPHANUMERIC).to_string();
                let form: String = url::form_urlencoded::byte_serialize(v.as_bytes()).collect();
                secrets.extend([v, encoded, form]);
            }
        }
        for scheme in env_map.bindings.iter().map(|b| &b.scheme_id) {
            let mut user = None;
            let mut pass = None;
            for b in env_map.bindings_for(scheme) {
                match b.injection {
                    Injection::BasicUsername => user = value(&b.env_var),
                    Injection::BasicPassword => pass = value(&b.env_var),
                    _ => {}
                }
            }
            if let (Some(u), Some(p)) = (user, pass) {
                secrets.push(basic_token(&u, &p));
            }
        }
        // companion OAuth variables are secrets too even though nothing injects them
        for (k, v) in env.iter() {
            if !v.is_empty() && (k.ends_with("_CLIENT_SECRET") || k.ends_with("_REFRESH_TOKEN")) {
                secrets.push(v.to_string());
            }
        }
        secrets.retain(|s| s.len() >= 3);
        secrets.sort_by_key(|s| std::cmp::Reverse(s.len()));
        secrets.dedup();
        Self { secrets }
    }

    pub fn from_values(values: impl IntoIterator<Item = String>) -> Self {
        let mut secrets: Vec<String> = values.into_iter().filter(|s| s.len() >= 3).collect();
        secrets.sort_by_key(|s| std::cmp::Reverse(s.len()));
        secrets.dedup();
        Self { secrets }
    }

    pub fn redact(&self, text: &str) -> String {
        let mut out = text.to_string();
        for s in &self.secrets {
            if out.contains(s.as_str()) {
                out = out.replace(s.as_str(), REDACTED);
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }
}
