//! Security schemes, their environment-variable bindings and the `.env` template.

mod oauth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::doctor::FailureClass;
use crate::ident;
use crate::ingest::OPERATION_KEYS;
use crate::pointer;
use crate::refs::FlattenedContract;

pub use oauth::{acquire_oauth_token, request_client_credentials_token, OAuthError, OAuthLogin, TokenSet};

/// Variable holding a JSON object of headers merged into every upstream request.
pub const EXTRA_HEADERS: &str = "EXTRA_HEADERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiKeyLocation {
    Header,
    Query,
    Cookie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OAuthGrant {
    AuthorizationCode,
    ClientCredentials,
}

/// The one OAuth2 flow this scheme will actually be driven through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OAuth2Flows {
    pub grant: OAuthGrant,
    pub authorization_url: Option<String>,
    pub token_url: Option<String>,
    pub scopes: BTreeMap<String, String>,
}

impl OAuth2Flows {
    pub fn authorization_code_usable(&self) -> bool {
        self.grant == OAuthGrant::AuthorizationCode
            && self.authorization_url.as_deref().is_some_and(|u| !u.is_empty())
            && self.token_url.as_deref().is_some_and(|u| !u.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    ApiKey {
        location: ApiKeyLocation,
        parameter_name: String,
    },
    HttpBasic,
    HttpBearer,
    Oauth2 {
        flows: OAuth2Flows,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityScheme {
    pub id: String,
    #[serde(flatten)]
    pub kind: SchemeKind,
}

impl SecurityScheme {
    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            SchemeKind::ApiKey { .. } => "api_key",
            SchemeKind::HttpBasic => "http_basic",
            SchemeKind::HttpBearer => "http_bearer",
            SchemeKind::Oauth2 { .. } => "oauth2",
            SchemeKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("security scheme `{scheme}` ({pointer}): {reason}")]
pub struct SchemeError {
    pub scheme: String,
    pub pointer: String,
    pub reason: String,
    /// Lint class this condition maps to (always A).
    pub class: FailureClass,
}

fn scheme_error(scheme: &str, pointer: String, reason: impl Into<String>) -> SchemeError {
    SchemeError {
        scheme: scheme.to_string(),
        pointer,
        reason: reason.into(),
        class: FailureClass::A,
    }
}

/// Reads a `security` array into alternatives of conjunctive scheme-id sets.
pub fn requirement_sets(value: &Value) -> Vec<Vec<String>> {
    value
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_object)
        .map(|set| set.keys().cloned().collect())
        .collect()
}

pub fn extract_security(contract: &FlattenedContract) -> Result<Vec<SecurityScheme>, SchemeError> {
    let tree = &contract.tree;
    let mut schemes = Vec::new();
    if let Some(map) = tree.pointer("/components/securitySchemes").and_then(Value::as_object) {
        for (id, spec) in map {
            let ptr = pointer::join(["components", "securitySchemes", id.as_str()]);
            schemes.push(SecurityScheme {
                id: id.clone(),
                kind: parse_scheme(id, spec, &ptr)?,
            });
        }
    }
    check_requirements_declared(tree, &schemes)?;
    Ok(schemes)
}

fn check_requirements_declared(tree: &Value, schemes: &[SecurityScheme]) -> Result<(), SchemeError> {
    let declared = |id: &str| schemes.iter().any(|s| s.id == id);
    let mut stanzas: Vec<(String, &Value)> = Vec::new();
    if let Some(sec) = tree.get("security") {
        stanzas.push(("/security".into(), sec));
    }
    for (path, item) in tree.get("paths").and_then(Value::as_object).into_iter().flatten() {
        for method in OPERATION_KEYS {
            if let Some(sec) = item.get(method).and_then(|op| op.get("security")) {
                stanzas.push((pointer::join(["paths", path.as_str(), method, "security"]), sec));
            }
        }
    }
    for (ptr, stanza) in stanzas {
        for set in requirement_sets(stanza) {
            if let Some(missing) = set.iter().find(|id| !declared(id)) {
                return Err(scheme_error(missing, ptr, "referenced by a security requirement but never declared"));
            }
        }
    }
    Ok(())
}

fn parse_scheme(id: &str, spec: &Value, ptr: &str) -> Result<SchemeKind, SchemeError> {
    let ty = spec.get("type").and_then(Value::as_str).unwrap_or("");
    match ty {
        "apiKey" => {
            let name = spec.get("name").and_then(Value::as_str).unwrap_or("");
            let location = match spec.get("in").and_then(Value::as_str) {
                Some("header") => ApiKeyLocation::Header,
                Some("query") => ApiKeyLocation::Query,
                Some("cookie") => ApiKeyLocation::Cookie,
                _ => return Err(scheme_error(id, ptr.into(), "apiKey scheme needs `in` of header, query or cookie")),
            };
            if name.is_empty() {
                return Err(scheme_error(id, ptr.into(), "apiKey scheme needs a parameter `name`"));
            }
            Ok(SchemeKind::ApiKey {
                location,
                parameter_name: name.to_string(),
            })
        }
        "http" => match spec.get("scheme").and_then(Value::as_str).map(str::to_ascii_lowercase).as_deref() {
            Some("basic") => Ok(SchemeKind::HttpBasic),
            Some("bearer") => Ok(SchemeKind::HttpBearer),
            other => Err(scheme_error(
                id,
                ptr.into(),
                format!("unsupported http auth scheme {:?}", other.unwrap_or("")),
            )),
        },
        "oauth2" => parse_flows(id, spec, ptr).map(|flows| SchemeKind::Oauth2 { flows }),
        other => Err(scheme_error(id, ptr.into(), format!("unrecognized scheme type {other:?}"))),
    }
}

fn parse_flows(id: &str, spec: &Value, ptr: &str) -> Result<OAuth2Flows, SchemeError> {
    let flows = spec.get("flows").and_then(Value::as_object);
    let read = |name: &str| -> Option<OAuth2Flows> {
        let flow = flows?.get(name)?;
        let s = |k: &str| flow.get(k).and_then(Value::as_str).filter(|v| !v.is_empty()).map(str::to_string);
        let scopes = flow
            .get("scopes")
            .and_then(Value::as_object)
            .map(|m| {
                m.iter()
                    .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string()))
                    .collect()
            })
            .unwrap_or_default();
        Some(OAuth2Flows {
            grant: if name == "authorizationCode" {
                OAuthGrant::AuthorizationCode
            } else {
                OAuthGrant::ClientCredentials
            },
            authorization_url: s("authorizationUrl"),
            token_url: s("tokenUrl"),
            scopes,
        })
    };
    if let Some(code) = read("authorizationCode") {
        if code.authorization_code_usable() {
            return Ok(code);
        }
    }
    if let Some(cc) = read("clientCredentials") {
        if cc.token_url.is_some() {
            return Ok(cc);
        }
    }
    let declared: Vec<&str> = flows.map(|f| f.keys().map(String::as_str).collect()).unwrap_or_default();
    let reason = if declared.contains(&"authorizationCode") {
        "authorizationCode flow is missing its tokenUrl or authorizationUrl".to_string()
    } else if declared.is_empty() {
        "oauth2 scheme declares no flows".to_string()
    } else {
        format!(
            "no usable flow (found {}); only authorizationCode and clientCredentials with a tokenUrl are supported",
            declared.join(", ")
        )
    };
    Err(scheme_error(id, ptr.into(), reason))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    HeaderApiKey,
    QueryApiKey,
    CookieApiKey,
    BasicUsername,
    BasicPassword,
    BearerToken,
    Oauth2AccessToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvBinding {
    pub env_var: String,
    pub scheme_id: String,
    pub injection: Injection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvMap {
    pub bindings: Vec<EnvBinding>,
    /// Text of the `.env` template; placeholders only.
    pub template: String,
}

impl EnvMap {
    pub fn bindings_for<'a>(&'a self, scheme_id: &'a str) -> impl Iterator<Item = &'a EnvBinding> + 'a {
        self.bindings.iter().filter(move |b| b.scheme_id == scheme_id)
    }

    /// Every variable the runtime may read.
    pub fn variable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.bindings.iter().map(|b| b.env_var.clone()).collect();
        names.push(EXTRA_HEADERS.to_string());
        names
    }
}

/// Prefix derived from the API title, e.g. `Trello` -> `TRELLO`.
pub fn env_prefix(api_title: &str) -> String {
    let mut parts: Vec<String> = ident::snake_words(api_title).to_ascii_uppercase().split('_').map(str::to_string).collect();
    while parts.len() > 1 && matches!(parts.last().map(String::as_str), Some("API" | "REST" | "OPENAPI" | "SPEC")) {
        parts.pop();
    }
    let prefix = parts.join("_");
    if prefix.is_empty() || matches!(prefix.as_str(), "API" | "REST" | "OPENAPI") {
        "API".to_string()
    } else if prefix.starts_with(|c: char| c.is_ascii_digit()) {
        format!("API_{prefix}")
    } else {
        prefix
    }
}

fn api_key_role(parameter_name: &str) -> String {
    let mut role = ident::screaming(parameter_name);
    if let Some(rest) = role.strip_prefix("X_") {
        role = rest.to_string();
    }
    if role.is_empty() {
        role = "KEY".into();
    }
    if role.starts_with("API") {
        role
    } else {
        format!("API_{role}")
    }
}

pub fn build_env_map(schemes: &[SecurityScheme], api_title: &str) -> EnvMap {
    let prefix = env_prefix(api_title);
    let mut bindings: Vec<EnvBinding> = Vec::new();
    let mut template = String::new();
    let mut taken: Vec<String> = Vec::new();

    let mut bind = |role: &str, scheme: &SecurityScheme, injection: Injection, taken: &mut Vec<String>| {
        let mut var = format!("{prefix}_{role}");
        if taken.contains(&var) {
            var = format!("{prefix}_{role}_{}", ident::screaming(&scheme.id));
        }
        let var = ident::unique(&var, usize::MAX, |c| taken.iter().any(|t| t == c));
        taken.push(var.clone());
        bindings.push(EnvBinding {
            env_var: var.clone(),
            scheme_id: scheme.id.clone(),
            injection,
        });
        var
    };

    for scheme in schemes {
        match &scheme.kind {
            SchemeKind::ApiKey {
                location,
                parameter_name,
            } => {
                let injection = match location {
                    ApiKeyLocation::Header => Injection::HeaderApiKey,
                    ApiKeyLocation::Query => Injection::QueryApiKey,
                    ApiKeyLocation::Cookie => Injection::CookieApiKey,
                };
                let var = bind(&api_key_role(parameter_name), scheme, injection, &mut taken);
                let loc = match location {
                    ApiKeyLocation::Header => "header",
                    ApiKeyLocation::Query => "query parameter",
                    ApiKeyLocation::Cookie => "cookie",
                };
                template.push_str(&format!("# {}: API key sent as {loc} `{parameter_name}`\n{var}=\n", scheme.id));
            }
            SchemeKind::HttpBasic => {
                let user = bind("USERNAME", scheme, Injection::BasicUsername, &mut taken);
                let pass = bind("PASSWORD", scheme, Injection::BasicPassword, &mut taken);
                template.push_str(&format!("# {}: HTTP basic credentials\n{user}=\n{pass}=\n", scheme.id));
            }
            SchemeKind::HttpBearer => {
                let var = bind("BEARER_TOKEN", scheme, Injection::BearerToken, &mut taken);
                template.push_str(&format!("# {}: bearer token\n{var}=\n", scheme.id));
            }
            SchemeKind::Oauth2 { flows } => {
                let var = bind("ACCESS_TOKEN", scheme, Injection::Oauth2AccessToken, &mut taken);
                let companion = oauth_companion_vars(&var);
                let how = match flows.grant {
                    OAuthGrant::AuthorizationCode => "filled in by `automcp login`",
                    OAuthGrant::ClientCredentials => "client credentials grant",
                };
                template.push_str(&format!(
                    "# {}: OAuth2 access token ({how})\n{var}=\n{}=\n{}=\n{}=\n",
                    scheme.id, companion.refresh_token, companion.client_id, companion.client_secret
                ));
            }
            SchemeKind::None => {}
        }
    }
    template.push_str("# JSON object of extra headers merged into every request\n");
    template.push_str(EXTRA_HEADERS);
    template.push_str("=\n");
    EnvMap { bindings, template }
}

/// Variables that accompany an OAuth2 access-token binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OAuthCompanionVars {
    pub refresh_token: String,
    pub client_id: String,
    pub client_secret: String,
}

pub fn oauth_companion_vars(access_var: &str) -> OAuthCompanionVars {
    let stem = access_var
        .strip_suffix("_ACCESS_TOKEN")
        .map(str::to_string)
        .or_else(|| access_var.split_once("_ACCESS_TOKEN_").map(|(a, b)| format!("{a}_{b}")))
        .unwrap_or_else(|| access_var.to_string());
    OAuthCompanionVars {
        refresh_token: format!("{stem}_REFRESH_TOKEN"),
        client_id: format!("{stem}_CLIENT_ID"),
        client_secret: format!("{stem}_CLIENT_SECRET"),
    }
}
