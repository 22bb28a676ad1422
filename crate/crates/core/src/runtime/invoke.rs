//! Turning one tool call into one upstream HTTP request.

use std::time::Duration;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use reqwest::header::{HeaderMap, HeaderName, HeaderValue, CONTENT_TYPE, COOKIE};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use url::Url;

use super::auth::{merge_extra_headers, resolve_auth, InjectionPlan, MissingCredential, Redactor};
use crate::compiler::{HttpMethod, ParamLocation, ToolSpec, BODY_KEY};
use crate::envfile::EnvStore;
use crate::ingest::BaseUrl;
use crate::schema::{self, Violation};
use crate::security::{EnvMap, SecurityScheme};

/// Characters left alone inside a path segment (RFC 3986 unreserved).
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ResponseBody {
    Json(Value),
    Text(String),
}

impl ResponseBody {
    pub fn to_text(&self) -> String {
        match self {
            Self::Json(v) => serde_json::to_string(v).unwrap_or_default(),
            Self::Text(t) => t.clone(),
        }
    }
}

/// What was sent, with credential values removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestEcho {
    pub method: String,
    pub url: String,
    pub header_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvocationResult {
    pub http_status: u16,
    pub body: ResponseBody,
    pub is_error: bool,
    pub request_echo: RequestEcho,
}

#[derive(Debug, Error)]
pub enum InvokeError {
    #[error("arguments do not match the input schema: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    SchemaViolation(Vec<Violation>),
    #[error(transparent)]
    MissingCredential(#[from] MissingCredential),
    #[error("request failed: {0}")]
    Transport(String),
}

/// Everything an invocation needs besides the tool and its arguments.
pub struct InvokeContext<'a> {
    pub client: &'a reqwest::Client,
    pub base: &'a BaseUrl,
    pub schemes: &'a [SecurityScheme],
    pub env_map: &'a EnvMap,
    pub env: &'a EnvStore,
    pub extra_headers: &'a [(String, String)],
    pub timeout: Duration,
    pub redactor: &'a Redactor,
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Builds the final URL: base + substituted path template + query pairs.
pub fn build_url(base: &BaseUrl, tool: &ToolSpec, args: &Value, auth_query: &[(String, String)]) -> Result<Url, String> {
    let mut path = tool.endpoint.path_template.clone();
    for p in tool.endpoint.parameters.iter().filter(|p| p.location == ParamLocation::Path) {
        let raw = args.get(&p.sanitized_name).map(scalar_text).unwrap_or_default();
        let encoded = utf8_percent_encode(&raw, SEGMENT).to_string();
        path = path.replace(&format!("{{{}}}", p.name), &encoded);
    }
    let mut url = Url::parse(&format!("{}{}", base.as_str(), path)).map_err(|e| format!("invalid URL: {e}"))?;
    let mut pairs: Vec<(String, String)> = Vec::new();
    for p in tool.endpoint.parameters.iter().filter(|p| p.location == ParamLocation::Query) {
        match args.get(&p.sanitized_name) {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => pairs.extend(items.iter().map(|i| (p.name.clone(), scalar_text(i)))),
            Some(v) => pairs.push((p.name.clone(), scalar_text(v))),
        }
    }
    pairs.extend(auth_query.iter().cloned());
    if !pairs.is_empty() {
        url.query_pairs_mut().extend_pairs(pairs);
    }
    Ok(url)
}

fn header_map(pairs: &[(String, String)]) -> Result<HeaderMap, String> {
    let mut map = HeaderMap::new();
    for (k, v) in pairs {
        let name = HeaderName::from_bytes(k.as_bytes()).map_err(|_| format!("invalid header name `{k}`"))?;
        let value = HeaderValue::from_str(v).map_err(|_| format!("invalid value for header `{k}`"))?;
        map.insert(name, value);
    }
    Ok(map)
}

fn encode_form(body: &Value) -> String {
    let mut ser = url::form_urlencoded::Serializer::new(String::new());
    if let Some(obj) = body.as_object() {
        for (k, v) in obj {
            ser.append_pair(k, &scalar_text(v));
        }
    }
    ser.finish()
}

pub async fn invoke_tool(tool: &ToolSpec, args: &Value, ctx: &InvokeContext<'_>) -> Result<InvocationResult, InvokeError> {
    let violations = schema::validate(&tool.input_schema, args);
    if !violations.is_empty() {
        return Err(InvokeError::SchemaViolation(violations));
    }
    let ep = &tool.endpoint;
    let plan = resolve_auth(&ep.security, ctx.schemes, ctx.env_map, ctx.env)?;

    let mut request_plan = InjectionPlan::default();
    let mut cookies: Vec<(String, String)> = Vec::new();
    for p in &ep.parameters {
        let Some(v) = args.get(&p.sanitized_name).filter(|v| !v.is_null()) else { continue };
        match p.location {
            ParamLocation::Header => request_plan.set_header(&p.name, &scalar_text(v)),
            ParamLocation::Cookie => cookies.push((p.name.clone(), scalar_text(v))),
            _ => {}
        }
    }
    for (k, v) in &plan.headers {
        request_plan.set_header(k, v);
    }
    cookies.extend(plan.cookies.iter().cloned());
    if !cookies.is_empty() {
        let joined = cookies.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("; ");
        request_plan.set_header(COOKIE.as_str(), &joined);
    }
    let body = ep.request_body.as_ref().zip(args.get(BODY_KEY));
    if let Some((b, _)) = body {
        request_plan.set_header(CONTENT_TYPE.as_str(), &b.media_type);
    }
    let request_plan = merge_extra_headers(request_plan, ctx.extra_headers);

    let url = build_url(ctx.base, tool, args, &plan.query).map_err(InvokeError::Transport)?;
    let headers = header_map(&request_plan.headers).map_err(InvokeError::Transport)?;
    let echo = RequestEcho {
        method: ep.method.to_string(),
        url: ctx.redactor.redact(url.as_str()),
        header_names: request_plan.headers.iter().map(|(k, _)| k.clone()).collect(),
    };

    let method = match ep.method {
        HttpMethod::Get => reqwest::Method::GET,
        HttpMethod::Post => reqwest::Method::POST,
        HttpMethod::Put => reqwest::Method::PUT,
        HttpMethod::Patch => reqwest::Method::PATCH,
        HttpMethod::Delete => reqwest::Method::DELETE,
        HttpMethod::Head => reqwest::Method::HEAD,
        HttpMethod::Options => reqwest::Method::OPTIONS,
    };
    let mut req = ctx.client.request(method, url).headers(headers).timeout(ctx.timeout);
    if let Some((b, v)) = body {
        let media = b.media_type.split(';').next().unwrap_or("").trim();
        req = if b.json {
            req.body(serde_json::to_vec(v).unwrap_or_default())
        } else if media == "application/x-www-form-urlencoded" && v.is_object() {
            req.body(encode_form(v))
        } else {
            req.body(scalar_text(v))
        };
    }

    let response = req
        .send()
        .await
        .map_err(|e| InvokeError::Transport(ctx.redactor.redact(&e.without_url().to_string())))?;
    let status = response.status().as_u16();
    let is_json = response
        .headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(|ct| {
            let base = ct.split(';').next().unwrap_or("").trim();
            base == "application/json" || base.ends_with("+json")
        })
        .unwrap_or(false);
    let text = response
        .text()
        .await
        .map_err(|e| InvokeError::Transport(ctx.redactor.redact(&e.without_url().to_string())))?;
    let body = match is_json.then(|| serde_json::from_str::<Value>(&text).ok()).flatten() {
        Some(v) => ResponseBody::Json(v),
        None => ResponseBody::Text(text),
    };
    tracing::info!(tool = %tool.name, method = %echo.method, url = %echo.url, status, "upstream call");
    Ok(InvocationResult {
        http_status: status,
        is_error: !(200..300).contains(&status),
        body,
        request_echo: echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{EndpointDescriptor, ParamSpec};
    use serde_json::json;

    fn tool(path: &str, params: Vec<ParamSpec>) -> ToolSpec {
        ToolSpec {
            name: "t".into(),
            description: String::new(),
            input_schema: json!({}),
            output_schema: json!({}),
            endpoint: EndpointDescriptor {
                method: HttpMethod::Get,
                path_template: path.into(),
                operation_id: None,
                summary: None,
                description: None,
                parameters: params,
                request_body: None,
                success_schema: None,
                success_status: 200,
                security: vec![],
                tags: vec![],
                deprecated: false,
            },
        }
    }

    fn param(name: &str, location: ParamLocation) -> ParamSpec {
        ParamSpec {
            name: name.into(),
            location,
            required: false,
            schema: json!({}),
            description: None,
            example: None,
            sanitized_name: crate::ident::snake(name),
        }
    }

    #[test]
    fn path_segments_are_encoded() {
        let t = tool("/users/{id}", vec![param("id", ParamLocation::Path)]);
        let base = BaseUrl::parse("https://api.example.com/v1").unwrap();
        let url = build_url(&base, &t, &json!({"id": "a/b"}), &[]).unwrap();
        assert_eq!(url.as_str(), "https://api.example.com/v1/users/a%2Fb");
    }

    #[test]
    fn query_arrays_repeat_and_auth_appends() {
        let t = tool("/s", vec![param("tag", ParamLocation::Query), param("pageSize", ParamLocation::Query)]);
        let base = BaseUrl::parse("http://h").unwrap();
        let url = build_url(&base, &t, &json!({"tag": ["a", "b"], "page_size": 5}), &[("key".into(), "k".into())]).unwrap();
        assert_eq!(url.query(), Some("tag=a&tag=b&pageSize=5&key=k"));
    }
}
