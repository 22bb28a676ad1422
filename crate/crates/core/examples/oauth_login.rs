//! Authorization-code login against a throwaway local identity provider.
//!
//! A real login opens the printed URL in a browser; here a task plays the
//! browser and the token endpoint is a stub that accepts any code.

use std::collections::HashMap;
use std::time::Duration;

use automcp::security::{acquire_oauth_token, OAuthLogin, SchemeKind};
use automcp::{compile_document, load_document};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::json;

#[tokio::main]
async fn main() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let idp = format!("http://{}", listener.local_addr().unwrap());
    let token = post(|| async { Json(json!({"access_token": "demo-access", "refresh_token": "demo-refresh"})) });
    tokio::spawn(async move { axum::serve(listener, Router::new().route("/token", token)).await });

    let raw = load_document(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/roundtrip.yaml")).unwrap();
    let compiled = compile_document(&raw).unwrap();
    let scheme = compiled.schemes.iter().find(|s| matches!(s.kind, SchemeKind::Oauth2 { .. })).unwrap();
    let SchemeKind::Oauth2 { flows } = &scheme.kind else { unreachable!() };
    let mut flows = flows.clone();
    flows.token_url = Some(format!("{idp}/token"));
    let access_var = compiled.env_map.bindings_for(&scheme.id).next().unwrap().env_var.clone();

    let dir = std::env::temp_dir().join("automcp-oauth-example");
    std::fs::create_dir_all(&dir).unwrap();
    let mut login = OAuthLogin::new(flows, access_var, dir.join(".env"));
    login.client_id = "demo-client".into();
    login.redirect_port = 0;
    login.timeout = Duration::from_secs(10);

    let tokens = acquire_oauth_token(&login, |url| {
        println!("open {url}");
        let q: HashMap<_, _> = url.query_pairs().into_owned().collect();
        let callback = format!("{}?code=demo&state={}", q["redirect_uri"], q["state"]);
        tokio::spawn(async move { reqwest::get(callback).await });
    })
    .await
    .unwrap();
    println!("got a {}-byte access token", tokens.access_token.len());
    print!("{}", std::fs::read_to_string(dir.join(".env")).unwrap());
}
