mod common;

use automcp::harness::{run_mock_upstream, MockConfig};
use automcp::pipeline::compile_document;
use serde_json::{json, Value};

async fn library() -> (automcp::harness::MockHandle, automcp::envfile::EnvStore) {
    let compiled = compile_document(&common::load("library_swagger2.yaml")).unwrap();
    let env = common::credentials(&compiled.env_map, "m");
    let mock = run_mock_upstream(&compiled.manifest, env.clone(), MockConfig::default(), 0).await.unwrap();
    (mock, env)
}

#[tokio::test]
async fn unknown_route_is_404_and_missing_key_is_401() {
    let (mock, env) = library().await;
    let http = reqwest::Client::new();
    let r = http.get(format!("{}/nowhere", mock.base_url())).send().await.unwrap();
    assert_eq!(r.status(), 404);
    let body: Value = r.json().await.unwrap();
    assert!(body.to_string().contains("manifest"), "{body}");

    let r = http.get(format!("{}/books", mock.base_url())).send().await.unwrap();
    assert_eq!(r.status(), 401);
    let key = env.get("LENDING_LIBRARY_API_PATRON_KEY").unwrap();
    let r = http
        .get(format!("{}/books", mock.base_url()))
        .header("X-Patron-Key", key)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 200);
    let logged: Vec<u16> = mock.requests().iter().map(|r| r.status).collect();
    assert_eq!(logged, vec![404, 401, 200]);
}

#[tokio::test]
async fn created_items_are_visible_to_later_reads() {
    let (mock, env) = library().await;
    let http = reqwest::Client::new();
    let user = env.get("LENDING_LIBRARY_USERNAME").unwrap();
    let pass = env.get("LENDING_LIBRARY_PASSWORD").unwrap();
    let key = env.get("LENDING_LIBRARY_API_PATRON_KEY").unwrap();

    let r = http
        .post(format!("{}/books", mock.base_url()))
        .basic_auth(user, Some(pass))
        .json(&json!({"title": "Lathe of Heaven"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 201);
    let created: Value = r.json().await.unwrap();
    let id = created["data"]["id"].clone();
    assert_eq!(created["echo"]["method"], "POST");

    let r = http
        .get(format!("{}/books/{id}", mock.base_url()))
        .header("X-Patron-Key", key)
        .send()
        .await
        .unwrap();
    let got: Value = r.json().await.unwrap();
    assert_eq!(got["data"]["title"], "Lathe of Heaven");

    let r = http
        .get(format!("{}/books", mock.base_url()))
        .header("X-Patron-Key", key)
        .send()
        .await
        .unwrap();
    let list: Value = r.json().await.unwrap();
    assert_eq!(list["data"].as_array().unwrap().len(), 1);

    mock.reset();
    let r = http
        .get(format!("{}/books", mock.base_url()))
        .header("X-Patron-Key", key)
        .send()
        .await
        .unwrap();
    let list: Value = r.json().await.unwrap();
    assert_eq!(list["data"], json!([]));
}

#[tokio::test]
async fn missing_required_form_field_is_400() {
    let (mock, env) = library().await;
    let key = env.get("LENDING_LIBRARY_API_PATRON_KEY").unwrap();
    let r = reqwest::Client::new()
        .post(format!("{}/loans", mock.base_url()))
        .header("X-Patron-Key", key)
        .form(&[("days", "7")])
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 400);
}

#[tokio::test]
async fn port_in_use_is_reported() {
    let (mock, _) = library().await;
    let compiled = compile_document(&common::load("library_swagger2.yaml")).unwrap();
    let err = run_mock_upstream(&compiled.manifest, Default::default(), MockConfig::default(), mock.addr().port())
        .await
        .err()
        .expect("second bind fails");
    assert!(err.to_string().contains(&mock.addr().port().to_string()));
}
