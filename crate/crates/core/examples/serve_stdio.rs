//! Serve a contract as an MCP server on stdin/stdout.
//!
//! `cargo run --example serve_stdio -- spec.yaml .env`, then type e.g.
//! `{"jsonrpc":"2.0","id":1,"method":"tools/list"}`.

use std::path::Path;
use std::sync::Arc;

use automcp::envfile::EnvStore;
use automcp::runtime::{serve_stdio, Runtime, RuntimeConfig};
use automcp::{compile_document, load_document};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/petstore3.yaml").to_string());
    let env_path = args.next().unwrap_or_else(|| ".env".into());
    let compiled = compile_document(&load_document(&spec).unwrap()).unwrap();
    let names = compiled.env_map.variable_names();
    let env = EnvStore::load_with_process(Path::new(&env_path), names.iter().map(String::as_str))?;
    let runtime = Runtime::new(compiled.manifest, env, RuntimeConfig::default()).expect("valid EXTRA_HEADERS");
    // stdout carries protocol frames only, so progress goes to stderr
    eprintln!("serving {} tools", runtime.manifest().tools.len());
    serve_stdio(Arc::new(runtime)).await
}
