//! Compile a contract and list the tools it becomes.
//!
//! `cargo run --example compile_manifest -- [path/to/openapi.yaml]`

use automcp::{compile_document, load_document};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/petstore3.yaml").to_string());
    let raw = load_document(&path).expect("readable contract");
    let compiled = match compile_document(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    let m = &compiled.manifest;
    println!("{} ({} tools, base {})", m.api_title, m.tools.len(), m.base_url);
    for t in &m.tools {
        println!("  {:<32} {}", t.name, t.endpoint.label());
    }
    for w in &compiled.warnings {
        eprintln!("warning: {w}");
    }
}
