//! Show which `.env` variables a contract's security schemes need.

use automcp::{compile_document, load_document};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/roundtrip.yaml").to_string());
    let compiled = compile_document(&load_document(&path).unwrap()).unwrap();
    for s in &compiled.schemes {
        let vars: Vec<_> = compiled.env_map.bindings_for(&s.id).map(|b| b.env_var.as_str()).collect();
        println!("{:<12} {:<12} {}", s.id, s.kind_label(), vars.join(", "));
    }
    println!("\n{}", compiled.env_map.template);
}
