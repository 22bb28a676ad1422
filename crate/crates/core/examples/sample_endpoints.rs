//! Pick a diverse subset of endpoints per resource group.

use automcp::harness::sample;
use automcp::{compile_document, load_document};

fn main() {
    let threshold = std::env::args().nth(1).and_then(|t| t.parse().ok()).unwrap_or(5);
    let raw = load_document(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/petstore3.yaml")).unwrap();
    let manifest = compile_document(&raw).unwrap().manifest;
    let report = sample(&manifest, threshold);
    print!("{}", report.render_table());
}
