//! Evaluate every tool of a contract against the credential-checking mock upstream.

use automcp::envfile::EnvStore;
use automcp::harness::{evaluate, run_mock_upstream, sample, EvalOptions, EvalReport, MockConfig};
use automcp::{compile_document, load_document};

#[tokio::main]
async fn main() {
    let raw = load_document(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/roundtrip.yaml")).unwrap();
    let compiled = compile_document(&raw).unwrap();
    let mut env = EnvStore::new();
    for b in &compiled.env_map.bindings {
        env.set(b.env_var.clone(), format!("demo-{}", b.env_var.to_ascii_lowercase()));
    }
    let mock = run_mock_upstream(&compiled.manifest, env.clone(), MockConfig::default(), 0).await.unwrap();
    let opts = EvalOptions { threshold: usize::MAX, ..EvalOptions::default() };
    let picked = sample(&compiled.manifest, opts.threshold);
    let run = evaluate(&compiled.manifest, &picked, &mock, env, &opts).await;
    print!("{}", EvalReport::new(vec![run.report]).render_table());
    println!("{} upstream requests", mock.requests().len());
    mock.shutdown().await;
}
