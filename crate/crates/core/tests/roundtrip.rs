mod common;

use automcp::harness::{evaluate, run_mock_upstream, sample, EvalOptions, MockConfig};
use automcp::pipeline::compile_document;

#[tokio::test]
async fn every_endpoint_passes_against_the_mock() {
    let raw = common::load("roundtrip.yaml");
    let compiled = compile_document(&raw).unwrap();
    let env = common::credentials(&compiled.env_map, "rt");
    let mock = run_mock_upstream(&compiled.manifest, env.clone(), MockConfig::default(), 0).await.unwrap();
    let opts = EvalOptions { threshold: 25, ..EvalOptions::default() };
    let report = sample(&compiled.manifest, opts.threshold);
    let run = evaluate(&compiled.manifest, &report, &mock, env, &opts).await;
    let failed: Vec<_> = run.report.calls.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(run.report.attempted, 25);
    assert_eq!(run.report.passed, 25);
}

#[tokio::test]
async fn wrong_credentials_fail_everywhere_but_the_public_probe() {
    let raw = common::load("roundtrip.yaml");
    let compiled = compile_document(&raw).unwrap();
    let expected = common::credentials(&compiled.env_map, "right");
    let supplied = common::credentials(&compiled.env_map, "wrong");
    let mock = run_mock_upstream(&compiled.manifest, expected, MockConfig::default(), 0).await.unwrap();
    let opts = EvalOptions { threshold: 25, ..EvalOptions::default() };
    let report = sample(&compiled.manifest, opts.threshold);
    let run = evaluate(&compiled.manifest, &report, &mock, supplied, &opts).await;
    let passed: Vec<&str> = run.report.calls.iter().filter(|c| c.passed).map(|c| c.tool.as_str()).collect();
    assert_eq!(passed, vec!["health"]);
    assert!(run
        .report
        .calls
        .iter()
        .filter(|c| c.tool != "health")
        .all(|c| c.http_status == Some(401)));
    // nothing the server wrote back may echo a supplied credential
    assert!(!run.wire.contains("wrong-"), "credential leaked onto the wire");
}
