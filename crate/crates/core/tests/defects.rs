mod common;

use automcp::doctor::{fix_loop, lint_document, FailureClass, Rules, DEFAULT_FIX_CAP};
use automcp::envfile::{self, EnvStore};
use automcp::harness::{evaluate_document, EvalOptions, Scenario};

fn every_endpoint(s: &Scenario) -> EvalOptions {
    EvalOptions {
        threshold: usize::MAX,
        ..s.options()
    }
}

/// Writes the scenario's credentials to a `.env`, applies `lines` to it and reads it back.
fn through_env_file(scenario: &Scenario, lines: &[String]) -> Scenario {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(".env");
    let pairs: Vec<(&str, &str)> = scenario.env.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    envfile::write_vars(&path, &pairs).unwrap();
    let updates: Vec<(&str, &str)> = lines.iter().map(|l| l.split_once('=').unwrap()).collect();
    envfile::write_vars(&path, &updates).unwrap();
    let store = EnvStore::load(&path).unwrap();
    let mut s = scenario.clone();
    s.env = store.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    s
}

#[tokio::test]
async fn unpatched_defects_fail_where_expected() {
    // (fixture, compiles, passing endpoints, total endpoints)
    let expected = [
        ("a_apaleo", false, 0, 6),
        ("b_adp", false, 0, 7),
        ("c_notion", true, 0, 6),
        ("d_gitlab", true, 3, 8),
        ("e_openroute", true, 5, 24),
    ];
    for (name, compiles, passed, total) in expected {
        let case = common::defect(name);
        let run = evaluate_document(&case.raw, &case.scenario, &every_endpoint(&case.scenario)).await.unwrap();
        let r = &run.report;
        assert_eq!(r.compiled, compiles, "{name}: {:?}", r.compile_error);
        assert_eq!((r.passed, r.attempted), (passed, total), "{name}");
    }
}

#[tokio::test]
async fn each_defect_is_found_and_repaired_within_its_reference_size() {
    for (name, class) in common::DEFECTS.iter().zip(FailureClass::ALL) {
        let case = common::defect(name);
        let findings = lint_document(&case.raw, &case.rules).unwrap();
        assert!(!findings.is_empty(), "{name}: no findings");
        assert!(findings.iter().all(|f| f.class == class), "{name}: {findings:?}");

        let out = fix_loop(&case.raw, &case.rules, DEFAULT_FIX_CAP).unwrap();
        assert!(out.report.is_clean(), "{name}: {:?}", out.report.residual);
        assert!(
            out.report.loc_changed_total <= case.reference_loc,
            "{name}: {} lines changed, reference fix has {}",
            out.report.loc_changed_total,
            case.reference_loc
        );

        let scenario = through_env_file(&case.scenario, &out.report.suggestions());
        let run = evaluate_document(&out.document, &scenario, &every_endpoint(&scenario)).await.unwrap();
        let failed: Vec<_> = run.report.calls.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{name}: {failed:#?}");
        assert_eq!(run.report.passed, run.report.attempted);
    }
}

#[test]
fn header_advisory_is_the_only_class_c_output() {
    let case = common::defect("c_notion");
    let out = fix_loop(&case.raw, &case.rules, DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.report.loc_changed_total, 0);
    assert_eq!(out.report.suggestions(), vec![r#"EXTRA_HEADERS={"Notion-Version":"2022-06-28"}"#.to_string()]);
}

#[test]
fn clean_fixtures_produce_no_findings() {
    for rel in ["petstore3.yaml", "roundtrip.yaml", "library_swagger2.yaml", "trello.yaml"] {
        let findings = lint_document(&common::load(rel), &Rules::default()).unwrap();
        assert!(findings.is_empty(), "{rel}: {findings:#?}");
    }
}
