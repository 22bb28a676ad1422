mod common;

use automcp::refs::flatten;
use common::refdag::{contains_ref, dag, document, graph, substitute_to_fixpoint};
use proptest::prelude::*;
use serde_json::Value;

fn scalars(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => m.values().for_each(|c| scalars(c, out)),
        Value::Array(a) => a.iter().for_each(|c| scalars(c, out)),
        s => out.push(s.to_string()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flatten_matches_the_substitution_oracle(nodes in dag(50)) {
        let doc = document(&nodes);
        let flat = flatten(&doc).unwrap();
        prop_assert!(flat.cycles_detected.is_empty());
        prop_assert_eq!(&flat.tree, &substitute_to_fixpoint(&doc));
    }

    #[test]
    fn flatten_terminates_on_cyclic_graphs(nodes in graph(30)) {
        let doc = document(&nodes);
        let flat = flatten(&doc).unwrap();
        prop_assert!(!contains_ref(&flat.tree));
        let self_loop = nodes.iter().enumerate().any(|(i, n)| n.refs.iter().any(|(t, _)| *t == i));
        if self_loop {
            prop_assert!(!flat.cycles_detected.is_empty());
        }
    }

    #[test]
    fn every_original_scalar_survives(nodes in dag(30)) {
        let doc = document(&nodes);
        let flat = flatten(&doc).unwrap();
        let mut before = Vec::new();
        let mut after = Vec::new();
        scalars(&doc, &mut before);
        scalars(&flat.tree, &mut after);
        for s in before.iter().filter(|s| !s.starts_with("\"#/")) {
            prop_assert!(after.contains(s), "{} lost", s);
        }
    }
}
