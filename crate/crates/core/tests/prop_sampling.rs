mod common;

use std::collections::BTreeMap;

use automcp::harness::{greedy_cover, sample};
use automcp::ingest::parse_document;
use automcp::pipeline::compile_document;
use common::sampling::{axes_group, axes_of, brute_force_min_cover, manifest_doc, union};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn every_group_axis_is_covered(doc in manifest_doc(30), threshold in 0usize..12) {
        let raw = parse_document(&doc.to_string(), "s.json").unwrap();
        let manifest = compile_document(&raw).unwrap().manifest;
        let report = sample(&manifest, threshold);
        prop_assert_eq!(&report, &sample(&manifest, threshold));

        let mut by_group: BTreeMap<String, Vec<&automcp::ToolSpec>> = BTreeMap::new();
        for t in &manifest.tools {
            by_group.entry(automcp::harness::resource_group(&t.endpoint.path_template)).or_default().push(t);
        }
        prop_assert_eq!(by_group.keys().collect::<Vec<_>>(), report.groups.keys().collect::<Vec<_>>());
        for (group, tools) in &by_group {
            let all: Vec<_> = tools.iter().map(|t| axes_of(&manifest, t)).collect();
            let picked: Vec<_> = report.groups[group]
                .iter()
                .map(|s| axes_of(&manifest, manifest.tool(&s.tool).unwrap()))
                .collect();
            let want = union(&all.iter().collect::<Vec<_>>());
            let got = union(&picked.iter().collect::<Vec<_>>());
            prop_assert_eq!(&want, &got, "group {}", group);
            if !report.stratified {
                prop_assert_eq!(picked.len(), tools.len());
            }
        }
        prop_assert_eq!(report.total_selected, report.groups.values().map(Vec::len).sum::<usize>());
    }

    #[test]
    fn greedy_stays_within_two_of_the_minimum_cover(axes in axes_group(10)) {
        let picked = greedy_cover(&axes);
        let chosen: Vec<_> = picked.iter().map(|(i, _)| &axes[*i]).collect();
        prop_assert_eq!(union(&chosen), union(&axes.iter().collect::<Vec<_>>()));
        let best = brute_force_min_cover(&axes);
        prop_assert!(picked.len() <= best + 2, "greedy {} vs optimum {}", picked.len(), best);
        for (_, score) in &picked {
            prop_assert_eq!(score.value, score.novel_verb as u8 + score.novel_auth as u8 + score.novel_param_modality as u8);
        }
    }
}
