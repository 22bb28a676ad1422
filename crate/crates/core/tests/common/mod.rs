#![allow(dead_code)]

pub mod refdag;
pub mod sampling;

use std::path::PathBuf;

use automcp::doctor::Rules;
use automcp::envfile::EnvStore;
use automcp::harness::Scenario;
use automcp::ingest::{load_document, RawDocument};
use automcp::security::{EnvMap, Injection};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn load(rel: &str) -> RawDocument {
    load_document(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// One distinct credential per bound variable, each starting with `marker`.
pub fn credentials(env_map: &EnvMap, marker: &str) -> EnvStore {
    let mut env = EnvStore::new();
    for b in &env_map.bindings {
        let tag = match b.injection {
            Injection::BasicUsername => "user",
            Injection::BasicPassword => "pass",
            _ => "key",
        };
        env.set(b.env_var.clone(), format!("{marker}-{tag}-{}", b.env_var.to_ascii_lowercase()));
    }
    env
}

pub const DEFECTS: [&str; 5] = ["a_apaleo", "b_adp", "c_notion", "d_gitlab", "e_openroute"];

pub struct DefectCase {
    pub name: &'static str,
    pub raw: RawDocument,
    pub rules: Rules,
    pub scenario: Scenario,
    /// Added plus removed lines of the checked-in reference fix.
    pub reference_loc: usize,
}

pub fn defect(name: &'static str) -> DefectCase {
    let dir = fixture("defects").join(name);
    let spec = ["spec.yaml", "spec.json"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.exists())
        .expect("spec file");
    let reference = std::fs::read_to_string(dir.join("reference.diff")).unwrap();
    DefectCase {
        name,
        raw: load_document(&spec).unwrap(),
        rules: Rules::load(&dir.join("rules.json")).unwrap(),
        scenario: serde_json::from_str(&std::fs::read_to_string(dir.join("scenario.json")).unwrap()).unwrap(),
        reference_loc: diff_loc(&reference),
    }
}

/// Changed lines of a unified diff, headers excluded.
pub fn diff_loc(diff: &str) -> usize {
    diff.lines()
        .filter(|l| (l.starts_with('+') && !l.starts_with("+++ ")) || (l.starts_with('-') && !l.starts_with("--- ")))
        .count()
}
