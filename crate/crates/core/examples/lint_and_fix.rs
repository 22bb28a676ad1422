//! Lint a defective contract, repair it and print the minimal diff.

use std::path::Path;

use automcp::doctor::{fix_loop, lint_document, Rules, DEFAULT_FIX_CAP};
use automcp::load_document;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/defects/d_gitlab");
    let raw = load_document(dir.join("spec.yaml")).unwrap();
    let rules = Rules::load(&dir.join("rules.json")).unwrap();

    for f in lint_document(&raw, &rules).unwrap() {
        println!("[{:?}] {}: {}", f.class, f.location, f.message);
    }
    let out = fix_loop(&raw, &rules, DEFAULT_FIX_CAP).unwrap();
    println!(
        "\n{} iteration(s), {} line(s) changed, clean: {}\n",
        out.report.iterations,
        out.report.loc_changed_total,
        out.report.is_clean()
    );
    print!("{}", out.diff);
}
