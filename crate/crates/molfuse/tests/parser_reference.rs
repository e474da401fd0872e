//! Corpus agreement against the recorded reference dump (an independent
//! OpenSMILES reader for atoms/bonds/parity plus a networkx minimum cycle
//! basis for ring sizes).

mod common;

use common::{compare_with_reference, fixture_path, load_reference};

#[test]
fn corpus_agrees_with_reference_dump() {
    let mols = load_reference(&fixture_path("corpus200.ref.tsv"));
    assert_eq!(mols.len(), 200, "corpus must hold exactly 200 molecules");
    let mut failures = Vec::new();
    for m in &mols {
        if let Err(e) = compare_with_reference(m) {
            failures.push(e);
        }
    }
    assert!(
        failures.is_empty(),
        "{} of {} molecules disagree:\n{}",
        failures.len(),
        mols.len(),
        failures.join("\n")
    );
}
