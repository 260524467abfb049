use std::sync::Arc;

use proptest::prelude::*;
use shepherd_core::manifest::build_manifest;
use shepherd_core::{
    canonical_tree, enumerate_paths, parse_manifest, serialize_manifest, validate_manifest, FixedClock,
    RetrievabilityManifest, TraversalSession,
};
use shepherd_testkit::minimal_fields;

fn manifests() -> Vec<RetrievabilityManifest> {
    let tree = Arc::new(canonical_tree());
    let clock = FixedClock::parse("2024-05-01T09:00:00Z").unwrap();
    enumerate_paths(&tree)
        .unwrap()
        .into_iter()
        .map(|path| {
            let mut s = TraversalSession::start(tree.clone(), &clock).unwrap();
            for a in path.answers() {
                s.apply_answer(a).unwrap();
            }
            let leaf = s.current_leaf().unwrap().clone();
            s.set_fields(minimal_fields(&leaf)).unwrap();
            build_manifest(&s, &clock).unwrap()
        })
        .collect()
}

#[test]
fn every_leaf_validates_clean_and_mutants_die() {
    let tree = canonical_tree();
    let all = manifests();
    assert_eq!(all.len(), 10);
    for m in &all {
        assert!(validate_manifest(m, &tree).is_clean(), "{}", m.outcome);
        let leaf = tree.node(&m.outcome).unwrap().as_leaf().unwrap();
        for req in leaf.fields.iter().filter(|f| f.required) {
            let mut mutant = m.clone();
            mutant.fields.remove(&req.id);
            assert!(!validate_manifest(&mutant, &tree).is_clean());
        }
        for i in 0..m.path.len() {
            let q = tree.node(&m.path[i].question).unwrap().as_question().unwrap();
            for a in q.answers.iter().filter(|a| a.id != m.path[i].answer) {
                let mut mutant = m.clone();
                mutant.path[i].answer = a.id.clone();
                assert!(validate_manifest(&mutant, &tree).codes().contains(&"E_PATH_MISMATCH"));
            }
        }
    }
}

proptest! {
    #[test]
    fn serialization_is_stable(index in 0usize..10, reason in "[^\u{0}-\u{1f}]{1,40}") {
        let mut m = manifests().swap_remove(index);
        if let Some(first) = m.fields.values_mut().next() {
            *first = shepherd_core::FieldValue::Text(reason);
        }
        let text = serialize_manifest(&m);
        let back = parse_manifest(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize_manifest(&back), text);
    }
}
