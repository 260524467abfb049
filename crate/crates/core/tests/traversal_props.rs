use std::sync::Arc;

use proptest::prelude::*;
use shepherd_core::{canonical_tree, FixedClock, Prompt, TraversalSession};

fn start() -> TraversalSession {
    let clock = FixedClock::parse("2024-05-01T09:00:00Z").unwrap();
    TraversalSession::start(Arc::new(canonical_tree()), &clock).unwrap()
}

fn options(s: &TraversalSession) -> Vec<String> {
    match s.current_prompt() {
        Prompt::Question { options, .. } => options.into_iter().map(|o| o.id).collect(),
        Prompt::Leaf { .. } => vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Choices are indices into the offered options (mod count); sessions
    /// replayed twice agree step for step, undo inverts every answer, and the
    /// path always replays to the current node.
    #[test]
    fn determinism_undo_and_replay(choices in prop::collection::vec(0usize..3, 0..8)) {
        let mut a = start();
        let mut b = start();
        let mut answered = 0;
        for c in choices {
            let opts = options(&a);
            if opts.is_empty() {
                break;
            }
            let pick = &opts[c % opts.len()];
            let before = a.clone();
            a.apply_answer(pick).unwrap();
            let mut undone = a.clone();
            undone.undo().unwrap();
            prop_assert_eq!(&undone, &before);
            b.apply_answer(pick).unwrap();
            answered += 1;
            prop_assert_eq!(a.path(), b.path());
            prop_assert_eq!(a.current_prompt(), b.current_prompt());
            prop_assert_eq!(a.tree().follow(a.path()).unwrap().id(), a.current());
        }
        prop_assert!(answered <= 5);
    }
}

#[test]
fn leaf_reached_within_five_answers() {
    // Always picking the last option exercises the deepest branch.
    for pick_last in [false, true] {
        let mut s = start();
        let mut n = 0;
        while !options(&s).is_empty() {
            let opts = options(&s);
            let pick = if pick_last { opts.last() } else { opts.first() }.unwrap().clone();
            s.apply_answer(&pick).unwrap();
            n += 1;
        }
        assert!(n <= 5);
    }
}
