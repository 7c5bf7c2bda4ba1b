//! Property tests for the structural invariants the rest of the pipeline
//! leans on: label round-trips, selection ordering, prompt completeness,
//! lexer idempotence, and fingerprint determinism.

use proptest::prelude::*;

use specgen::bundle::{
    combination_rank, degrade_ghosts, enumerate_combinations, select_specs, CaseBundle,
    InterfaceContext, SpecCombination, SpecItem, SpecKind,
};
use specgen::gateway::{request_fingerprint, ChatMessage, GenerationParams};
use specgen::prompt::{build_user_prompt, COT_TRIGGER};
use specgen::quality::{count_loc, strip_comments_and_blanks};

fn arb_kind() -> impl Strategy<Value = SpecKind> {
    prop_oneof![
        Just(SpecKind::Hlnl),
        Just(SpecKind::Llnl),
        Just(SpecKind::Acsl),
    ]
}

fn arb_combo() -> impl Strategy<Value = SpecCombination> {
    prop::collection::btree_set(arb_kind(), 1..=3)
        .prop_map(|set| SpecCombination::new(set).expect("non-empty"))
}

fn arb_spec_items() -> impl Strategy<Value = Vec<SpecItem>> {
    prop::collection::vec((arb_kind(), "[a-z][a-z0-9 ]{0,40}"), 1..12).prop_map(|items| {
        items
            .into_iter()
            .enumerate()
            .map(|(i, (kind, text))| SpecItem {
                id: format!("item-{i}"),
                kind,
                text,
            })
            .collect()
    })
}

fn synthetic_bundle(specs: Vec<SpecItem>) -> CaseBundle {
    CaseBundle {
        name: "SYN".to_string(),
        interface: InterfaceContext {
            header_source: "typedef unsigned char tB;\n".to_string(),
            globals_source: "static tB flag;\n".to_string(),
            function_signature: "void Syn_10ms(void);".to_string(),
            scheduler_note: "The function is called by a static scheduler once every 10 ms."
                .to_string(),
        },
        specs,
        reference_source: None,
        acsl_contract: "assigns flag;".to_string(),
    }
}

/// Lines that, concatenated in any order, always form a lexable C-ish file.
/// `with_ghosts` adds ghost-annotation lines to the pool.
fn arb_source(with_ghosts: bool) -> impl Strategy<Value = String> {
    let mut lines: Vec<BoxedStrategy<String>> = vec![
        "[a-z][a-z0-9_]{0,10} = [0-9]{1,4}U;"
            .prop_map(String::from)
            .boxed(),
        Just(String::new()).boxed(),
        "// [a-fh-z ]{0,20}".prop_map(String::from).boxed(),
        "/\\* [a-fh-z ]{0,20} \\*/".prop_map(String::from).boxed(),
        "char \\*s_[a-z]{1,4} = \"/\\* not a comment \\*/\";"
            .prop_map(String::from)
            .boxed(),
    ];
    if with_ghosts {
        lines.push(
            "//@ ghost int [a-z][a-z0-9]{0,6};"
                .prop_map(String::from)
                .boxed(),
        );
        lines.push(
            "/\\*@ ghost int [a-z][a-z0-9]{0,6}; \\*/"
                .prop_map(String::from)
                .boxed(),
        );
    }
    prop::collection::vec(prop::strategy::Union::new(lines), 0..20)
        .prop_map(|lines| lines.join("\n"))
}

proptest! {
    #[test]
    fn label_round_trips_for_every_combination(combo in arb_combo()) {
        prop_assert_eq!(SpecCombination::parse_label(&combo.label()), Some(combo));
    }

    #[test]
    fn rank_is_stable_under_reenumeration(combo in arb_combo()) {
        let rank = combination_rank(&combo);
        prop_assert!(rank < 7);
        prop_assert_eq!(&enumerate_combinations()[rank], &combo);
    }

    #[test]
    fn selection_is_exactly_the_matching_items_kind_major(
        specs in arb_spec_items(),
        combo in arb_combo(),
    ) {
        let bundle = synthetic_bundle(specs);
        let selected = select_specs(&bundle, &combo);

        // Same multiset as a naive filter.
        let naive: Vec<&SpecItem> =
            bundle.specs.iter().filter(|s| combo.contains(s.kind)).collect();
        prop_assert_eq!(selected.len(), naive.len());
        for item in &naive {
            prop_assert!(selected.iter().any(|s| s.id == item.id));
        }

        // Kind-major: HLNL block, then LLNL, then ACSL.
        let kind_rank = |k: SpecKind| SpecKind::ALL.iter().position(|x| *x == k).unwrap();
        prop_assert!(selected.windows(2).all(|w| kind_rank(w[0].kind) <= kind_rank(w[1].kind)));

        // Bundle order preserved within each kind.
        let pos = |id: &str| bundle.specs.iter().position(|s| s.id == id).unwrap();
        prop_assert!(selected
            .windows(2)
            .all(|w| w[0].kind != w[1].kind || pos(&w[0].id) < pos(&w[1].id)));
    }

    #[test]
    fn user_prompt_carries_every_selected_item(
        specs in arb_spec_items(),
        combo in arb_combo(),
        cot in any::<bool>(),
    ) {
        let bundle = synthetic_bundle(specs);
        let selected = select_specs(&bundle, &combo);
        prop_assume!(!selected.is_empty());
        let prompt = build_user_prompt(&selected, &bundle.interface, cot).unwrap();
        for item in &selected {
            prop_assert!(prompt.contains(&item.text), "missing {:?}", item.id);
        }
        prop_assert!(prompt.contains(&bundle.interface.function_signature));
        prop_assert_eq!(prompt.lines().last() == Some(COT_TRIGGER), cot);
    }

    #[test]
    fn degrade_ghosts_is_idempotent(source in arb_source(true)) {
        let once = degrade_ghosts(&source).unwrap();
        let twice = degrade_ghosts(&once).unwrap();
        prop_assert_eq!(&once, &twice);
    }

    #[test]
    fn degrade_ghosts_leaves_ghost_free_text_unchanged(source in arb_source(false)) {
        prop_assume!(!source.contains("ghost"));
        prop_assert_eq!(degrade_ghosts(&source).unwrap(), source);
    }

    #[test]
    fn strip_is_idempotent_on_its_own_output(source in arb_source(true)) {
        let once = strip_comments_and_blanks(&source).unwrap();
        let rejoined: String = once
            .iter()
            .map(|(_, text)| text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let again = strip_comments_and_blanks(&rejoined).unwrap();
        let contents: Vec<&String> = once.iter().map(|(_, t)| t).collect();
        let contents_again: Vec<&String> = again.iter().map(|(_, t)| t).collect();
        prop_assert_eq!(contents, contents_again);
    }

    #[test]
    fn loc_ignores_blank_and_comment_lines(
        statements in prop::collection::vec("[a-z][a-z0-9_]{0,8} = [0-9]{1,3}U;", 1..10),
        padding in prop::collection::vec(prop_oneof![Just(""), Just("// note"), Just("/* x */")], 0..6),
    ) {
        let mut body: Vec<String> = statements.clone();
        // Interleave padding lines that must not count.
        for (i, pad) in padding.iter().enumerate() {
            body.insert((i * 2) % (body.len() + 1), pad.to_string());
        }
        let source = format!("void f(void)\n{{\n{}\n}}\n", body.join("\n"));
        // signature + opening brace + statements + closing brace
        prop_assert_eq!(count_loc(&source, "f").unwrap(), statements.len() + 3);
    }

    #[test]
    fn fingerprint_is_deterministic_and_content_sensitive(
        system in "[ -~]{0,60}",
        user in "[ -~]{1,60}",
        extra in "[ -~]{1,10}",
    ) {
        let params = GenerationParams::new("m");
        let messages = vec![ChatMessage::system(&system), ChatMessage::user(&user)];
        let a = request_fingerprint(&messages, &params);
        let b = request_fingerprint(&messages, &params);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), 32);
        prop_assert!(a.chars().all(|c| c.is_ascii_hexdigit()));

        let changed = vec![
            ChatMessage::system(&system),
            ChatMessage::user(format!("{user}{extra}")),
        ];
        prop_assert_ne!(a, request_fingerprint(&changed, &params));
    }
}
