use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uitrim::dsl::{enumerate_grammar, parse_library, parse_program, validate_program, TransformProgram, Vocabulary};
use uitrim::evaluation::TokenCounter;
use uitrim::interpreter::{apply, apply_library, serialize_views};
use uitrim::representations::{render, render_baseline, RenderKind};
use uitrim::runtime::corpus::random_tree;
use uitrim::ui_tree::{parse_any, UITree};

fn tree(seed: u64, max: usize) -> UITree {
    random_tree(&mut ChaCha8Rng::seed_from_u64(seed), max)
}

fn programs() -> Vec<TransformProgram> {
    let sample: Vec<UITree> = (0..20).map(|s| tree(s, 60)).collect();
    enumerate_grammar(&Vocabulary::from_trees(&sample), 5).step_by(7).take(120).collect()
}

#[test]
fn enumerated_programs_validate_and_print_stably() {
    let all: Vec<TransformProgram> = enumerate_grammar(&Vocabulary::from_trees(&[tree(1, 80)]), 4).collect();
    assert!(all.len() > 50);
    let mut prev: Option<(usize, String)> = None;
    for p in &all {
        assert!(validate_program(p).is_valid(), "{}", p.one_line());
        let printed = p.to_string();
        let again = parse_program(&printed).unwrap();
        assert_eq!(again.to_string(), printed);
        let key = (uitrim::dsl::program_size(p), p.body());
        if let Some(prev) = &prev {
            assert!(*prev < key, "enumeration order: {prev:?} then {key:?}");
        }
        prev = Some(key);
    }
}

#[test]
fn bundled_library_on_bill_amount() {
    let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/trees/bill_amount.tree")).unwrap();
    let t = parse_any(&doc).unwrap();
    let p = parse_program(
        "program m { leaf-filter: false; leaf-props: [text]; node-filter: false; merge-when: any-view(interactive); }",
    )
    .unwrap();
    let views = apply(&p, &t).unwrap();
    // The row merges into one view; the frame above it then merges that with
    // the Split button.
    assert_eq!(views.views.len(), 1);
    assert_eq!(views.views[0].text, "Bill Amount 0.00 Split");
    let p = parse_program(
        "program m { leaf-filter: false; leaf-props: [text]; node-filter: false; \
         merge-when: tag = \"android.widget.LinearLayout\" and any-view(interactive); }",
    )
    .unwrap();
    let texts: Vec<String> = apply(&p, &t).unwrap().views.into_iter().map(|v| v.text).collect();
    assert_eq!(texts, ["Bill Amount 0.00", "Split"]);
}

#[test]
fn single_program_library_equals_apply() {
    for p in programs().iter().take(40) {
        for s in 0..10 {
            let t = tree(s, 120);
            assert_eq!(apply_library(std::slice::from_ref(p), &t).unwrap(), apply(p, &t).unwrap());
        }
    }
    let lib = parse_library("").unwrap();
    let t = tree(3, 50);
    assert_eq!(apply_library(&lib, &t).unwrap(), apply(&TransformProgram::identity("x"), &t).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_reduction_and_order(seed in any::<u64>(), pi in any::<prop::sample::Index>()) {
        let ps = programs();
        let p = &ps[pi.index(ps.len())];
        let t = tree(seed, 200);
        let views = apply(p, &t).unwrap();
        let mut seen = BTreeSet::new();
        let mut last_first = None;
        for v in &views.views {
            for id in &v.source_ids {
                prop_assert!(*id < t.node_count);
                prop_assert!(seen.insert(*id), "id {} in two views", id);
            }
            let interactive = v.source_ids.iter().any(|id| t.node(*id).unwrap().is_interactive());
            prop_assert_eq!(interactive, v.interactive);
            // Views come out in document order of their first source node.
            let first = v.source_ids[0];
            prop_assert!(last_first.is_none_or(|l| l < first));
            last_first = Some(first);
        }
        prop_assert!(views.views.len() <= t.leaf_count());
        prop_assert!(views.views.len() <= views.origin_node_count);
        // Purity.
        prop_assert_eq!(serialize_views(&apply(p, &t).unwrap()), serialize_views(&views));
    }

    #[test]
    fn library_ids_refer_to_the_input(seed in any::<u64>(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let ps = programs();
        let lib = vec![ps[a.index(ps.len())].clone(), ps[b.index(ps.len())].clone()];
        let t = tree(seed, 150);
        let views = apply_library(&lib, &t).unwrap();
        let mut seen = BTreeSet::new();
        for v in &views.views {
            for id in &v.source_ids {
                prop_assert!(*id < t.node_count);
                prop_assert!(seen.insert(*id));
            }
        }
        prop_assert_eq!(views.origin_node_count, t.node_count);
    }

    #[test]
    fn renderers(seed in any::<u64>(), shuffle in any::<u64>(), pi in any::<prop::sample::Index>()) {
        let ps = programs();
        let t = tree(seed, 150);
        let c = TokenCounter::Default;
        let views = apply(&ps[pi.index(ps.len())], &t).unwrap();
        let h = render(&views, RenderKind::Hierarchical, None, &c).unwrap();
        let d = render(&views, RenderKind::DfsFlat, None, &c).unwrap();
        let r = render(&views, RenderKind::Random, Some(shuffle), &c).unwrap();
        // Indentation is whitespace, which the default counter ignores.
        prop_assert_eq!(h.token_count, d.token_count);
        prop_assert_eq!(r.token_count, d.token_count);
        let (mut a, mut b) = (d.lines.clone(), r.lines.clone());
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        prop_assert_eq!(render(&views, RenderKind::Random, Some(shuffle), &c).unwrap(), r);
        prop_assert!(render(&views, RenderKind::Random, None, &c).is_err());
        prop_assert_eq!(render_baseline(&t, RenderKind::Leaf, &c).unwrap().lines.len(), t.leaf_count());
        prop_assert!(render_baseline(&t, RenderKind::Ops, &c).unwrap().lines.len() <= t.node_count);
    }
}
