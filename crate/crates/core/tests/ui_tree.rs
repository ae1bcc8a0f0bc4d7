mod common;

use std::path::Path;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use uitrim::runtime::corpus::random_tree;
use uitrim::ui_tree::{parse_any, parse_canonical, serialize_canonical, UINode, UITree};

fn fixture(rel: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)).unwrap()
}

fn check_structure(t: &UITree) {
    fn walk(n: &UINode, depth: usize, next: &mut usize) {
        assert_eq!(n.depth, depth);
        assert_eq!(n.node_id, *next, "ids are pre-order");
        *next += 1;
        for c in &n.children {
            walk(c, depth + 1, next);
        }
        // Every id in the subtree is larger than the node's own.
        assert!(n.iter().skip(1).all(|d| d.node_id > n.node_id));
    }
    let mut next = 0;
    walk(&t.root, 0, &mut next);
    assert_eq!(next, t.node_count);
}

#[test]
fn every_fixture_parses_and_round_trips() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut n = 0;
    for sub in ["trees", "android", "examples"] {
        for e in std::fs::read_dir(dir.join(sub)).unwrap() {
            let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
            let doc = text.split("\ntargets\n").next().unwrap().to_string() + "\n";
            let t = parse_any(&doc).unwrap();
            check_structure(&t);
            let s = serialize_canonical(&t);
            let back = parse_canonical(&s).unwrap();
            assert_eq!(back.root, t.root);
            assert_eq!(serialize_canonical(&back), s);
            n += 1;
        }
    }
    assert_eq!(n, 8);
}

#[test]
fn android_fixture_counts_every_element() {
    let xml = fixture("android/settings_dump.xml");
    // Independent count: opening (or self-closing) element tags, excluding
    // the XML declaration and closing tags.
    let opening = Regex::new(r"<[A-Za-z][^>]*>").unwrap();
    let elements = opening.find_iter(&xml).count();
    assert_eq!(elements, 7);
    let t = parse_any(&xml).unwrap();
    assert_eq!(t.node_count, elements);
    assert_eq!(t.iter().count(), elements);
    check_structure(&t);
}

#[test]
fn bill_amount_shape() {
    let t = parse_any(&fixture("trees/bill_amount.tree")).unwrap();
    assert_eq!(t.node_count, 5);
    assert_eq!(t.leaf_count(), 3);
    let texts: Vec<&str> = t.leaves().map(|l| l.text.as_str()).collect();
    assert_eq!(texts, ["Bill Amount", "0.00", "Split"]);
}

#[test]
fn ids_in_documents_are_ignored() {
    let a = parse_any("uitree v1 canonical\nroot\n  a text=\"x\"\n").unwrap();
    let b = parse_any("uitree v1 canonical\nroot attrs{node_id=\"9\"}\n  a text=\"x\"\n").unwrap();
    assert_eq!(a.root.node_id, b.root.node_id);
    assert_eq!(b.root.children[0].node_id, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_trees_round_trip(seed in any::<u64>(), max in 1usize..=200) {
        let t = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), max);
        prop_assert!(t.node_count <= 200);
        check_structure(&t);
        let s = serialize_canonical(&t);
        let back = parse_canonical(&s).unwrap();
        prop_assert_eq!(&back.root, &t.root);
        prop_assert_eq!(serialize_canonical(&back), s);
    }

    #[test]
    fn labelled_shapes_round_trip(n in 1usize..=8, pick in any::<prop::sample::Index>(), labels in prop::collection::vec(0..common::LABELS, 8)) {
        let shapes = common::shapes(n);
        let shape = &shapes[pick.index(shapes.len())];
        let t = common::tree_from_shape(shape, |pos| common::labelled_node(labels[pos], pos));
        check_structure(&t);
        prop_assert_eq!(parse_canonical(&serialize_canonical(&t)).unwrap().root, t.root);
    }
}
