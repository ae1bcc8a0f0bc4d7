//! Seeded synthetic UI trees: Android-like screens for overhead measurement
//! and unstructured random trees for property checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ui_tree::{Bounds, Flag, TreeSource, UINode, UITree};

const WORDS: [&str; 24] = [
    "Wi-Fi", "Bluetooth", "Display", "Battery", "Storage", "Sound", "Privacy", "Location", "Accounts", "Update",
    "Network", "Search", "Send", "Cancel", "Total", "Amount", "Settings", "Profile", "Inbox", "Photos", "Music",
    "Maps", "Calendar", "Notes",
];

const TAGS: [&str; 9] = [
    "android.widget.FrameLayout",
    "android.widget.LinearLayout",
    "android.widget.TextView",
    "android.widget.ImageView",
    "android.widget.Button",
    "android.widget.EditText",
    "android.widget.CheckBox",
    "androidx.recyclerview.widget.RecyclerView",
    "android.view.View",
];

fn phrase<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

/// A random tree with between 1 and `max_nodes` nodes. Parents are drawn
/// from a sliding window of recent nodes, which keeps depth moderate.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> UITree {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut nodes: Vec<UINode> = Vec::with_capacity(n);
    let mut parent = vec![usize::MAX; n];
    for (i, up) in parent.iter_mut().enumerate() {
        let mut node = UINode::new(*TAGS.choose(rng).expect("non-empty"));
        if rng.gen_bool(0.5) {
            node.text = phrase(rng);
        }
        for f in Flag::ALL {
            if rng.gen_bool(0.15) {
                node.flags.insert(f);
            }
        }
        if rng.gen_bool(0.7) {
            let (x, y) = (rng.gen_range(0..1000), rng.gen_range(0..2000));
            node.bounds = Bounds::new(x, y, x + rng.gen_range(0..300), y + rng.gen_range(0..200));
        }
        if i > 0 {
            *up = rng.gen_range(i.saturating_sub(8)..i);
        }
        nodes.push(node);
    }
    // Children always have larger indices than parents, so attaching in
    // reverse order completes every subtree before it is moved.
    let mut slots: Vec<Option<UINode>> = nodes.into_iter().map(Some).collect();
    for i in (1..n).rev() {
        let child = slots[i].take().expect("attached once");
        slots[parent[i]].as_mut().expect("parent still present").children.push(child);
    }
    let mut root = slots[0].take().expect("root");
    reverse_children(&mut root);
    UITree::new(root, TreeSource::Canonical)
}

fn reverse_children(n: &mut UINode) {
    n.children.reverse();
    for c in &mut n.children {
        reverse_children(c);
    }
}

fn settings_row<R: Rng>(rng: &mut R, y: i64) -> UINode {
    let b = |x1, dy1, x2, dy2| Bounds::new(x1, y + dy1, x2, y + dy2).expect("ordered");
    let mut children = vec![
        UINode::new("android.widget.ImageView").with_flag(Flag::Enabled).with_flag(Flag::Visible).with_bounds(b(32, 40, 96, 104)),
        UINode::new("android.widget.TextView")
            .with_text(&phrase(rng))
            .with_flag(Flag::Enabled)
            .with_flag(Flag::Visible)
            .with_bounds(b(128, 24, 900, 80)),
    ];
    if rng.gen_bool(0.7) {
        children.push(
            UINode::new("android.widget.TextView")
                .with_text(&phrase(rng))
                .with_flag(Flag::Enabled)
                .with_flag(Flag::Visible)
                .with_bounds(b(128, 80, 900, 120)),
        );
    }
    if rng.gen_bool(0.3) {
        children.push(
            UINode::new("android.widget.Switch")
                .with_flag(Flag::Checkable)
                .with_flag(Flag::Enabled)
                .with_flag(Flag::Visible)
                .with_bounds(b(950, 40, 1048, 104)),
        );
    }
    let text_box = UINode::new("android.widget.LinearLayout")
        .with_flag(Flag::Enabled)
        .with_flag(Flag::Visible)
        .with_bounds(b(0, 0, 1080, 144))
        .with_children(children);
    UINode::new("android.widget.LinearLayout")
        .with_flag(Flag::Clickable)
        .with_flag(Flag::Focusable)
        .with_flag(Flag::Enabled)
        .with_flag(Flag::Visible)
        .with_bounds(b(0, 0, 1080, 144))
        .with_children(vec![text_box])
}

/// An Android-like list screen with `rows` rows under the usual wrappers.
pub fn list_screen<R: Rng>(rng: &mut R, rows: usize) -> UITree {
    let toolbar = UINode::new("android.view.ViewGroup")
        .with_flag(Flag::Enabled)
        .with_flag(Flag::Visible)
        .with_bounds(Bounds::new(0, 0, 1080, 160).expect("ordered"))
        .with_children(vec![
            UINode::new("android.widget.ImageButton")
                .with_attr("content-desc", "Navigate up")
                .with_flag(Flag::Clickable)
                .with_flag(Flag::Enabled)
                .with_flag(Flag::Visible)
                .with_bounds(Bounds::new(0, 16, 128, 144).expect("ordered")),
            UINode::new("android.widget.TextView")
                .with_text(&phrase(rng))
                .with_flag(Flag::Enabled)
                .with_flag(Flag::Visible)
                .with_bounds(Bounds::new(160, 40, 900, 120).expect("ordered")),
        ]);
    let list = UINode::new("androidx.recyclerview.widget.RecyclerView")
        .with_flag(Flag::Scrollable)
        .with_flag(Flag::Focusable)
        .with_flag(Flag::Enabled)
        .with_flag(Flag::Visible)
        .with_bounds(Bounds::new(0, 160, 1080, 2340).expect("ordered"))
        .with_children((0..rows).map(|i| settings_row(rng, 160 + 144 * i as i64)).collect());
    let root = UINode::new("android.widget.FrameLayout")
        .with_flag(Flag::Enabled)
        .with_flag(Flag::Visible)
        .with_bounds(Bounds::new(0, 0, 1080, 2340).expect("ordered"))
        .with_children(vec![UINode::new("android.widget.LinearLayout")
            .with_flag(Flag::Enabled)
            .with_flag(Flag::Visible)
            .with_bounds(Bounds::new(0, 0, 1080, 2340).expect("ordered"))
            .with_children(vec![toolbar, list])]);
    UITree::new(root, TreeSource::AndroidXml)
}

/// `n` trees of mixed size: mostly list screens (small to very long lists)
/// with a share of unstructured trees.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<UITree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let class: f64 = rng.gen();
            if class < 0.2 {
                random_tree(&mut rng, 300)
            } else if class < 0.9 {
                let rows = rng.gen_range(1..=30);
                list_screen(&mut rng, rows)
            } else {
                let rows = rng.gen_range(30..=300);
                list_screen(&mut rng, rows)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui_tree::{parse_canonical, serialize_canonical};

    #[test]
    fn random_trees_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t = random_tree(&mut rng, 200);
            assert!(t.node_count >= 1 && t.node_count <= 200);
            assert_eq!(t.iter().count(), t.node_count);
            assert_eq!(parse_canonical(&serialize_canonical(&t)).unwrap(), t);
        }
    }

    #[test]
    fn corpus_is_seeded() {
        let a = generate_corpus(20, 3);
        assert_eq!(a, generate_corpus(20, 3));
        assert_ne!(a, generate_corpus(20, 4));
        let s = list_screen(&mut ChaCha8Rng::seed_from_u64(0), 3);
        assert_eq!(s.iter().filter(|n| n.flags.contains(Flag::Clickable)).count(), 4);
    }
}
