//! Shared test support: a deliberately naive reference interpreter and small
//! tree generators. The reference works on a flattened pre-order arena and
//! re-derives every view property from the original nodes, so it shares no
//! code paths with the library's recursive interpreter.

#![allow(dead_code)]

use std::collections::BTreeMap;

use regex::Regex;

use uitrim::dsl::{Cmp, MergeCondition, NodePredicate, TextRule, TransformProgram, TypeRule, ViewPredicate};
use uitrim::interpreter::{View, ViewList};
use uitrim::ui_tree::{Bounds, Flag, FlagSet, TreeSource, UINode, UITree};

// ---------------------------------------------------------------------------
// Arena

struct Slot<'a> {
    node: &'a UINode,
    children: Vec<usize>,
}

fn flatten(tree: &UITree) -> Vec<Slot<'_>> {
    fn go<'a>(n: &'a UINode, out: &mut Vec<Slot<'a>>) -> usize {
        let me = out.len();
        out.push(Slot { node: n, children: Vec::new() });
        for c in &n.children {
            let id = go(c, out);
            out[me].children.push(id);
        }
        me
    }
    let mut out = Vec::new();
    go(&tree.root, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Predicates, spelled out case by case

fn cmp(c: Cmp, lhs: u64, rhs: u64) -> bool {
    match c {
        Cmp::Lt => lhs < rhs,
        Cmp::Le => lhs <= rhs,
        Cmp::Eq => lhs == rhs,
        Cmp::Ge => lhs >= rhs,
        Cmp::Gt => lhs > rhs,
    }
}

fn flag_named(name: &str) -> Option<Flag> {
    let canon = name.replace('-', "_");
    Flag::ALL.into_iter().find(|f| f.name() == canon)
}

fn node_holds(p: &NodePredicate, n: &UINode) -> Option<bool> {
    use NodePredicate as P;
    Some(match p {
        P::True => true,
        P::False => false,
        P::TagEquals(t) => &n.tag == t,
        P::TagIn(ts) => ts.contains(&n.tag),
        P::AttrExists(k) => n.attributes.contains_key(k),
        P::AttrEquals(k, v) => n.attributes.get(k).map(String::as_str) == Some(v.as_str()),
        P::AttrMatches(k, pat) => {
            let re = Regex::new(&format!("^(?:{})$", pat.source())).ok()?;
            match n.attributes.get(k) {
                Some(v) => re.is_match(v),
                None => false,
            }
        }
        P::TextEmpty => n.text.is_empty(),
        P::TextNonEmpty => !n.text.is_empty(),
        P::TextEquals(s) => &n.text == s,
        P::Flag(name) => n.flags.contains(flag_named(name)?),
        P::ChildCount(c, k) => cmp(*c, n.children.len() as u64, *k as u64),
        P::Depth(c, k) => cmp(*c, n.depth as u64, *k as u64),
        P::Not(i) => !node_holds(i, n)?,
        P::And(l, r) => {
            let a = node_holds(l, n)?;
            a && node_holds(r, n)?
        }
        P::Or(l, r) => {
            let a = node_holds(l, n)?;
            a || node_holds(r, n)?
        }
    })
}

fn view_holds(p: &ViewPredicate, v: &View) -> bool {
    use ViewPredicate as V;
    match p {
        V::True => true,
        V::False => false,
        V::TextEmpty => v.text.is_empty(),
        V::TextNonEmpty => !v.text.is_empty(),
        V::Interactive => v.interactive,
        V::TypeEquals(t) => &v.type_name == t,
        V::Not(i) => !view_holds(i, v),
        V::And(l, r) => view_holds(l, v) && view_holds(r, v),
        V::Or(l, r) => view_holds(l, v) || view_holds(r, v),
    }
}

fn merge_holds(p: &MergeCondition, n: &UINode, views: &[View]) -> Option<bool> {
    use MergeCondition as M;
    Some(match p {
        M::True => true,
        M::False => false,
        M::Guard(g) => node_holds(g, n)?,
        M::AllViews(v) => {
            let mut ok = true;
            for x in views {
                ok &= view_holds(v, x);
            }
            ok
        }
        M::AnyView(v) => {
            let mut any = false;
            for x in views {
                any |= view_holds(v, x);
            }
            any
        }
        M::ViewCount(c, k) => cmp(*c, views.len() as u64, *k as u64),
        M::Not(i) => !merge_holds(i, n, views)?,
        M::And(l, r) => {
            let a = merge_holds(l, n, views)?;
            a && merge_holds(r, n, views)?
        }
        M::Or(l, r) => {
            let a = merge_holds(l, n, views)?;
            a || merge_holds(r, n, views)?
        }
    })
}

fn interactive(f: FlagSet) -> bool {
    f.contains(Flag::Clickable) || f.contains(Flag::LongClickable) || f.contains(Flag::Editable) || f.contains(Flag::Checkable)
}

fn hull(a: Option<Bounds>, b: Option<Bounds>) -> Option<Bounds> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(Bounds { x1: a.x1.min(b.x1), y1: a.y1.min(b.y1), x2: a.x2.max(b.x2), y2: a.y2.max(b.y2) }),
    }
}

fn leaf(n: &UINode, keys: &[String]) -> View {
    let mut props = BTreeMap::new();
    for k in keys {
        if let Some(v) = n.attributes.get(k) {
            props.insert(k.clone(), v.clone());
        }
    }
    View {
        view_id: 0,
        text: n.text.clone(),
        type_name: n.tag.clone(),
        interactive: interactive(n.flags),
        flags: n.flags,
        bounds: n.bounds,
        source_ids: vec![n.node_id],
        depth: n.depth,
        props,
    }
}

fn merge(n: &UINode, kids: Vec<View>, p: &TransformProgram) -> View {
    let text = match p.merge_props.text {
        TextRule::Concat => {
            let mut s = String::new();
            for k in &kids {
                if k.text.is_empty() {
                    continue;
                }
                if !s.is_empty() {
                    s.push(' ');
                }
                s.push_str(&k.text);
            }
            s
        }
        TextRule::First => kids.iter().find(|k| !k.text.is_empty()).map(|k| k.text.clone()).unwrap_or_default(),
        TextRule::Parent => n.text.clone(),
    };
    let type_name = match p.merge_props.type_rule {
        TypeRule::Parent => n.tag.clone(),
        TypeRule::DominantChild => {
            // Highest count wins; the earliest type wins ties.
            let mut best = n.tag.clone();
            let mut best_count = 0;
            for (i, k) in kids.iter().enumerate() {
                if kids[..i].iter().any(|e| e.type_name == k.type_name) {
                    continue;
                }
                let c = kids.iter().filter(|e| e.type_name == k.type_name).count();
                if c > best_count {
                    best_count = c;
                    best = k.type_name.clone();
                }
            }
            best
        }
    };
    let mut flags = n.flags;
    let mut bounds = n.bounds;
    let mut ids = vec![n.node_id];
    let mut props = BTreeMap::new();
    for k in kids {
        flags = flags.union(k.flags);
        bounds = hull(bounds, k.bounds);
        ids.extend(k.source_ids);
        for (key, val) in k.props {
            props.entry(key).or_insert(val);
        }
    }
    ids.sort();
    View { view_id: 0, text, type_name, interactive: interactive(flags), flags, bounds, source_ids: ids, depth: n.depth, props }
}

/// Reference semantics for a single program. `None` when a predicate cannot
/// be evaluated (unknown flag, bad pattern).
pub fn reference_apply(p: &TransformProgram, tree: &UITree) -> Option<ViewList> {
    let arena = flatten(tree);
    // Pre-order ids grow downwards, so walking the arena backwards visits
    // children before parents.
    let mut out: Vec<Option<Vec<View>>> = (0..arena.len()).map(|_| None).collect();
    for i in (0..arena.len()).rev() {
        let n = arena[i].node;
        let mut kids = Vec::new();
        for &c in &arena[i].children {
            kids.extend(out[c].take().expect("child done"));
        }
        let views = if kids.is_empty() {
            if node_holds(&p.leaf_filter, n)? {
                vec![]
            } else {
                vec![leaf(n, &p.leaf_props)]
            }
        } else if node_holds(&p.node_filter, n)? {
            kids
        } else if merge_holds(&p.merge_when, n, &kids)? {
            vec![merge(n, kids, p)]
        } else {
            kids
        };
        out[i] = Some(views);
    }
    let mut views = out[0].take().unwrap_or_default();
    for (i, v) in views.iter_mut().enumerate() {
        v.view_id = i;
    }
    Some(ViewList { views, origin_node_count: arena.len(), token_count: None })
}

// ---------------------------------------------------------------------------
// Generators

/// Every ordered tree shape with `n` nodes, as pre-order depth sequences.
pub fn shapes(n: usize) -> Vec<Vec<usize>> {
    fn go(seq: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if seq.len() == n {
            out.push(seq.clone());
            return;
        }
        let last = *seq.last().expect("root present");
        for d in 1..=last + 1 {
            seq.push(d);
            go(seq, n, out);
            seq.pop();
        }
    }
    if n == 0 {
        return vec![];
    }
    let mut out = Vec::new();
    go(&mut vec![0], n, &mut out);
    out
}

/// Builds a tree from a pre-order depth sequence and one label per node.
pub fn tree_from_shape(depths: &[usize], label: impl Fn(usize) -> UINode) -> UITree {
    fn build(depths: &[usize], i: &mut usize, label: &dyn Fn(usize) -> UINode) -> UINode {
        let me = *i;
        let mut node = label(me);
        *i += 1;
        let mut kids = Vec::new();
        while *i < depths.len() && depths[*i] == depths[me] + 1 {
            kids.push(build(depths, i, label));
        }
        node.children = kids;
        node
    }
    let mut i = 0;
    UITree::new(build(depths, &mut i, &label), TreeSource::Canonical)
}

/// The small vocabulary used by the oracle check: three tags, two flags.
pub const TAGS: [&str; 3] = ["frame", "label", "button"];
pub const FLAGS: [Flag; 2] = [Flag::Clickable, Flag::Enabled];
/// Labels per node: tag × flag subset.
pub const LABELS: usize = TAGS.len() << FLAGS.len();

/// Node for label `l` at pre-order position `pos`. Labels carry text so the
/// text predicates and merge rules have something to act on.
pub fn labelled_node(l: usize, pos: usize) -> UINode {
    let tag = TAGS[l % TAGS.len()];
    let bits = l / TAGS.len();
    let mut n = UINode::new(tag);
    for (k, f) in FLAGS.iter().enumerate() {
        if bits & (1 << k) != 0 {
            n = n.with_flag(*f);
        }
    }
    if tag == "label" {
        n = n.with_text(&format!("w{pos}"));
    }
    let x = pos as i64 * 10;
    n.with_bounds(Bounds::new(x, x, x + 15, x + 15).expect("ordered"))
}
