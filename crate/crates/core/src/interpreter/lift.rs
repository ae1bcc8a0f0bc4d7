use std::collections::BTreeMap;

use super::{number, View, ViewList};
use crate::ui_tree::{UINode, UITree, TreeSource};

/// Lifted nodes that stand for an earlier view remember what it covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewOrigin {
    pub source_ids: Vec<usize>,
    pub depth: usize,
    pub props: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedTree {
    pub tree: UITree,
    /// Indexed by lifted node id; `None` for the synthetic root and groups.
    pub origin: Vec<Option<ViewOrigin>>,
}

pub const LIFT_ROOT_TAG: &str = "root";
pub const LIFT_GROUP_TAG: &str = "group";

struct Pending {
    view: usize,
    children: Vec<Pending>,
}

/// Rebuilds a tree from a view list by depth nesting.
///
/// A view is placed under the nearest preceding view of strictly smaller
/// depth, or under a synthetic root. A view that receives children becomes a
/// `group` node whose first child is a leaf copy of the view itself, so that
/// every view stays a leaf of the lifted tree and a following identity pass
/// reproduces the list unchanged.
pub fn lift(list: &ViewList) -> LiftedTree {
    let views = &list.views;
    let mut roots: Vec<Pending> = Vec::new();
    // Path of indices from `roots` down to the most recent open view.
    let mut path: Vec<(usize, usize)> = Vec::new(); // (depth, index in parent's children)
    for (i, v) in views.iter().enumerate() {
        while path.last().is_some_and(|(d, _)| *d >= v.depth) {
            path.pop();
        }
        let siblings = {
            let mut level = &mut roots;
            for (_, idx) in &path {
                level = &mut level[*idx].children;
            }
            level
        };
        siblings.push(Pending { view: i, children: Vec::new() });
        let idx = siblings.len() - 1;
        path.push((v.depth, idx));
    }

    let mut origin_by_view: Vec<usize> = Vec::new();
    let root = UINode::new(LIFT_ROOT_TAG).with_children(roots.iter().map(|p| build(p, views, &mut origin_by_view)).collect());
    let tree = UITree::new(root, TreeSource::Canonical);

    // Pre-order walk matches the order `build` recorded view copies in.
    let mut origin = vec![None; tree.node_count];
    let mut next_copy = origin_by_view.iter();
    for n in tree.iter() {
        if n.is_leaf() && n.node_id != 0 {
            let vi = *next_copy.next().expect("one copy per view");
            let v = &views[vi];
            origin[n.node_id] = Some(ViewOrigin {
                source_ids: v.source_ids.clone(),
                depth: v.depth,
                props: v.props.clone(),
            });
        }
    }
    LiftedTree { tree, origin }
}

fn copy_of(v: &View) -> UINode {
    let mut n = UINode::new(v.type_name.clone());
    n.text = v.text.clone();
    n.flags = v.flags;
    n.bounds = v.bounds;
    n.attributes = v.props.clone();
    n
}

fn build(p: &Pending, views: &[View], order: &mut Vec<usize>) -> UINode {
    order.push(p.view);
    let copy = copy_of(&views[p.view]);
    if p.children.is_empty() {
        return copy;
    }
    let mut kids = vec![copy];
    kids.extend(p.children.iter().map(|c| build(c, views, order)));
    UINode::new(LIFT_GROUP_TAG).with_children(kids)
}

impl LiftedTree {
    /// Translates views over the lifted tree back to the original tree.
    /// Views covering only synthetic nodes are dropped.
    pub fn remap(&self, list: ViewList) -> ViewList {
        let mut out = Vec::with_capacity(list.views.len());
        for mut v in list.views {
            let mut ids = Vec::new();
            let mut depth: Option<usize> = None;
            for id in &v.source_ids {
                if let Some(Some(o)) = self.origin.get(*id) {
                    ids.extend_from_slice(&o.source_ids);
                    depth = Some(depth.map_or(o.depth, |d| d.min(o.depth)));
                    for (k, val) in &o.props {
                        v.props.entry(k.clone()).or_insert_with(|| val.clone());
                    }
                }
            }
            let Some(depth) = depth else { continue };
            ids.sort_unstable();
            ids.dedup();
            v.source_ids = ids;
            v.depth = depth;
            out.push(v);
        }
        ViewList {
            views: number(out),
            origin_node_count: list.origin_node_count,
            token_count: None,
        }
    }
}
