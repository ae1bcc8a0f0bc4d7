//! Bottom-up application of transformation programs.
//!
//! Every node is visited after its children. A node whose children produced
//! no views goes through the leaf branch (filter or create a view); otherwise
//! it is spliced, merged, or passed through, in that order of precedence.

mod lift;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{
    MergeCondition, MergeRules, NodePredicate, TextRule, TransformProgram, TypeRule, ViewPredicate,
};
use crate::ui_tree::{write_node_fields, Bounds, Flag, FlagSet, UINode, UITree};

pub use lift::{lift, LiftedTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpretError {
    #[error("predicate evaluation failed at node {node_id}: {detail}")]
    PredicateEvaluation { node_id: usize, detail: String },
    #[error("program {index} ({program_id}): {source}")]
    InProgram {
        index: usize,
        program_id: String,
        #[source]
        source: Box<InterpretError>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub view_id: usize,
    pub text: String,
    pub type_name: String,
    pub interactive: bool,
    pub flags: FlagSet,
    pub bounds: Option<Bounds>,
    /// Ids of the tree nodes consumed into this view, ascending.
    pub source_ids: Vec<usize>,
    pub depth: usize,
    pub props: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ViewList {
    pub views: Vec<View>,
    pub origin_node_count: usize,
    pub token_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyOptions {
    /// Pass-through nodes emit a container view ahead of their children.
    pub retain_containers: bool,
}

// ---------------------------------------------------------------------------
// Predicate evaluation

fn flag_of(name: &str, node_id: usize) -> Result<Flag, InterpretError> {
    Flag::from_name(name).ok_or_else(|| InterpretError::PredicateEvaluation {
        node_id,
        detail: format!("unknown flag `{name}`"),
    })
}

pub fn eval_node(p: &NodePredicate, node: &UINode) -> Result<bool, InterpretError> {
    use NodePredicate as P;
    Ok(match p {
        P::True => true,
        P::False => false,
        P::TagEquals(t) => node.tag == *t,
        P::TagIn(set) => set.contains(&node.tag),
        P::AttrExists(k) => node.attributes.contains_key(k),
        P::AttrEquals(k, v) => node.attributes.get(k) == Some(v),
        P::AttrMatches(k, pat) => {
            let re = pat.regex().map_err(|e| InterpretError::PredicateEvaluation {
                node_id: node.node_id,
                detail: e.to_string(),
            })?;
            node.attributes.get(k).is_some_and(|v| re.is_match(v))
        }
        P::TextEmpty => node.text.is_empty(),
        P::TextNonEmpty => !node.text.is_empty(),
        P::TextEquals(s) => node.text == *s,
        P::Flag(name) => node.flags.contains(flag_of(name, node.node_id)?),
        P::ChildCount(c, n) => c.holds(node.children.len() as u64, u64::from(*n)),
        P::Depth(c, n) => c.holds(node.depth as u64, u64::from(*n)),
        P::Not(i) => !eval_node(i, node)?,
        P::And(l, r) => eval_node(l, node)? && eval_node(r, node)?,
        P::Or(l, r) => eval_node(l, node)? || eval_node(r, node)?,
    })
}

pub fn eval_view(p: &ViewPredicate, view: &View) -> bool {
    use ViewPredicate as V;
    match p {
        V::True => true,
        V::False => false,
        V::TextEmpty => view.text.is_empty(),
        V::TextNonEmpty => !view.text.is_empty(),
        V::Interactive => view.interactive,
        V::TypeEquals(t) => view.type_name == *t,
        V::Not(i) => !eval_view(i, view),
        V::And(l, r) => eval_view(l, view) && eval_view(r, view),
        V::Or(l, r) => eval_view(l, view) || eval_view(r, view),
    }
}

pub fn eval_merge(p: &MergeCondition, node: &UINode, views: &[View]) -> Result<bool, InterpretError> {
    use MergeCondition as M;
    Ok(match p {
        M::True => true,
        M::False => false,
        M::Guard(g) => eval_node(g, node)?,
        M::AllViews(v) => views.iter().all(|x| eval_view(v, x)),
        M::AnyView(v) => views.iter().any(|x| eval_view(v, x)),
        M::ViewCount(c, n) => c.holds(views.len() as u64, u64::from(*n)),
        M::Not(i) => !eval_merge(i, node, views)?,
        M::And(l, r) => eval_merge(l, node, views)? && eval_merge(r, node, views)?,
        M::Or(l, r) => eval_merge(l, node, views)? || eval_merge(r, node, views)?,
    })
}

// ---------------------------------------------------------------------------
// View construction

fn leaf_view(node: &UINode, leaf_props: &[String]) -> View {
    let props = leaf_props
        .iter()
        .filter_map(|k| node.attributes.get(k).map(|v| (k.clone(), v.clone())))
        .collect();
    View {
        view_id: 0,
        text: node.text.clone(),
        type_name: node.tag.clone(),
        interactive: node.flags.is_interactive(),
        flags: node.flags,
        bounds: node.bounds,
        source_ids: vec![node.node_id],
        depth: node.depth,
        props,
    }
}

fn union_bounds(acc: Option<Bounds>, b: Option<Bounds>) -> Option<Bounds> {
    match (acc, b) {
        (Some(a), Some(b)) => Some(a.union(&b)),
        (a, b) => a.or(b),
    }
}

/// Most frequent child type; ties go to the type seen first.
fn dominant_type(views: &[View]) -> Option<String> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for v in views {
        match counts.iter_mut().find(|(t, _)| *t == v.type_name) {
            Some((_, c)) => *c += 1,
            None => counts.push((&v.type_name, 1)),
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (t, c) in counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((t, c));
        }
    }
    best.map(|(t, _)| t.to_string())
}

pub(crate) fn merged_view(node: &UINode, views: Vec<View>, rules: &MergeRules) -> View {
    let text = match rules.text {
        TextRule::Concat => {
            let parts: Vec<&str> = views.iter().map(|v| v.text.as_str()).filter(|t| !t.is_empty()).collect();
            parts.join(" ")
        }
        TextRule::First => views
            .iter()
            .map(|v| v.text.as_str())
            .find(|t| !t.is_empty())
            .unwrap_or_default()
            .to_string(),
        TextRule::Parent => node.text.clone(),
    };
    let type_name = match rules.type_rule {
        TypeRule::Parent => node.tag.clone(),
        TypeRule::DominantChild => dominant_type(&views).unwrap_or_else(|| node.tag.clone()),
    };
    let mut flags = node.flags;
    let mut bounds = node.bounds;
    let mut ids = vec![node.node_id];
    let mut props = BTreeMap::new();
    for v in views {
        flags = flags.union(v.flags);
        bounds = union_bounds(bounds, v.bounds);
        ids.extend(v.source_ids);
        for (k, val) in v.props {
            props.entry(k).or_insert(val);
        }
    }
    ids.sort_unstable();
    View {
        view_id: 0,
        text,
        type_name,
        interactive: flags.is_interactive(),
        flags,
        bounds,
        source_ids: ids,
        depth: node.depth,
        props,
    }
}

fn container_view(node: &UINode) -> View {
    View {
        view_id: 0,
        text: node.text.clone(),
        type_name: node.tag.clone(),
        interactive: node.flags.is_interactive(),
        flags: node.flags,
        bounds: node.bounds,
        source_ids: vec![node.node_id],
        depth: node.depth,
        props: BTreeMap::new(),
    }
}

fn transform_node(p: &TransformProgram, node: &UINode, opts: ApplyOptions) -> Result<Vec<View>, InterpretError> {
    let mut child_views = Vec::new();
    for child in &node.children {
        child_views.extend(transform_node(p, child, opts)?);
    }
    if child_views.is_empty() {
        return Ok(if eval_node(&p.leaf_filter, node)? {
            Vec::new()
        } else {
            vec![leaf_view(node, &p.leaf_props)]
        });
    }
    if eval_node(&p.node_filter, node)? {
        return Ok(child_views);
    }
    if eval_merge(&p.merge_when, node, &child_views)? {
        return Ok(vec![merged_view(node, child_views, &p.merge_props)]);
    }
    if opts.retain_containers {
        let mut out = Vec::with_capacity(child_views.len() + 1);
        out.push(container_view(node));
        out.extend(child_views);
        return Ok(out);
    }
    Ok(child_views)
}

fn number(mut views: Vec<View>) -> Vec<View> {
    for (i, v) in views.iter_mut().enumerate() {
        v.view_id = i;
    }
    views
}

pub fn apply(p: &TransformProgram, tree: &UITree) -> Result<ViewList, InterpretError> {
    apply_with(p, tree, ApplyOptions::default())
}

pub fn apply_with(p: &TransformProgram, tree: &UITree, opts: ApplyOptions) -> Result<ViewList, InterpretError> {
    Ok(ViewList {
        views: number(transform_node(p, &tree.root, opts)?),
        origin_node_count: tree.node_count,
        token_count: None,
    })
}

pub fn apply_library(lib: &[TransformProgram], tree: &UITree) -> Result<ViewList, InterpretError> {
    apply_library_with(lib, tree, ApplyOptions::default())
}

/// Folds the library over the tree. Between programs the view list is lifted
/// back into a tree; every lifted node remembers which original nodes it
/// stands for, so the final views always refer to ids of `tree`.
pub fn apply_library_with(
    lib: &[TransformProgram],
    tree: &UITree,
    opts: ApplyOptions,
) -> Result<ViewList, InterpretError> {
    let Some((first, rest)) = lib.split_first() else {
        return apply_with(&TransformProgram::identity("identity"), tree, opts);
    };
    let tag = |index: usize, p: &TransformProgram, e: InterpretError| InterpretError::InProgram {
        index,
        program_id: p.program_id.clone(),
        source: Box::new(e),
    };
    let mut views = apply_with(first, tree, opts).map_err(|e| tag(0, first, e))?;
    for (i, p) in rest.iter().enumerate() {
        let lifted = lift(&views);
        let next = apply_with(p, &lifted.tree, opts).map_err(|e| tag(i + 1, p, e))?;
        views = lifted.remap(next);
    }
    views.origin_node_count = tree.node_count;
    Ok(views)
}

// ---------------------------------------------------------------------------
// Serialization

/// Field portion of a view line, without indentation and source ids.
pub fn view_fields(v: &View) -> String {
    let mut out = String::new();
    write_node_fields(&mut out, &v.type_name, &v.text, v.flags, v.bounds, &v.props);
    out
}

/// One view per line, indented two spaces per depth, with its source ids.
pub fn serialize_views(list: &ViewList) -> String {
    let mut out = String::new();
    for v in &list.views {
        for _ in 0..v.depth {
            out.push_str("  ");
        }
        out.push_str(&view_fields(v));
        out.push_str(" ids=[");
        for (i, id) in v.source_ids.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&id.to_string());
        }
        out.push_str("]\n");
    }
    out
}
