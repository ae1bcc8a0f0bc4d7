use std::fmt;

use crate::ui_tree::Flag;

use super::{MergeCondition, NodePredicate, TransformProgram, ViewPredicate};

pub const DEFAULT_MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    LeafFilter,
    NodeFilter,
    MergeWhen,
    LeafProps,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::LeafFilter => "leaf-filter",
            Slot::NodeFilter => "node-filter",
            Slot::MergeWhen => "merge-when",
            Slot::LeafProps => "leaf-props",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DepthExceeded { slot: Slot, depth: usize, max: usize },
    AggregatorPlacement { slot: Slot },
    UnknownFlag { slot: Slot, name: String },
    InvalidPattern { slot: Slot, pattern: String, detail: String },
    EmptyAttrKey { slot: Slot },
    EmptyTagSet { slot: Slot },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DepthExceeded { slot, depth, max } => {
                write!(f, "{slot}: expression depth {depth} exceeds {max}")
            }
            Violation::AggregatorPlacement { slot } => {
                write!(f, "{slot}: view aggregator below a negation")
            }
            Violation::UnknownFlag { slot, name } => write!(f, "{slot}: unknown flag `{name}`"),
            Violation::InvalidPattern { slot, pattern, detail } => {
                write!(f, "{slot}: invalid pattern /{pattern}/: {detail}")
            }
            Violation::EmptyAttrKey { slot } => write!(f, "{slot}: empty attribute key"),
            Violation::EmptyTagSet { slot } => write!(f, "{slot}: empty tag set"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Depth of an and/or chain counts once regardless of its length, so
/// `a and b and c` is as deep as `a and b`.
fn node_depth(p: &NodePredicate) -> usize {
    match p {
        NodePredicate::Not(inner) => 1 + node_depth(inner),
        NodePredicate::And(..) | NodePredicate::Or(..) => {
            let mut ops = Vec::new();
            flatten_node(p, &mut ops);
            1 + ops.iter().map(|o| node_depth(o)).max().unwrap_or(0)
        }
        _ => 1,
    }
}

fn flatten_node<'a>(p: &'a NodePredicate, out: &mut Vec<&'a NodePredicate>) {
    match p {
        NodePredicate::And(l, r) => {
            for side in [l, r] {
                if matches!(**side, NodePredicate::And(..)) {
                    flatten_node(side, out)
                } else {
                    out.push(side)
                }
            }
        }
        NodePredicate::Or(l, r) => {
            for side in [l, r] {
                if matches!(**side, NodePredicate::Or(..)) {
                    flatten_node(side, out)
                } else {
                    out.push(side)
                }
            }
        }
        _ => out.push(p),
    }
}

fn view_depth(p: &ViewPredicate) -> usize {
    match p {
        ViewPredicate::Not(inner) => 1 + view_depth(inner),
        ViewPredicate::And(l, r) => {
            let same = |s: &ViewPredicate| {
                if matches!(s, ViewPredicate::And(..)) {
                    view_depth(s) - 1
                } else {
                    view_depth(s)
                }
            };
            1 + same(l).max(same(r))
        }
        ViewPredicate::Or(l, r) => {
            let same = |s: &ViewPredicate| {
                if matches!(s, ViewPredicate::Or(..)) {
                    view_depth(s) - 1
                } else {
                    view_depth(s)
                }
            };
            1 + same(l).max(same(r))
        }
        _ => 1,
    }
}

/// Guards and aggregators are transparent wrappers: they add no level of
/// their own beyond their inner expression.
fn merge_depth(p: &MergeCondition) -> usize {
    match p {
        MergeCondition::Guard(g) => node_depth(g),
        MergeCondition::AllViews(v) | MergeCondition::AnyView(v) => view_depth(v),
        MergeCondition::Not(inner) => 1 + merge_depth(inner),
        MergeCondition::And(l, r) => {
            let same = |s: &MergeCondition| {
                if matches!(s, MergeCondition::And(..)) {
                    merge_depth(s) - 1
                } else {
                    merge_depth(s)
                }
            };
            1 + same(l).max(same(r))
        }
        MergeCondition::Or(l, r) => {
            let same = |s: &MergeCondition| {
                if matches!(s, MergeCondition::Or(..)) {
                    merge_depth(s) - 1
                } else {
                    merge_depth(s)
                }
            };
            1 + same(l).max(same(r))
        }
        _ => 1,
    }
}

fn check_node(p: &NodePredicate, slot: Slot, out: &mut Vec<Violation>) {
    match p {
        NodePredicate::Flag(name) => {
            if Flag::from_name(name).is_none() {
                out.push(Violation::UnknownFlag { slot, name: name.clone() });
            }
        }
        NodePredicate::AttrMatches(k, pat) => {
            if k.is_empty() {
                out.push(Violation::EmptyAttrKey { slot });
            }
            if let Err(detail) = pat.regex() {
                out.push(Violation::InvalidPattern {
                    slot,
                    pattern: pat.source().to_string(),
                    detail: detail.to_string(),
                });
            }
        }
        NodePredicate::AttrExists(k) | NodePredicate::AttrEquals(k, _) => {
            if k.is_empty() {
                out.push(Violation::EmptyAttrKey { slot });
            }
        }
        NodePredicate::TagIn(set) if set.is_empty() => out.push(Violation::EmptyTagSet { slot }),
        NodePredicate::Not(inner) => check_node(inner, slot, out),
        NodePredicate::And(l, r) | NodePredicate::Or(l, r) => {
            check_node(l, slot, out);
            check_node(r, slot, out);
        }
        _ => {}
    }
}

fn check_merge(p: &MergeCondition, negated: bool, out: &mut Vec<Violation>) {
    let slot = Slot::MergeWhen;
    match p {
        MergeCondition::Guard(g) => check_node(g, slot, out),
        MergeCondition::AllViews(_) | MergeCondition::AnyView(_) | MergeCondition::ViewCount(..) => {
            if negated {
                out.push(Violation::AggregatorPlacement { slot });
            }
        }
        MergeCondition::Not(inner) => check_merge(inner, true, out),
        MergeCondition::And(l, r) | MergeCondition::Or(l, r) => {
            check_merge(l, negated, out);
            check_merge(r, negated, out);
        }
        MergeCondition::True | MergeCondition::False => {}
    }
}

pub fn validate_program(p: &TransformProgram) -> ValidationReport {
    validate_program_with(p, DEFAULT_MAX_DEPTH)
}

pub fn validate_program_with(p: &TransformProgram, max_depth: usize) -> ValidationReport {
    let mut v = Vec::new();
    for (slot, pred) in [(Slot::LeafFilter, &p.leaf_filter), (Slot::NodeFilter, &p.node_filter)] {
        let depth = node_depth(pred);
        if depth > max_depth {
            v.push(Violation::DepthExceeded { slot, depth, max: max_depth });
        }
        check_node(pred, slot, &mut v);
    }
    let depth = merge_depth(&p.merge_when);
    if depth > max_depth {
        v.push(Violation::DepthExceeded { slot: Slot::MergeWhen, depth, max: max_depth });
    }
    check_merge(&p.merge_when, false, &mut v);
    if p.leaf_props.iter().any(|k| k.is_empty()) {
        v.push(Violation::EmptyAttrKey { slot: Slot::LeafProps });
    }
    ValidationReport { violations: v }
}
