use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::ui_tree::{Flag, UITree};

use super::{
    validate_program, Cmp, MergeCondition, MergeRules, NodePredicate, Provenance, ProvenanceKind,
    TextRule, TransformProgram, TypeRule, ViewPredicate,
};

/// Constants the enumerator may draw atoms from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub tags: Vec<String>,
    pub attr_keys: Vec<String>,
    pub attr_values: Vec<(String, String)>,
    pub texts: Vec<String>,
    pub flags: Vec<String>,
    pub ints: Vec<u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            tags: Vec::new(),
            attr_keys: Vec::new(),
            attr_values: Vec::new(),
            texts: Vec::new(),
            flags: Vec::new(),
            ints: vec![0, 1, 2, 3],
        }
    }
}

/// Caps keep the atom set, and with it the search space, bounded on large
/// trees. Entries are picked by frequency, ties by name.
const MAX_TAGS: usize = 12;
const MAX_KEYS: usize = 6;
const MAX_VALUES: usize = 6;
const MAX_TEXTS: usize = 6;

fn top_by_count<T: Ord + Clone>(counts: BTreeMap<T, usize>, min: usize, cap: usize) -> Vec<T> {
    let mut v: Vec<(T, usize)> = counts.into_iter().filter(|(_, c)| *c >= min).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut out: Vec<T> = v.into_iter().take(cap).map(|(k, _)| k).collect();
    out.sort();
    out
}

impl Vocabulary {
    /// Tags, attribute keys and flags seen anywhere; attribute values and
    /// texts only when they recur (they are otherwise unlikely to generalize).
    pub fn from_trees<'a>(trees: impl IntoIterator<Item = &'a UITree>) -> Self {
        let mut tags = BTreeMap::new();
        let mut keys = BTreeMap::new();
        let mut values = BTreeMap::new();
        let mut texts = BTreeMap::new();
        let mut flags = BTreeSet::new();
        for tree in trees {
            for n in tree.iter() {
                *tags.entry(n.tag.clone()).or_insert(0) += 1;
                if !n.text.is_empty() {
                    *texts.entry(n.text.clone()).or_insert(0) += 1;
                }
                for (k, v) in &n.attributes {
                    *keys.entry(k.clone()).or_insert(0) += 1;
                    *values.entry((k.clone(), v.clone())).or_insert(0) += 1;
                }
                for f in n.flags.iter() {
                    flags.insert(f);
                }
            }
        }
        Vocabulary {
            tags: top_by_count(tags, 1, MAX_TAGS),
            attr_keys: top_by_count(keys, 1, MAX_KEYS),
            attr_values: top_by_count(values, 2, MAX_VALUES),
            texts: top_by_count(texts, 2, MAX_TEXTS),
            flags: Flag::ALL
                .iter()
                .filter(|f| flags.contains(*f))
                .map(|f| f.name().to_string())
                .collect(),
            ..Vocabulary::default()
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.push(tag.into());
        self
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        self.flags.push(flag.name().to_string());
        self
    }
}

// ---------------------------------------------------------------------------
// Size measure

fn node_size(p: &NodePredicate) -> usize {
    use NodePredicate as P;
    match p {
        P::True | P::False => 1,
        P::TagEquals(_)
        | P::TextEmpty
        | P::TextNonEmpty
        | P::TextEquals(_)
        | P::Flag(_)
        | P::AttrExists(_) => 2,
        P::ChildCount(..) | P::Depth(..) | P::AttrEquals(..) | P::AttrMatches(..) => 3,
        P::TagIn(set) => 1 + set.len(),
        P::Not(i) => 1 + node_size(i),
        P::And(l, r) | P::Or(l, r) => 1 + node_size(l) + node_size(r),
    }
}

fn view_size(p: &ViewPredicate) -> usize {
    use ViewPredicate as V;
    match p {
        V::Not(i) => 1 + view_size(i),
        V::And(l, r) | V::Or(l, r) => 1 + view_size(l) + view_size(r),
        _ => 1,
    }
}

fn merge_size(p: &MergeCondition) -> usize {
    use MergeCondition as M;
    match p {
        M::True | M::False => 1,
        M::Guard(g) => node_size(g),
        M::AllViews(v) | M::AnyView(v) => 1 + view_size(v),
        M::ViewCount(..) => 3,
        M::Not(i) => 1 + merge_size(i),
        M::And(l, r) | M::Or(l, r) => 1 + merge_size(l) + merge_size(r),
    }
}

fn rules_size(r: &MergeRules) -> usize {
    usize::from(r.text != TextRule::Concat) + usize::from(r.type_rule != TypeRule::Parent)
}

/// AST size used to order enumeration. The all-constant programs have size 1.
pub fn program_size(p: &TransformProgram) -> usize {
    node_size(&p.leaf_filter) + node_size(&p.node_filter) + merge_size(&p.merge_when) - 2
        + rules_size(&p.merge_props)
}

// ---------------------------------------------------------------------------
// Canonical expression tables

/// Shared shape of the three boolean languages, so one generator can build
/// canonical and/or/not layers for all of them.
trait Expr: Clone + std::fmt::Display {
    fn is_not(&self) -> bool;
    fn and_parts(&self) -> Option<(&Self, &Self)>;
    fn or_parts(&self) -> Option<(&Self, &Self)>;
    fn mk_not(e: Self) -> Self;
    fn mk_and(l: Self, r: Self) -> Self;
    fn mk_or(l: Self, r: Self) -> Self;
    /// Whether a negation of this expression is allowed at all.
    fn negatable(&self) -> bool {
        true
    }
}

macro_rules! impl_expr {
    ($t:ident) => {
        impl Expr for $t {
            fn is_not(&self) -> bool {
                matches!(self, $t::Not(_))
            }
            fn and_parts(&self) -> Option<(&Self, &Self)> {
                match self {
                    $t::And(l, r) => Some((l, r)),
                    _ => None,
                }
            }
            fn or_parts(&self) -> Option<(&Self, &Self)> {
                match self {
                    $t::Or(l, r) => Some((l, r)),
                    _ => None,
                }
            }
            fn mk_not(e: Self) -> Self {
                $t::not(e)
            }
            fn mk_and(l: Self, r: Self) -> Self {
                $t::and(l, r)
            }
            fn mk_or(l: Self, r: Self) -> Self {
                $t::or(l, r)
            }
            impl_expr!(@negatable $t);
        }
    };
    (@negatable MergeCondition) => {
        // Aggregators may not sit below a negation; only guard atoms may.
        fn negatable(&self) -> bool {
            matches!(self, MergeCondition::Guard(_))
        }
    };
    (@negatable $t:ident) => {};
}

impl_expr!(NodePredicate);
impl_expr!(ViewPredicate);
impl_expr!(MergeCondition);

/// Non-constant expressions grouped by exact size, each with its printed form.
struct Table<E> {
    atoms: Vec<(usize, E)>,
    levels: Vec<Vec<(String, E)>>,
}

impl<E: Expr> Table<E> {
    fn new(atoms: Vec<(usize, E)>) -> Self {
        Table { atoms, levels: vec![Vec::new()] }
    }

    fn level(&mut self, size: usize) -> &[(String, E)] {
        while self.levels.len() <= size {
            let k = self.levels.len();
            let built = self.build(k);
            self.levels.push(built);
        }
        &self.levels[size]
    }

    fn build(&self, k: usize) -> Vec<(String, E)> {
        let mut out: Vec<E> = self
            .atoms
            .iter()
            .filter(|(s, _)| *s == k)
            .map(|(_, e)| e.clone())
            .collect();
        if k >= 2 {
            for (_, inner) in &self.levels[k - 1] {
                if !inner.is_not() && inner.negatable() && inner.and_parts().is_none() && inner.or_parts().is_none() {
                    out.push(E::mk_not(inner.clone()));
                }
            }
        }
        // Binary nodes: 1 + left + right = k, left-nested chains whose
        // operands are strictly increasing in printed order.
        for ls in 1..k.saturating_sub(1) {
            let rs = k - 1 - ls;
            if rs == 0 {
                continue;
            }
            for (lp, l) in &self.levels[ls] {
                for (rp, r) in &self.levels[rs] {
                    if r.and_parts().is_none() {
                        let last = match l.and_parts() {
                            Some((_, lr)) => lr.to_string(),
                            None => lp.clone(),
                        };
                        if last < *rp {
                            out.push(E::mk_and(l.clone(), r.clone()));
                        }
                    }
                    if r.or_parts().is_none() {
                        let last = match l.or_parts() {
                            Some((_, lr)) => lr.to_string(),
                            None => lp.clone(),
                        };
                        if last < *rp {
                            out.push(E::mk_or(l.clone(), r.clone()));
                        }
                    }
                }
            }
        }
        let mut printed: Vec<(String, E)> = out.into_iter().map(|e| (e.to_string(), e)).collect();
        printed.sort_by(|a, b| a.0.cmp(&b.0));
        printed.dedup_by(|a, b| a.0 == b.0);
        printed
    }
}

fn useful_comparison(c: Cmp, n: u32) -> bool {
    // `< 0` never holds and `>= 0` always does.
    !(n == 0 && matches!(c, Cmp::Lt | Cmp::Ge))
}

fn node_atoms(v: &Vocabulary) -> Vec<(usize, NodePredicate)> {
    use NodePredicate as P;
    let mut atoms = vec![P::TextEmpty, P::TextNonEmpty];
    atoms.extend(v.tags.iter().map(|t| P::TagEquals(t.clone())));
    atoms.extend(v.texts.iter().map(|t| P::TextEquals(t.clone())));
    atoms.extend(v.flags.iter().map(|f| P::Flag(f.clone())));
    atoms.extend(v.attr_keys.iter().map(|k| P::AttrExists(k.clone())));
    atoms.extend(v.attr_values.iter().map(|(k, val)| P::AttrEquals(k.clone(), val.clone())));
    for c in Cmp::ALL {
        for &n in &v.ints {
            if useful_comparison(c, n) {
                atoms.push(P::ChildCount(c, n));
                atoms.push(P::Depth(c, n));
            }
        }
    }
    let mut tags = v.tags.clone();
    tags.sort();
    tags.dedup();
    for (i, a) in tags.iter().enumerate() {
        for b in &tags[i + 1..] {
            atoms.push(P::TagIn(vec![a.clone(), b.clone()]));
        }
    }
    atoms.into_iter().map(|a| (node_size(&a), a)).collect()
}

fn view_atoms(v: &Vocabulary) -> Vec<(usize, ViewPredicate)> {
    let mut atoms = vec![ViewPredicate::TextEmpty, ViewPredicate::TextNonEmpty, ViewPredicate::Interactive];
    atoms.extend(v.tags.iter().map(|t| ViewPredicate::TypeEquals(t.clone())));
    atoms.into_iter().map(|a| (1, a)).collect()
}

/// Merge atoms for sizes up to `max`: node-atom guards, aggregators over
/// view predicates, and view-count comparisons.
fn merge_atoms(
    v: &Vocabulary,
    nodes: &[(usize, NodePredicate)],
    views: &mut Table<ViewPredicate>,
    max: usize,
) -> Vec<(usize, MergeCondition)> {
    let mut atoms: Vec<(usize, MergeCondition)> = nodes
        .iter()
        .map(|(s, a)| (*s, MergeCondition::Guard(a.clone())))
        .collect();
    for vs in 1..max {
        for (_, vp) in views.level(vs) {
            atoms.push((vs + 1, MergeCondition::AllViews(vp.clone())));
            atoms.push((vs + 1, MergeCondition::AnyView(vp.clone())));
        }
    }
    for c in Cmp::ALL {
        for &n in &v.ints {
            if useful_comparison(c, n) {
                atoms.push((3, MergeCondition::ViewCount(c, n)));
            }
        }
    }
    atoms
}

// ---------------------------------------------------------------------------
// Stream

/// Lazily yields programs one size level at a time. Within a level programs
/// are ordered by their printed body; ids are `e<size>_<index>`.
pub struct ProgramStream {
    budget: usize,
    next_size: usize,
    pending: VecDeque<TransformProgram>,
    nodes: Table<NodePredicate>,
    merges: Table<MergeCondition>,
    seen: HashMap<String, ()>,
}

const RULE_VARIANTS: [MergeRules; 6] = [
    MergeRules { text: TextRule::Concat, type_rule: TypeRule::Parent },
    MergeRules { text: TextRule::First, type_rule: TypeRule::Parent },
    MergeRules { text: TextRule::Parent, type_rule: TypeRule::Parent },
    MergeRules { text: TextRule::Concat, type_rule: TypeRule::DominantChild },
    MergeRules { text: TextRule::First, type_rule: TypeRule::DominantChild },
    MergeRules { text: TextRule::Parent, type_rule: TypeRule::DominantChild },
];

impl ProgramStream {
    fn new(vocab: &Vocabulary, budget: usize) -> Self {
        let node_atoms = node_atoms(vocab);
        let mut views = Table::new(view_atoms(vocab));
        let merge_atoms = merge_atoms(vocab, &node_atoms, &mut views, budget.max(1) + 2);
        ProgramStream {
            budget,
            next_size: 1,
            pending: VecDeque::new(),
            nodes: Table::new(node_atoms),
            merges: Table::new(merge_atoms),
            seen: HashMap::new(),
        }
    }

    fn node_options(&mut self, size: usize, allow_true: bool) -> Vec<NodePredicate> {
        if size == 1 {
            let mut v = vec![NodePredicate::False];
            if allow_true {
                v.push(NodePredicate::True);
            }
            return v;
        }
        self.nodes.level(size).iter().map(|(_, e)| e.clone()).collect()
    }

    fn merge_options(&mut self, size: usize) -> Vec<MergeCondition> {
        if size == 1 {
            return vec![MergeCondition::False, MergeCondition::True];
        }
        self.merges.level(size).iter().map(|(_, e)| e.clone()).collect()
    }

    fn fill_level(&mut self, size: usize) {
        // size = lf + nf + mw - 2 + rules, every slot at least 1.
        let mut level: Vec<(String, TransformProgram)> = Vec::new();
        for rules in RULE_VARIANTS {
            let extra = rules_size(&rules);
            if size < 1 + extra {
                continue;
            }
            let slots = size + 2 - extra;
            for lf in 1..=slots - 2 {
                for nf in 1..=slots - 1 - lf {
                    let mw = slots - lf - nf;
                    // Rule variants only matter when something can merge.
                    if extra > 0 && mw == 1 {
                        continue;
                    }
                    let lfs = self.node_options(lf, true);
                    // node-filter `true` splices every internal node and
                    // makes merge-when dead code; one such program
                    // (identity) is enough and it is not a search target.
                    let nfs = self.node_options(nf, false);
                    let mws = self.merge_options(mw);
                    for l in &lfs {
                        for n in &nfs {
                            for m in &mws {
                                if extra > 0 && *m == MergeCondition::False {
                                    continue;
                                }
                                let p = TransformProgram {
                                    program_id: String::new(),
                                    leaf_filter: l.clone(),
                                    leaf_props: vec!["text".into()],
                                    node_filter: n.clone(),
                                    merge_when: m.clone(),
                                    merge_props: rules,
                                    provenance: Provenance {
                                        kind: ProvenanceKind::Enumerated,
                                        iteration: None,
                                    },
                                };
                                level.push((p.body(), p));
                            }
                        }
                    }
                }
            }
        }
        level.sort_by(|a, b| a.0.cmp(&b.0));
        let mut index = 0;
        for (body, mut p) in level {
            if self.seen.insert(body, ()).is_some() || !validate_program(&p).is_valid() {
                continue;
            }
            p.program_id = format!("e{size}_{index}");
            index += 1;
            self.pending.push_back(p);
        }
    }
}

impl Iterator for ProgramStream {
    type Item = TransformProgram;

    fn next(&mut self) -> Option<TransformProgram> {
        loop {
            if let Some(p) = self.pending.pop_front() {
                return Some(p);
            }
            if self.next_size > self.budget {
                return None;
            }
            let s = self.next_size;
            self.next_size += 1;
            self.fill_level(s);
        }
    }
}

/// Every valid program up to `budget` in (size, printed body) order.
pub fn enumerate_grammar(vocab: &Vocabulary, budget: usize) -> ProgramStream {
    ProgramStream::new(vocab, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_one_is_the_four_constant_programs() {
        let progs: Vec<_> = enumerate_grammar(&Vocabulary::default(), 1).collect();
        assert_eq!(progs.len(), 4);
        for p in &progs {
            assert_eq!(program_size(p), 1);
            assert_eq!(p.node_filter, NodePredicate::False);
            assert_eq!(p.provenance.kind, ProvenanceKind::Enumerated);
        }
        let pairs: BTreeSet<String> = progs
            .iter()
            .map(|p| format!("{} {}", p.leaf_filter, p.merge_when))
            .collect();
        assert_eq!(pairs.len(), 4);
    }

    #[test]
    fn tag_vocabulary_reaches_node_filter() {
        let v = Vocabulary::default().with_tag("TextView");
        let found = enumerate_grammar(&v, 3)
            .any(|p| p.node_filter == NodePredicate::TagEquals("TextView".into()));
        assert!(found);
    }

    #[test]
    fn ordered_unique_valid_and_deterministic() {
        let v = Vocabulary::default().with_tag("A").with_tag("B").with_flag(Flag::Clickable);
        let a: Vec<_> = enumerate_grammar(&v, 4).collect();
        let b: Vec<_> = enumerate_grammar(&v, 4).collect();
        assert_eq!(a, b);
        let mut seen = BTreeSet::new();
        for w in a.windows(2) {
            let (s0, s1) = (program_size(&w[0]), program_size(&w[1]));
            assert!(s0 < s1 || (s0 == s1 && w[0].body() < w[1].body()));
        }
        for p in &a {
            assert!(seen.insert(p.body()));
            assert!(validate_program(p).is_valid(), "{p}");
            assert!(program_size(p) <= 4);
        }
    }

    #[test]
    fn canonical_binary_forms() {
        let v = Vocabulary::default().with_flag(Flag::Clickable);
        let progs: Vec<_> = enumerate_grammar(&v, 6).collect();
        let and = NodePredicate::and(NodePredicate::TextEmpty, NodePredicate::Flag("clickable".into()));
        let swapped = NodePredicate::and(NodePredicate::Flag("clickable".into()), NodePredicate::TextEmpty);
        let has = |p: &NodePredicate| progs.iter().any(|q| q.leaf_filter == *p);
        assert_ne!(has(&and), has(&swapped));
        assert!(!progs.iter().any(|q| matches!(q.leaf_filter, NodePredicate::Not(ref i) if matches!(**i, NodePredicate::Not(_)))));
    }
}
