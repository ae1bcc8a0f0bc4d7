//! The restricted transformation language.
//!
//! A program fills the four holes of the bottom-up transformation template:
//! which leaves to drop, which leaf attributes to keep, which internal nodes to
//! splice, and when to merge a node's child views into one.

mod enumerate;
mod parser;
mod validate;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

pub use enumerate::{enumerate_grammar, program_size, ProgramStream, Vocabulary};
pub use parser::{parse_library, parse_program, SyntaxError};
pub use validate::{
    validate_program, validate_program_with, Slot, ValidationReport, Violation, DEFAULT_MAX_DEPTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub const ALL: [Cmp; 5] = [Cmp::Eq, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge];

    pub fn holds(self, lhs: u64, rhs: u64) -> bool {
        match self {
            Cmp::Eq => lhs == rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// A regular expression atom. Matching is always anchored at both ends.
pub struct Pattern {
    source: String,
    compiled: OnceLock<Result<Regex, String>>,
}

impl Pattern {
    pub fn new(source: impl Into<String>) -> Self {
        Pattern {
            source: source.into(),
            compiled: OnceLock::new(),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn regex(&self) -> Result<&Regex, &str> {
        self.compiled
            .get_or_init(|| Regex::new(&format!("^(?:{})$", self.source)).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| e.as_str())
    }
}

impl Clone for Pattern {
    fn clone(&self) -> Self {
        Pattern::new(self.source.clone())
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for Pattern {}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}/", self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodePredicate {
    True,
    False,
    TagEquals(String),
    TagIn(Vec<String>),
    AttrExists(String),
    AttrEquals(String, String),
    AttrMatches(String, Pattern),
    TextEmpty,
    TextNonEmpty,
    TextEquals(String),
    Flag(String),
    ChildCount(Cmp, u32),
    Depth(Cmp, u32),
    Not(Box<NodePredicate>),
    And(Box<NodePredicate>, Box<NodePredicate>),
    Or(Box<NodePredicate>, Box<NodePredicate>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViewPredicate {
    True,
    False,
    TextEmpty,
    TextNonEmpty,
    Interactive,
    TypeEquals(String),
    Not(Box<ViewPredicate>),
    And(Box<ViewPredicate>, Box<ViewPredicate>),
    Or(Box<ViewPredicate>, Box<ViewPredicate>),
}

/// Merge decision over the parent node (guards) and its child views
/// (aggregators).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeCondition {
    True,
    False,
    Guard(NodePredicate),
    AllViews(ViewPredicate),
    AnyView(ViewPredicate),
    ViewCount(Cmp, u32),
    Not(Box<MergeCondition>),
    And(Box<MergeCondition>, Box<MergeCondition>),
    Or(Box<MergeCondition>, Box<MergeCondition>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TextRule {
    #[default]
    Concat,
    First,
    Parent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TypeRule {
    #[default]
    Parent,
    DominantChild,
}

/// Property rules for merged views. Interactivity (boolean or) and bounds
/// (rectangle union) are fixed and have no knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MergeRules {
    pub text: TextRule,
    pub type_rule: TypeRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ProvenanceKind {
    #[default]
    HandWritten,
    Enumerated,
    ExternalGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    pub iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformProgram {
    pub program_id: String,
    /// Leaf dropped when true.
    pub leaf_filter: NodePredicate,
    pub leaf_props: Vec<String>,
    /// Internal node spliced (its child views promoted) when true.
    pub node_filter: NodePredicate,
    pub merge_when: MergeCondition,
    pub merge_props: MergeRules,
    pub provenance: Provenance,
}

impl TransformProgram {
    /// Keeps every leaf, splices every internal node, never merges.
    pub fn identity(id: impl Into<String>) -> Self {
        TransformProgram {
            program_id: id.into(),
            leaf_filter: NodePredicate::False,
            leaf_props: vec!["text".into()],
            node_filter: NodePredicate::True,
            merge_when: MergeCondition::False,
            merge_props: MergeRules::default(),
            provenance: Provenance::default(),
        }
    }

    /// The program body on one line, without the `program <id>` prefix.
    /// Enumeration order and library de-duplication key off this string.
    pub fn body(&self) -> String {
        let mut out = String::new();
        self.write_body(&mut out, " ").expect("string write");
        out
    }

    /// Whole program on a single line.
    pub fn one_line(&self) -> String {
        format!("program {} {{ {} }}", self.program_id, self.body())
    }

    fn write_body(&self, out: &mut impl fmt::Write, sep: &str) -> fmt::Result {
        write!(out, "leaf-filter: {};{sep}", self.leaf_filter)?;
        write!(out, "leaf-props: [")?;
        for (i, k) in self.leaf_props.iter().enumerate() {
            if i > 0 {
                write!(out, ", ")?;
            }
            write_key(out, k)?;
        }
        write!(out, "];{sep}")?;
        write!(out, "node-filter: {};{sep}", self.node_filter)?;
        write!(out, "merge-when: {};{sep}", self.merge_when)?;
        let text = match self.merge_props.text {
            TextRule::Concat => "concat",
            TextRule::First => "first",
            TextRule::Parent => "parent",
        };
        let ty = match self.merge_props.type_rule {
            TypeRule::Parent => "parent",
            TypeRule::DominantChild => "dominant-child",
        };
        write!(out, "merge-props {{ text: {text}; type: {ty} }};")
    }
}

/// Multi-line pretty form; parses back to the same program.
impl fmt::Display for TransformProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "program {} {{", self.program_id)?;
        write!(f, "  ")?;
        self.write_body(f, "\n  ")?;
        write!(f, "\n}}")
    }
}

fn is_plain_key(k: &str) -> bool {
    !k.is_empty()
        && k.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && k.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !matches!(k, "and" | "or" | "not")
}

fn write_key(out: &mut impl fmt::Write, k: &str) -> fmt::Result {
    if is_plain_key(k) {
        write!(out, "{k}")
    } else {
        write_str_lit(out, k)
    }
}

pub(crate) fn write_str_lit(out: &mut impl fmt::Write, s: &str) -> fmt::Result {
    out.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => out.write_str("\\\"")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            '\t' => out.write_str("\\t")?,
            c => out.write_char(c)?,
        }
    }
    out.write_char('"')
}

// Precedence: or < and < not/atoms. Chains are left-associative, so a right
// operand of the same operator needs parentheses to survive a round trip.
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_ATOM: u8 = 3;

trait BoolExpr {
    fn prec(&self) -> u8;
    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_bare(f)
        }
    }
    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result;
}

impl BoolExpr for NodePredicate {
    fn prec(&self) -> u8 {
        match self {
            NodePredicate::Or(..) => PREC_OR,
            NodePredicate::And(..) => PREC_AND,
            _ => PREC_ATOM,
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use NodePredicate as P;
        match self {
            P::True => write!(f, "true"),
            P::False => write!(f, "false"),
            P::TagEquals(s) => {
                write!(f, "tag = ")?;
                write_str_lit(f, s)
            }
            P::TagIn(set) => {
                write!(f, "tag in (")?;
                for (i, s) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write_str_lit(f, s)?;
                }
                write!(f, ")")
            }
            P::AttrExists(k) => {
                write!(f, "attr(")?;
                write_str_lit(f, k)?;
                write!(f, ") exists")
            }
            P::AttrEquals(k, v) => {
                write!(f, "attr(")?;
                write_str_lit(f, k)?;
                write!(f, ") = ")?;
                write_str_lit(f, v)
            }
            P::AttrMatches(k, p) => {
                write!(f, "attr(")?;
                write_str_lit(f, k)?;
                write!(f, ") matches /{}/", p.source().replace('/', "\\/"))
            }
            P::TextEmpty => write!(f, "text empty"),
            P::TextNonEmpty => write!(f, "text nonempty"),
            P::TextEquals(s) => {
                write!(f, "text = ")?;
                write_str_lit(f, s)
            }
            P::Flag(name) => write!(f, "flag({name})"),
            P::ChildCount(c, n) => write!(f, "child-count {} {n}", c.symbol()),
            P::Depth(c, n) => write!(f, "depth {} {n}", c.symbol()),
            P::Not(inner) => {
                write!(f, "not ")?;
                inner.write_prec(f, PREC_ATOM)
            }
            P::And(l, r) => {
                l.write_prec(f, PREC_AND)?;
                write!(f, " and ")?;
                r.write_prec(f, PREC_ATOM)
            }
            P::Or(l, r) => {
                l.write_prec(f, PREC_OR)?;
                write!(f, " or ")?;
                r.write_prec(f, PREC_AND)
            }
        }
    }
}

impl BoolExpr for ViewPredicate {
    fn prec(&self) -> u8 {
        match self {
            ViewPredicate::Or(..) => PREC_OR,
            ViewPredicate::And(..) => PREC_AND,
            _ => PREC_ATOM,
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViewPredicate as V;
        match self {
            V::True => write!(f, "true"),
            V::False => write!(f, "false"),
            V::TextEmpty => write!(f, "text empty"),
            V::TextNonEmpty => write!(f, "text nonempty"),
            V::Interactive => write!(f, "interactive"),
            V::TypeEquals(s) => {
                write!(f, "type = ")?;
                write_str_lit(f, s)
            }
            V::Not(inner) => {
                write!(f, "not ")?;
                inner.write_prec(f, PREC_ATOM)
            }
            V::And(l, r) => {
                l.write_prec(f, PREC_AND)?;
                write!(f, " and ")?;
                r.write_prec(f, PREC_ATOM)
            }
            V::Or(l, r) => {
                l.write_prec(f, PREC_OR)?;
                write!(f, " or ")?;
                r.write_prec(f, PREC_AND)
            }
        }
    }
}

impl NodePredicate {
    fn is_atom(&self) -> bool {
        !matches!(
            self,
            NodePredicate::Not(_) | NodePredicate::And(..) | NodePredicate::Or(..)
        )
    }
}

impl BoolExpr for MergeCondition {
    fn prec(&self) -> u8 {
        match self {
            MergeCondition::Or(..) => PREC_OR,
            MergeCondition::And(..) => PREC_AND,
            _ => PREC_ATOM,
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MergeCondition as M;
        match self {
            M::True => write!(f, "true"),
            M::False => write!(f, "false"),
            // Bare node atoms read back as guards; anything else, including
            // the constants, needs the explicit wrapper.
            M::Guard(p) if p.is_atom() && !matches!(p, NodePredicate::True | NodePredicate::False) => {
                p.write_bare(f)
            }
            M::Guard(p) => write!(f, "node({p})"),
            M::AllViews(v) => write!(f, "all-views({v})"),
            M::AnyView(v) => write!(f, "any-view({v})"),
            M::ViewCount(c, n) => write!(f, "view-count {} {n}", c.symbol()),
            M::Not(inner) => {
                write!(f, "not ")?;
                inner.write_prec(f, PREC_ATOM)
            }
            M::And(l, r) => {
                l.write_prec(f, PREC_AND)?;
                write!(f, " and ")?;
                r.write_prec(f, PREC_ATOM)
            }
            M::Or(l, r) => {
                l.write_prec(f, PREC_OR)?;
                write!(f, " or ")?;
                r.write_prec(f, PREC_AND)
            }
        }
    }
}

impl fmt::Display for NodePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

impl fmt::Display for ViewPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

impl fmt::Display for MergeCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

/// Boolean constructors used by the enumerator and by tests.
#[allow(clippy::should_implement_trait)]
impl NodePredicate {
    pub fn not(p: NodePredicate) -> Self {
        NodePredicate::Not(Box::new(p))
    }
    pub fn and(l: NodePredicate, r: NodePredicate) -> Self {
        NodePredicate::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: NodePredicate, r: NodePredicate) -> Self {
        NodePredicate::Or(Box::new(l), Box::new(r))
    }
}

#[allow(clippy::should_implement_trait)]
impl ViewPredicate {
    pub fn not(p: ViewPredicate) -> Self {
        ViewPredicate::Not(Box::new(p))
    }
    pub fn and(l: ViewPredicate, r: ViewPredicate) -> Self {
        ViewPredicate::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: ViewPredicate, r: ViewPredicate) -> Self {
        ViewPredicate::Or(Box::new(l), Box::new(r))
    }
}

#[allow(clippy::should_implement_trait)]
impl MergeCondition {
    pub fn not(p: MergeCondition) -> Self {
        MergeCondition::Not(Box::new(p))
    }
    pub fn and(l: MergeCondition, r: MergeCondition) -> Self {
        MergeCondition::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: MergeCondition, r: MergeCondition) -> Self {
        MergeCondition::Or(Box::new(l), Box::new(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printer_parenthesizes_by_precedence() {
        use NodePredicate as P;
        let p = P::and(P::or(P::TextEmpty, P::Flag("clickable".into())), P::not(P::TextEmpty));
        assert_eq!(p.to_string(), "(text empty or flag(clickable)) and not text empty");
        let right = P::and(P::TextEmpty, P::and(P::TextEmpty, P::TextNonEmpty));
        assert_eq!(right.to_string(), "text empty and (text empty and text nonempty)");
        let left = P::and(P::and(P::TextEmpty, P::TextEmpty), P::TextNonEmpty);
        assert_eq!(left.to_string(), "text empty and text empty and text nonempty");
    }

    #[test]
    fn guard_printing() {
        assert_eq!(MergeCondition::Guard(NodePredicate::TextEmpty).to_string(), "text empty");
        assert_eq!(
            MergeCondition::Guard(NodePredicate::not(NodePredicate::TextEmpty)).to_string(),
            "node(not text empty)"
        );
        assert_eq!(MergeCondition::Guard(NodePredicate::True).to_string(), "node(true)");
    }

    #[test]
    fn anchored_patterns() {
        let p = Pattern::new("ab+");
        assert!(p.regex().unwrap().is_match("abbb"));
        assert!(!p.regex().unwrap().is_match("xabb"));
        assert!(Pattern::new("(").regex().is_err());
    }

    #[test]
    fn identity_body() {
        assert_eq!(
            TransformProgram::identity("id").body(),
            "leaf-filter: false; leaf-props: [text]; node-filter: true; merge-when: false; \
             merge-props { text: concat; type: parent };"
        );
    }
}
