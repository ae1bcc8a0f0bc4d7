//! Canonical UI-tree model shared by every other module.
//!
//! Trees come from two places: Android accessibility dumps
//! ([`parse_android_xml`]) and the line-oriented canonical interchange format
//! ([`parse_canonical`] / [`serialize_canonical`]), which is also how DOM
//! exports enter the toolkit.

mod android;
mod canonical;

use std::collections::BTreeMap;
use std::fmt;

pub use android::parse_android_xml;
pub use canonical::{parse_canonical, serialize_canonical, write_node_fields, FieldLine};
pub(crate) use canonical::push_quoted;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("malformed document (line {line}): {detail}")]
    MalformedDocument { line: usize, detail: String },
    #[error("document contains no element nodes")]
    EmptyTree,
    #[error("malformed bounds {value:?}: expected [x1,y1][x2,y2] with x1<=x2 and y1<=y2")]
    MalformedBounds { value: String },
    #[error("schema violation at {path}: {detail}")]
    SchemaViolation { path: String, detail: String },
}

/// Screen rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl Bounds {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Option<Self> {
        (x1 <= x2 && y1 <= y2).then_some(Self { x1, y1, x2, y2 })
    }

    pub fn union(&self, other: &Bounds) -> Bounds {
        Bounds {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    /// Parses the uiautomator bracket form `[x1,y1][x2,y2]`.
    pub fn parse(value: &str) -> Result<Self, TreeError> {
        let bad = || TreeError::MalformedBounds {
            value: value.to_string(),
        };
        let s = value.trim();
        let inner = s
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(bad)?;
        let (first, second) = inner.split_once("][").ok_or_else(bad)?;
        let pair = |p: &str| -> Option<(i64, i64)> {
            let (a, b) = p.split_once(',')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        };
        let (x1, y1) = pair(first).ok_or_else(bad)?;
        let (x2, y2) = pair(second).ok_or_else(bad)?;
        Bounds::new(x1, y1, x2, y2).ok_or_else(bad)
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}][{},{}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Boolean node capabilities. Order here is the serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    Clickable,
    LongClickable,
    Focusable,
    Enabled,
    Visible,
    Scrollable,
    Editable,
    Checkable,
}

impl Flag {
    pub const ALL: [Flag; 8] = [
        Flag::Clickable,
        Flag::LongClickable,
        Flag::Focusable,
        Flag::Enabled,
        Flag::Visible,
        Flag::Scrollable,
        Flag::Editable,
        Flag::Checkable,
    ];

    /// Flags that make a node something an agent can act on.
    pub const INTERACTIVE: [Flag; 4] = [
        Flag::Clickable,
        Flag::LongClickable,
        Flag::Editable,
        Flag::Checkable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Flag::Clickable => "clickable",
            Flag::LongClickable => "long_clickable",
            Flag::Focusable => "focusable",
            Flag::Enabled => "enabled",
            Flag::Visible => "visible",
            Flag::Scrollable => "scrollable",
            Flag::Editable => "editable",
            Flag::Checkable => "checkable",
        }
    }

    pub fn from_name(name: &str) -> Option<Flag> {
        Flag::ALL
            .into_iter()
            .find(|f| f.name() == name || f.name().replace('_', "-") == name)
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FlagSet(u8);

impl FlagSet {
    pub const EMPTY: FlagSet = FlagSet(0);

    pub fn contains(self, flag: Flag) -> bool {
        self.0 & flag.bit() != 0
    }

    pub fn insert(&mut self, flag: Flag) {
        self.0 |= flag.bit();
    }

    pub fn set(&mut self, flag: Flag, on: bool) {
        if on {
            self.0 |= flag.bit();
        } else {
            self.0 &= !flag.bit();
        }
    }

    pub fn with(mut self, flag: Flag) -> Self {
        self.insert(flag);
        self
    }

    pub fn union(self, other: FlagSet) -> FlagSet {
        FlagSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_interactive(self) -> bool {
        Flag::INTERACTIVE.iter().any(|f| self.contains(*f))
    }

    pub fn iter(self) -> impl Iterator<Item = Flag> {
        Flag::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl FromIterator<Flag> for FlagSet {
    fn from_iter<I: IntoIterator<Item = Flag>>(iter: I) -> Self {
        let mut s = FlagSet::EMPTY;
        for f in iter {
            s.insert(f);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeSource {
    AndroidXml,
    Canonical,
    DomExport,
}

impl TreeSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TreeSource::AndroidXml => "android_xml",
            TreeSource::Canonical => "canonical",
            TreeSource::DomExport => "dom_export",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "android_xml" => Some(TreeSource::AndroidXml),
            "canonical" => Some(TreeSource::Canonical),
            "dom_export" => Some(TreeSource::DomExport),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UINode {
    pub node_id: usize,
    pub tag: String,
    pub text: String,
    pub attributes: BTreeMap<String, String>,
    pub flags: FlagSet,
    pub bounds: Option<Bounds>,
    pub children: Vec<UINode>,
    pub depth: usize,
}

impl UINode {
    /// A bare node; ids and depths are fixed up by [`UITree::new`].
    pub fn new(tag: impl Into<String>) -> Self {
        UINode {
            node_id: 0,
            tag: tag.into(),
            text: String::new(),
            attributes: BTreeMap::new(),
            flags: FlagSet::EMPTY,
            bounds: None,
            children: Vec::new(),
            depth: 0,
        }
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.text = normalize_text(text);
        self
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        self.flags.insert(flag);
        self
    }

    pub fn with_attr(mut self, key: &str, value: &str) -> Self {
        self.attributes.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_children(mut self, children: Vec<UINode>) -> Self {
        self.children = children;
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_interactive(&self) -> bool {
        self.flags.is_interactive()
    }

    /// Pre-order iterator over this node and its descendants.
    pub fn iter(&self) -> PreOrder<'_> {
        PreOrder { stack: vec![self] }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &UINode> {
        self.iter().filter(|n| n.is_leaf())
    }

    fn renumber(&mut self, next: &mut usize, depth: usize) {
        self.node_id = *next;
        self.depth = depth;
        *next += 1;
        for child in &mut self.children {
            child.renumber(next, depth + 1);
        }
    }
}

pub struct PreOrder<'a> {
    stack: Vec<&'a UINode>,
}

impl<'a> Iterator for PreOrder<'a> {
    type Item = &'a UINode;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UITree {
    pub root: UINode,
    pub source: TreeSource,
    pub node_count: usize,
}

impl UITree {
    /// Builds a tree, assigning pre-order ids from 0 and recomputing depths.
    pub fn new(mut root: UINode, source: TreeSource) -> Self {
        let mut next = 0;
        root.renumber(&mut next, 0);
        UITree {
            root,
            source,
            node_count: next,
        }
    }

    pub fn iter(&self) -> PreOrder<'_> {
        self.root.iter()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &UINode> {
        self.root.leaves()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn node(&self, id: usize) -> Option<&UINode> {
        self.iter().find(|n| n.node_id == id)
    }
}

/// Trims and collapses internal whitespace runs to a single space.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Parses either format, sniffing the first non-blank characters.
pub fn parse_any(document: &str) -> Result<UITree, TreeError> {
    if document.trim_start().starts_with("uitree ") {
        parse_canonical(document)
    } else {
        parse_android_xml(document)
    }
}
