//! Canonical interchange format.
//!
//! ```text
//! uitree v1 android_xml
//! android.widget.FrameLayout flags=[enabled,visible] bounds=[0,0][1080,2340]
//!   android.widget.TextView text="Bill Amount" attrs{resource-id="com.tip:id/label"}
//! ```
//!
//! One node per line in pre-order, two spaces of indentation per depth level.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Bounds, Flag, FlagSet, TreeError, TreeSource, UINode, UITree};

const HEADER: &str = "uitree v1";

fn is_bare(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | ':' | '-' | '$' | '/' | '#' | '@'))
}

pub(crate) fn push_quoted(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn push_word(out: &mut String, s: &str) {
    if is_bare(s) {
        out.push_str(s);
    } else {
        push_quoted(out, s);
    }
}

/// One parsed record line: a head word followed by optional fields.
///
/// Tree nodes use `text`, `flags`, `bounds` and `attrs`; view lines add `ids`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldLine {
    pub head: String,
    pub text: Option<String>,
    pub flags: Option<FlagSet>,
    pub bounds: Option<Bounds>,
    pub attrs: Option<BTreeMap<String, String>>,
    pub ids: Option<Vec<usize>>,
}

/// Appends the field portion of a record line (everything after the indent).
pub fn write_node_fields(
    out: &mut String,
    head: &str,
    text: &str,
    flags: FlagSet,
    bounds: Option<Bounds>,
    attrs: &BTreeMap<String, String>,
) {
    push_word(out, head);
    if !text.is_empty() {
        out.push_str(" text=");
        push_quoted(out, text);
    }
    if !flags.is_empty() {
        out.push_str(" flags=[");
        for (i, f) in flags.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(f.name());
        }
        out.push(']');
    }
    if let Some(b) = bounds {
        let _ = write!(out, " bounds={b}");
    }
    if !attrs.is_empty() {
        out.push_str(" attrs{");
        for (i, (k, v)) in attrs.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_word(out, k);
            out.push('=');
            push_quoted(out, v);
        }
        out.push('}');
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, prefix: &str) -> bool {
        if self.s[self.pos..].starts_with(prefix) {
            self.pos += prefix.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, prefix: &str) -> Result<(), String> {
        if self.eat(prefix) {
            Ok(())
        } else {
            Err(format!("expected `{prefix}` at column {}", self.pos + 1))
        }
    }

    fn skip_spaces(&mut self) {
        while self.peek() == Some(' ') {
            self.pos += 1;
        }
    }

    fn quoted(&mut self) -> Result<String, String> {
        self.expect("\"")?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated string".into()),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    other => return Err(format!("invalid escape {other:?} at column {}", self.pos)),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn bare(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | ':' | '-' | '$' | '/' | '#' | '@') {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.s[start..self.pos].to_string()
    }

    fn word(&mut self) -> Result<String, String> {
        if self.peek() == Some('"') {
            self.quoted()
        } else {
            let w = self.bare();
            if w.is_empty() {
                Err(format!("expected a word at column {}", self.pos + 1))
            } else {
                Ok(w)
            }
        }
    }

    fn int(&mut self) -> Result<i64, String> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.s[start..self.pos]
            .parse()
            .map_err(|_| format!("expected an integer at column {}", start + 1))
    }

    fn list<T>(
        &mut self,
        close: &str,
        mut item: impl FnMut(&mut Self) -> Result<T, String>,
    ) -> Result<Vec<T>, String> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }
}

impl FieldLine {
    /// Parses the part of a record line after its indentation.
    pub fn parse(line: &str) -> Result<FieldLine, String> {
        let mut c = Cursor { s: line, pos: 0 };
        let head = c.word()?;
        let mut out = FieldLine {
            head,
            ..FieldLine::default()
        };
        loop {
            c.skip_spaces();
            if c.peek().is_none() {
                return Ok(out);
            }
            let at = c.pos + 1;
            let key = c.bare();
            let dup = || format!("duplicate field `{key}` at column {at}");
            match key.as_str() {
                "text" => {
                    c.expect("=")?;
                    if out.text.replace(c.quoted()?).is_some() {
                        return Err(dup());
                    }
                }
                "flags" => {
                    c.expect("=[")?;
                    let names = c.list("]", |c| Ok(c.bare()))?;
                    let mut set = FlagSet::EMPTY;
                    for n in names {
                        let f = Flag::from_name(&n).ok_or_else(|| format!("unknown flag `{n}`"))?;
                        set.insert(f);
                    }
                    if out.flags.replace(set).is_some() {
                        return Err(dup());
                    }
                }
                "bounds" => {
                    c.expect("=[")?;
                    let x1 = c.int()?;
                    c.expect(",")?;
                    let y1 = c.int()?;
                    c.expect("][")?;
                    let x2 = c.int()?;
                    c.expect(",")?;
                    let y2 = c.int()?;
                    c.expect("]")?;
                    let b = Bounds::new(x1, y1, x2, y2)
                        .ok_or_else(|| format!("inverted bounds at column {at}"))?;
                    if out.bounds.replace(b).is_some() {
                        return Err(dup());
                    }
                }
                "attrs" => {
                    c.expect("{")?;
                    let pairs = c.list("}", |c| {
                        let k = c.word()?;
                        c.expect("=")?;
                        Ok((k, c.quoted()?))
                    })?;
                    if out.attrs.replace(pairs.into_iter().collect()).is_some() {
                        return Err(dup());
                    }
                }
                "ids" => {
                    c.expect("=[")?;
                    let ids = c.list("]", |c| {
                        let v = c.int()?;
                        usize::try_from(v).map_err(|_| "negative id".to_string())
                    })?;
                    if out.ids.replace(ids).is_some() {
                        return Err(dup());
                    }
                }
                "" => return Err(format!("unexpected character at column {at}")),
                other => return Err(format!("unknown field `{other}` at column {at}")),
            }
        }
    }
}

/// Splits a record line into (depth, rest). Indentation must be whole levels.
pub(crate) fn split_indent(line: &str) -> Result<(usize, &str), String> {
    let spaces = line.len() - line.trim_start_matches(' ').len();
    let rest = &line[spaces..];
    if rest.starts_with('\t') {
        return Err("tab indentation is not allowed".into());
    }
    if !spaces.is_multiple_of(2) {
        return Err(format!("odd indentation ({spaces} spaces)"));
    }
    Ok((spaces / 2, rest))
}

pub fn serialize_canonical(tree: &UITree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER} {}", tree.source.as_str());
    for node in tree.iter() {
        for _ in 0..node.depth {
            out.push_str("  ");
        }
        write_node_fields(&mut out, &node.tag, &node.text, node.flags, node.bounds, &node.attributes);
        out.push('\n');
    }
    out
}

pub fn parse_canonical(document: &str) -> Result<UITree, TreeError> {
    let mut lines = document.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(TreeError::EmptyTree)?;
    let source = header
        .trim()
        .strip_prefix(HEADER)
        .map(str::trim)
        .ok_or_else(|| TreeError::SchemaViolation {
            path: "header".into(),
            detail: format!("expected `{HEADER} <source>`, found {header:?}"),
        })?;
    let source = TreeSource::from_str_opt(source).ok_or_else(|| TreeError::SchemaViolation {
        path: "header.source".into(),
        detail: format!("unknown source {source:?}"),
    })?;

    // Open ancestors; index i holds the node at depth i.
    let mut stack: Vec<UINode> = Vec::new();
    let mut root: Option<UINode> = None;
    let mut index = 0usize;

    for (lineno, line) in lines {
        let line_no = lineno + 1;
        let malformed = |detail: String| TreeError::MalformedDocument { line: line_no, detail };
        let (depth, rest) = split_indent(line).map_err(malformed)?;
        if root.is_some() {
            return Err(malformed("content after the root subtree".into()));
        }
        if depth > stack.len() {
            return Err(malformed(format!(
                "indentation jumps from depth {} to {depth}",
                stack.len().saturating_sub(1)
            )));
        }
        if rest.starts_with(|c: char| c == '"' || c.is_ascii_alphanumeric() || "_.:-$/#@".contains(c)) {
            let path = format!("node[{index}]");
            let bare_head = rest.split([' ', '=', '{']).next().unwrap_or("");
            if matches!(bare_head, "text" | "flags" | "bounds" | "attrs")
                && rest[bare_head.len()..].starts_with(['=', '{'])
            {
                return Err(TreeError::SchemaViolation {
                    path: format!("{path}.tag"),
                    detail: format!("line {line_no}: missing tag"),
                });
            }
            let fields = FieldLine::parse(rest).map_err(malformed)?;
            if fields.ids.is_some() {
                return Err(malformed("`ids` is not a tree-node field".into()));
            }
            while stack.len() > depth {
                let done = stack.pop().expect("non-empty");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => root = Some(done),
                }
            }
            if root.is_some() {
                return Err(malformed("more than one root node".into()));
            }
            let mut node = UINode::new(fields.head);
            node.text = super::normalize_text(&fields.text.unwrap_or_default());
            node.flags = fields.flags.unwrap_or_default();
            node.bounds = fields.bounds;
            node.attributes = fields.attrs.unwrap_or_default();
            stack.push(node);
            index += 1;
        } else {
            return Err(TreeError::SchemaViolation {
                path: format!("node[{index}].tag"),
                detail: format!("line {line_no}: missing tag"),
            });
        }
    }
    while let Some(done) = stack.pop() {
        match stack.last_mut() {
            Some(parent) => parent.children.push(done),
            None => root = Some(done),
        }
    }
    let root = root.ok_or(TreeError::EmptyTree)?;
    Ok(UITree::new(root, source))
}
