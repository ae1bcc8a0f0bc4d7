//! Text renderings of trees and view lists, and prompt assembly.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evaluation::{EvalError, TokenCounter};
use crate::interpreter::{view_fields, ViewList};
use crate::ui_tree::{push_quoted, Flag, UINode, UITree};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("the random ordering needs a seed")]
    MissingSeed,
    #[error("`{0}` renders a tree, not a view list")]
    NotAViewRenderer(RenderKind),
    #[error("unknown render kind `{0}`")]
    UnknownKind(String),
    #[error(transparent)]
    Count(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RenderKind {
    Hierarchical,
    DfsFlat,
    Random,
    Ops,
    Leaf,
    Flattened,
}

impl RenderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RenderKind::Hierarchical => "hierarchical",
            RenderKind::DfsFlat => "dfs",
            RenderKind::Random => "random",
            RenderKind::Ops => "ops",
            RenderKind::Leaf => "leaf",
            RenderKind::Flattened => "flattened",
        }
    }

    /// Kinds that render a transformed view list (the rest are baselines
    /// computed directly from a tree).
    pub fn is_view_kind(self) -> bool {
        matches!(self, RenderKind::Hierarchical | RenderKind::DfsFlat | RenderKind::Random)
    }
}

impl fmt::Display for RenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RenderKind {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "hierarchical" => RenderKind::Hierarchical,
            "dfs" | "dfs_flat" => RenderKind::DfsFlat,
            "random" => RenderKind::Random,
            "ops" => RenderKind::Ops,
            "leaf" => RenderKind::Leaf,
            "flattened" => RenderKind::Flattened,
            other => return Err(RenderError::UnknownKind(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedRepresentation {
    pub kind: RenderKind,
    pub lines: Vec<String>,
    pub token_count: usize,
    pub seed: Option<u64>,
}

impl RenderedRepresentation {
    fn counted(kind: RenderKind, lines: Vec<String>, seed: Option<u64>, counter: &TokenCounter) -> Result<Self, RenderError> {
        let token_count = counter.count(&lines.join("\n"))?;
        Ok(RenderedRepresentation { kind, lines, token_count, seed })
    }

    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}

/// Lines of a view rendering, without token counting.
pub fn view_lines(views: &ViewList, kind: RenderKind, seed: Option<u64>) -> Result<Vec<String>, RenderError> {
    let flat = || views.views.iter().map(view_fields).collect::<Vec<_>>();
    Ok(match kind {
        RenderKind::Hierarchical => views
            .views
            .iter()
            .map(|v| format!("{}{}", "  ".repeat(v.depth), view_fields(v)))
            .collect(),
        RenderKind::DfsFlat => flat(),
        RenderKind::Random => {
            let seed = seed.ok_or(RenderError::MissingSeed)?;
            let mut lines = flat();
            lines.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            lines
        }
        other => return Err(RenderError::NotAViewRenderer(other)),
    })
}

pub fn render(
    views: &ViewList,
    kind: RenderKind,
    seed: Option<u64>,
    counter: &TokenCounter,
) -> Result<RenderedRepresentation, RenderError> {
    let lines = view_lines(views, kind, seed)?;
    RenderedRepresentation::counted(kind, lines, seed.filter(|_| kind == RenderKind::Random), counter)
}

/// Renders a tree baseline (`ops`, `leaf`, `flattened`).
pub fn render_baseline(tree: &UITree, kind: RenderKind, counter: &TokenCounter) -> Result<RenderedRepresentation, RenderError> {
    let lines = match kind {
        RenderKind::Ops => ops_lines(tree),
        RenderKind::Leaf => leaf_lines(tree),
        RenderKind::Flattened => flattened_lines(tree),
        other => return Err(RenderError::UnknownKind(format!("{other} is not a baseline"))),
    };
    RenderedRepresentation::counted(kind, lines, None, counter)
}

pub fn baseline_ops(tree: &UITree, counter: &TokenCounter) -> Result<RenderedRepresentation, RenderError> {
    render_baseline(tree, RenderKind::Ops, counter)
}

pub fn baseline_leaf(tree: &UITree, counter: &TokenCounter) -> Result<RenderedRepresentation, RenderError> {
    render_baseline(tree, RenderKind::Leaf, counter)
}

pub fn baseline_flattened(tree: &UITree, counter: &TokenCounter) -> Result<RenderedRepresentation, RenderError> {
    render_baseline(tree, RenderKind::Flattened, counter)
}

// ---------------------------------------------------------------------------
// Baselines

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafCategory {
    Button,
    Input,
    Checkbox,
    Text,
    Image,
}

impl LeafCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            LeafCategory::Button => "button",
            LeafCategory::Input => "input",
            LeafCategory::Checkbox => "checkbox",
            LeafCategory::Text => "text",
            LeafCategory::Image => "image",
        }
    }
}

fn is_image_tag(tag: &str) -> bool {
    let short = tag.rsplit('.').next().unwrap_or(tag).to_ascii_lowercase();
    short.contains("image") || short == "img"
}

/// Editable and checkable win over clickable: input fields and switches are
/// usually clickable too, and would otherwise all render as buttons.
pub fn leaf_category(n: &UINode) -> LeafCategory {
    if n.flags.contains(Flag::Editable) {
        LeafCategory::Input
    } else if n.flags.contains(Flag::Checkable) {
        LeafCategory::Checkbox
    } else if n.flags.contains(Flag::Clickable) || n.flags.contains(Flag::LongClickable) {
        LeafCategory::Button
    } else if is_image_tag(&n.tag) {
        LeafCategory::Image
    } else {
        LeafCategory::Text
    }
}

fn ops_lines(tree: &UITree) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut last_key: Option<String> = None;
    for n in tree.iter() {
        if !(n.is_interactive() && n.flags.contains(Flag::Visible)) {
            continue;
        }
        let mut key = leaf_category(n).as_str().to_string();
        if !n.text.is_empty() {
            key.push_str(" text=");
            push_quoted(&mut key, &n.text);
        }
        if last_key.as_deref() == Some(key.as_str()) {
            continue;
        }
        lines.push(format!("id={} {key}", n.node_id));
        last_key = Some(key);
    }
    lines
}

fn leaf_lines(tree: &UITree) -> Vec<String> {
    tree.leaves()
        .map(|n| {
            let c = leaf_category(n).as_str();
            format!("<{c} id={}>{}</{c}>", n.node_id, n.text)
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Clickable,
    Input,
    Scrollable,
    Static,
}

fn section_of(n: &UINode) -> Option<Section> {
    let f = n.flags;
    if f.contains(Flag::Clickable) || f.contains(Flag::LongClickable) || f.contains(Flag::Checkable) {
        Some(Section::Clickable)
    } else if f.contains(Flag::Editable) {
        Some(Section::Input)
    } else if f.contains(Flag::Scrollable) {
        Some(Section::Scrollable)
    } else if !n.text.is_empty() {
        Some(Section::Static)
    } else {
        None
    }
}

fn flattened_lines(tree: &UITree) -> Vec<String> {
    let sections = [
        (Section::Clickable, "clickable items"),
        (Section::Input, "text inputs"),
        (Section::Scrollable, "scrollable views"),
        (Section::Static, "static text"),
    ];
    let mut buckets: Vec<Vec<String>> = vec![Vec::new(); sections.len()];
    for n in tree.iter() {
        let Some(s) = section_of(n) else { continue };
        let i = sections.iter().position(|(k, _)| *k == s).expect("known section");
        let mut line = format!("- id={} {}", n.node_id, n.tag.rsplit('.').next().unwrap_or(&n.tag));
        if !n.text.is_empty() {
            line.push_str(" text=");
            push_quoted(&mut line, &n.text);
        }
        buckets[i].push(line);
    }
    let total: usize = buckets.iter().map(Vec::len).sum();
    let mut lines = vec![format!(
        "elements={total} clickable={} input={} scrollable={} static={}",
        buckets[0].len(),
        buckets[1].len(),
        buckets[2].len(),
        buckets[3].len()
    )];
    for (i, (kind, title)) in sections.iter().enumerate() {
        if buckets[i].is_empty() && *kind != Section::Static {
            continue;
        }
        lines.push(format!("[{title}]"));
        lines.append(&mut buckets[i]);
    }
    lines
}

// ---------------------------------------------------------------------------
// Prompt assembly

pub const COMPONENT_NAMES: [&str; 6] = ["system", "action_space", "task", "ui", "context", "format"];

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PromptBundle {
    #[serde(default)]
    pub system: String,
    #[serde(default)]
    pub action_space: String,
    #[serde(default)]
    pub task: String,
    #[serde(default)]
    pub ui: String,
    #[serde(default)]
    pub context: String,
    #[serde(default)]
    pub format: String,
}

impl PromptBundle {
    pub fn components(&self) -> [&str; 6] {
        [&self.system, &self.action_space, &self.task, &self.ui, &self.context, &self.format]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPrompt {
    pub text: String,
    pub counts: [usize; 6],
    pub total: usize,
}

/// Joins the non-empty components in fixed order, separated by one blank line.
pub fn assemble_prompt(bundle: &PromptBundle, counter: &TokenCounter) -> Result<AssembledPrompt, EvalError> {
    let mut counts = [0usize; 6];
    for (c, text) in counts.iter_mut().zip(bundle.components()) {
        *c = counter.count(text)?;
    }
    let text = bundle
        .components()
        .into_iter()
        .filter(|c| !c.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n");
    Ok(AssembledPrompt {
        text,
        counts,
        total: counts.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::TransformProgram;
    use crate::interpreter::apply;
    use crate::ui_tree::{parse_canonical, TreeSource};

    const TREE: &str = "uitree v1 canonical\n\
        root\n  \
        row flags=[clickable]\n    \
        label text=\"Wi-Fi\"\n    \
        android.widget.ImageView\n  \
        field text=\"0.00\" flags=[editable]\n  \
        list flags=[scrollable]\n    \
        item text=\"OK\" flags=[clickable,visible]\n    \
        item text=\"OK\" flags=[clickable,visible]\n";

    fn c() -> TokenCounter {
        TokenCounter::Default
    }

    #[test]
    fn indentation_and_flat_multiset() {
        let t = parse_canonical(TREE).unwrap();
        let v = apply(&TransformProgram::identity("id"), &t).unwrap();
        let h = render(&v, RenderKind::Hierarchical, None, &c()).unwrap();
        assert!(h.lines[0].starts_with("    label"));
        let d = render(&v, RenderKind::DfsFlat, None, &c()).unwrap();
        let mut a: Vec<_> = h.lines.iter().map(|l| l.trim_start().to_string()).collect();
        let mut b = d.lines.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(h.token_count, d.token_count);
        assert!(matches!(render(&v, RenderKind::Random, None, &c()), Err(RenderError::MissingSeed)));
        let r1 = render(&v, RenderKind::Random, Some(42), &c()).unwrap();
        let r2 = render(&v, RenderKind::Random, Some(42), &c()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn ops_dedups_adjacent_duplicates() {
        let t = parse_canonical(TREE).unwrap();
        let ops = baseline_ops(&t, &c()).unwrap();
        assert_eq!(ops.lines, vec!["id=6 button text=\"OK\""]);
        let none = UITree::new(UINode::new("x"), TreeSource::Canonical);
        let ops = baseline_ops(&none, &c()).unwrap();
        assert!(ops.lines.is_empty());
        assert_eq!(ops.token_count, 0);
    }

    #[test]
    fn leaf_baseline_categories() {
        let t = parse_canonical(TREE).unwrap();
        let leaf = baseline_leaf(&t, &c()).unwrap();
        assert_eq!(leaf.lines.len(), t.leaf_count());
        assert_eq!(leaf.lines[0], "<text id=2>Wi-Fi</text>");
        assert_eq!(leaf.lines[1], "<image id=3></image>");
        assert_eq!(leaf.lines[2], "<input id=4>0.00</input>");
        let single = UITree::new(UINode::new("root"), TreeSource::Canonical);
        assert_eq!(baseline_leaf(&single, &c()).unwrap().lines.len(), 1);
    }

    #[test]
    fn flattened_sections() {
        let t = parse_canonical(TREE).unwrap();
        let f = baseline_flattened(&t, &c()).unwrap();
        assert_eq!(f.lines[0], "elements=6 clickable=3 input=1 scrollable=1 static=1");
        let quiet = UITree::new(UINode::new("root"), TreeSource::Canonical);
        let f = baseline_flattened(&quiet, &c()).unwrap();
        assert_eq!(f.lines, vec!["elements=0 clickable=0 input=0 scrollable=0 static=0", "[static text]"]);
    }

    #[test]
    fn prompt_assembly() {
        let empty = assemble_prompt(&PromptBundle::default(), &c()).unwrap();
        assert_eq!(empty.total, 0);
        assert_eq!(empty.text, "");
        let b = PromptBundle {
            system: "You are an agent.".into(),
            task: "Open Wi-Fi".into(),
            ..PromptBundle::default()
        };
        let p = assemble_prompt(&b, &c()).unwrap();
        assert_eq!(p.text, "You are an agent.\n\nOpen Wi-Fi");
        assert_eq!(p.total, p.counts.iter().sum::<usize>());
        assert_eq!(p.total, c().count(&p.text).unwrap());
    }
}
