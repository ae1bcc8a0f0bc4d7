use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::EvalError;
use crate::ui_tree::{normalize_text, parse_any, UITree};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetView {
    pub text: String,
    pub interactive: bool,
    /// Targets in different groups must never share a view.
    pub group: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub example_id: String,
    pub orig: UITree,
    pub targets: Vec<TargetView>,
}

fn target_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"^group=(\d+)\s+interactive=(true|false)\s+text="((?:[^"\\]|\\.)*)"\s*$"#).expect("static regex")
    })
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// A tree document, a line reading `targets`, then one target per line.
pub fn parse_example(example_id: &str, document: &str) -> Result<TrainingExample, EvalError> {
    let err = |detail: String| EvalError::ExampleFormat { path: example_id.to_string(), detail };
    let mut tree_part = String::new();
    let mut targets = Vec::new();
    let mut in_targets = false;
    for (i, line) in document.lines().enumerate() {
        if !in_targets {
            if line.trim() == "targets" {
                in_targets = true;
            } else {
                tree_part.push_str(line);
                tree_part.push('\n');
            }
            continue;
        }
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let caps = target_re()
            .captures(line)
            .ok_or_else(|| err(format!("line {}: expected `group=<n> interactive=<bool> text=\"...\"`", i + 1)))?;
        let text = normalize_text(&unescape(&caps[3]));
        if text.is_empty() {
            return Err(err(format!("line {}: empty target text", i + 1)));
        }
        targets.push(TargetView {
            group: caps[1].parse().map_err(|_| err(format!("line {}: group out of range", i + 1)))?,
            interactive: &caps[2] == "true",
            text,
        });
    }
    if !in_targets {
        return Err(err("missing `targets` section".into()));
    }
    let orig = parse_any(&tree_part).map_err(|e| err(e.to_string()))?;
    Ok(TrainingExample { example_id: example_id.to_string(), orig, targets })
}

/// Loads every `*.example` file of a directory, ordered by file name.
pub fn load_examples(dir: &Path) -> Result<Vec<TrainingExample>, EvalError> {
    let io = |e: std::io::Error| EvalError::ExampleFormat { path: dir.display().to_string(), detail: e.to_string() };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "example"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let doc = std::fs::read_to_string(&p).map_err(io)?;
        let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push(parse_example(&id, &doc)?);
    }
    if out.is_empty() {
        return Err(EvalError::NoExamples);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_document() {
        let doc = "uitree v1 canonical\nroot\n  a text=\"Hi\"\ntargets\ngroup=0 interactive=false text=\"Hi\"\n\
                   group=1 interactive=true text=\"say \\\"x\\\"\"\n";
        let ex = parse_example("e1", doc).unwrap();
        assert_eq!(ex.orig.node_count, 2);
        assert_eq!(ex.targets.len(), 2);
        assert_eq!(ex.targets[1].text, "say \"x\"");
        assert!(ex.targets[1].interactive);
        assert!(parse_example("e", "uitree v1 canonical\nroot\n").is_err());
        assert!(parse_example("e", "uitree v1 canonical\nroot\ntargets\ngroup=x\n").is_err());
    }
}
