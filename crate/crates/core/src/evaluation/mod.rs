//! Token counting and program scoring.
//!
//! A program's reward on one example is its completeness (0, or −10 when any
//! target is lost or wrongly merged) plus its efficiency (relative token
//! reduction against the unoptimized all-leaves rendering).

mod examples;

use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::dsl::TransformProgram;
use crate::interpreter::{apply, apply_library, InterpretError, ViewList};
use crate::representations::{view_lines, RenderKind};
use crate::ui_tree::UITree;

pub use examples::{load_examples, parse_example, TargetView, TrainingExample};

pub const COMPLETENESS_PENALTY: f64 = -10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("external token counter failed: {0}")]
    ExternalCounterFailure(String),
    #[error("example {example_id}: {source}")]
    Interpret {
        example_id: String,
        #[source]
        source: InterpretError,
    },
    #[error("example {example_id}: {detail}")]
    Render { example_id: String, detail: String },
    #[error("example file {path}: {detail}")]
    ExampleFormat { path: String, detail: String },
    #[error("no training examples")]
    NoExamples,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TokenCounter {
    /// Letter runs, digit runs, and every other non-space character.
    #[default]
    Default,
    /// Shell command that reads text on stdin and prints one integer.
    External { command: String },
}

impl TokenCounter {
    /// `default` or `external:<command>`.
    pub fn parse(spec: &str) -> Result<Self, EvalError> {
        match spec.split_once(':') {
            None if spec == "default" => Ok(TokenCounter::Default),
            Some(("external", cmd)) if !cmd.trim().is_empty() => Ok(TokenCounter::External { command: cmd.to_string() }),
            _ => Err(EvalError::ExternalCounterFailure(format!("unknown counter `{spec}`"))),
        }
    }

    pub fn count(&self, text: &str) -> Result<usize, EvalError> {
        match self {
            TokenCounter::Default => Ok(count_default(text)),
            TokenCounter::External { command } => count_external(command, text),
        }
    }
}

#[derive(PartialEq, Clone, Copy)]
enum Run {
    None,
    Letters,
    Digits,
}

pub fn count_default(text: &str) -> usize {
    let mut n = 0;
    let mut run = Run::None;
    for c in text.chars() {
        let kind = if c.is_alphabetic() {
            Run::Letters
        } else if c.is_numeric() {
            Run::Digits
        } else {
            if !c.is_whitespace() {
                n += 1;
            }
            run = Run::None;
            continue;
        };
        if kind != run {
            n += 1;
            run = kind;
        }
    }
    n
}

fn count_external(command: &str, text: &str) -> Result<usize, EvalError> {
    let fail = |d: String| EvalError::ExternalCounterFailure(d);
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(format!("spawn `{command}`: {e}")))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        // A counter may exit without draining stdin; its output still counts.
        let _ = stdin.write_all(text.as_bytes());
    }
    let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
    if !out.status.success() {
        return Err(fail(format!(
            "`{command}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let s = String::from_utf8_lossy(&out.stdout);
    s.trim()
        .parse()
        .map_err(|_| fail(format!("`{command}` printed {:?}, expected an integer", s.trim())))
}

// ---------------------------------------------------------------------------
// Rewards

/// Relative reduction, clamped to [0, 1]; 0 when the baseline is empty.
pub fn efficiency_from_counts(tok_orig: usize, tok_views: usize) -> f64 {
    if tok_orig == 0 {
        return 0.0;
    }
    ((tok_orig as f64 - tok_views as f64) / tok_orig as f64).clamp(0.0, 1.0)
}

fn render_count(views: &ViewList, renderer: RenderKind, counter: &TokenCounter) -> Result<usize, String> {
    // Random ordering does not change the token count; any fixed seed works.
    let lines = view_lines(views, renderer, Some(0)).map_err(|e| e.to_string())?;
    counter.count(&lines.join("\n")).map_err(|e| e.to_string())
}

/// Tokens of the unoptimized rendering: every leaf of `orig` as its own view.
pub fn baseline_tokens(orig: &UITree, counter: &TokenCounter, renderer: RenderKind) -> Result<usize, String> {
    let identity = apply(&TransformProgram::identity("baseline"), orig).map_err(|e| e.to_string())?;
    render_count(&identity, renderer, counter)
}

pub fn efficiency_reward(
    orig: &UITree,
    views: &ViewList,
    counter: &TokenCounter,
    renderer: RenderKind,
) -> Result<f64, String> {
    let before = baseline_tokens(orig, counter, renderer)?;
    let after = render_count(views, renderer, counter)?;
    Ok(efficiency_from_counts(before, after))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompletenessViolation {
    LostInformation { target: usize, text: String },
    LostInteractivity { target: usize, text: String },
    OverMerge { view_id: usize, texts: (String, String), groups: (u32, u32) },
}

impl CompletenessViolation {
    pub fn kind(&self) -> &'static str {
        match self {
            CompletenessViolation::LostInformation { .. } => "lost_information",
            CompletenessViolation::LostInteractivity { .. } => "lost_interactivity",
            CompletenessViolation::OverMerge { .. } => "over_merge",
        }
    }
}

impl std::fmt::Display for CompletenessViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CompletenessViolation::LostInformation { text, .. } => write!(f, "lost_information({text:?})"),
            CompletenessViolation::LostInteractivity { text, .. } => write!(f, "lost_interactivity({text:?})"),
            CompletenessViolation::OverMerge { view_id, texts, .. } => {
                write!(f, "over_merge(view {view_id}: {:?} + {:?})", texts.0, texts.1)
            }
        }
    }
}

/// Whether `hay` holds an occurrence of `a` and one of `b` that do not overlap.
fn disjoint_occurrences(hay: &str, a: &str, b: &str) -> bool {
    let spans = |needle: &str| -> Vec<(usize, usize)> {
        hay.match_indices(needle).map(|(i, m)| (i, i + m.len())).collect()
    };
    let (sa, sb) = (spans(a), spans(b));
    sa.iter().any(|&(a0, a1)| sb.iter().any(|&(b0, b1)| a1 <= b0 || b1 <= a0))
}

pub fn completeness_reward(views: &ViewList, targets: &[TargetView]) -> (f64, Vec<CompletenessViolation>) {
    let mut violations = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        let matching: Vec<_> = views.views.iter().filter(|v| v.text.contains(&t.text)).collect();
        if matching.is_empty() {
            violations.push(CompletenessViolation::LostInformation { target: ti, text: t.text.clone() });
        } else if t.interactive && !matching.iter().any(|v| v.interactive) {
            violations.push(CompletenessViolation::LostInteractivity { target: ti, text: t.text.clone() });
        }
    }
    // One record per offending view: the first pair of different-group
    // targets it contains.
    'views: for v in &views.views {
        for (i, a) in targets.iter().enumerate() {
            if !v.text.contains(&a.text) {
                continue;
            }
            for b in &targets[i + 1..] {
                if a.group != b.group && v.text.contains(&b.text) && disjoint_occurrences(&v.text, &a.text, &b.text) {
                    violations.push(CompletenessViolation::OverMerge {
                        view_id: v.view_id,
                        texts: (a.text.clone(), b.text.clone()),
                        groups: (a.group, b.group),
                    });
                    continue 'views;
                }
            }
        }
    }
    let score = if violations.is_empty() { 0.0 } else { COMPLETENESS_PENALTY };
    (score, violations)
}

// ---------------------------------------------------------------------------
// Scoring

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReward {
    pub example_id: String,
    pub completeness: f64,
    pub efficiency: f64,
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub violations: Vec<CompletenessViolation>,
}

impl ExampleReward {
    pub fn reward(&self) -> f64 {
        self.completeness + self.efficiency
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardReport {
    pub per_example: Vec<ExampleReward>,
    pub total: f64,
}

impl RewardReport {
    pub fn mean_reward(&self) -> f64 {
        if self.per_example.is_empty() {
            0.0
        } else {
            self.total / self.per_example.len() as f64
        }
    }

    pub fn mean_efficiency(&self) -> f64 {
        if self.per_example.is_empty() {
            return 0.0;
        }
        self.per_example.iter().map(|e| e.efficiency).sum::<f64>() / self.per_example.len() as f64
    }

    pub fn is_violation_free(&self) -> bool {
        self.per_example.iter().all(|e| e.violations.is_empty())
    }

    /// Machine-readable form: one tab-separated line per example, then the total.
    pub fn to_lines(&self) -> String {
        let mut out = String::from("example\tcompleteness\tefficiency\ttokens_before\ttokens_after\tviolations\n");
        for e in &self.per_example {
            let v: Vec<String> = e.violations.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\t{}\n",
                e.example_id,
                e.completeness,
                e.efficiency,
                e.tokens_before,
                e.tokens_after,
                v.join(";")
            ));
        }
        out.push_str(&format!("total\t{:.6}\n", self.total));
        out
    }
}

/// Scoring context shared across candidates: the renderer, the counter and
/// each example's baseline token count (computed once).
pub struct Scorer<'a> {
    examples: &'a [TrainingExample],
    counter: &'a TokenCounter,
    renderer: RenderKind,
    baselines: Vec<usize>,
}

impl<'a> Scorer<'a> {
    pub fn new(examples: &'a [TrainingExample], counter: &'a TokenCounter, renderer: RenderKind) -> Result<Self, EvalError> {
        if examples.is_empty() {
            return Err(EvalError::NoExamples);
        }
        let baselines = examples
            .iter()
            .map(|ex| {
                baseline_tokens(&ex.orig, counter, renderer).map_err(|detail| EvalError::Render {
                    example_id: ex.example_id.clone(),
                    detail,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Scorer { examples, counter, renderer, baselines })
    }

    pub fn examples(&self) -> &[TrainingExample] {
        self.examples
    }

    fn score_with(
        &self,
        mut transform: impl FnMut(&UITree) -> Result<ViewList, InterpretError>,
    ) -> Result<RewardReport, EvalError> {
        let mut per_example = Vec::with_capacity(self.examples.len());
        for (ex, &before) in self.examples.iter().zip(&self.baselines) {
            let views = transform(&ex.orig).map_err(|source| EvalError::Interpret {
                example_id: ex.example_id.clone(),
                source,
            })?;
            let after = render_count(&views, self.renderer, self.counter).map_err(|detail| EvalError::Render {
                example_id: ex.example_id.clone(),
                detail,
            })?;
            let (completeness, violations) = completeness_reward(&views, &ex.targets);
            per_example.push(ExampleReward {
                example_id: ex.example_id.clone(),
                completeness,
                efficiency: efficiency_from_counts(before, after),
                tokens_before: before,
                tokens_after: after,
                violations,
            });
        }
        let total = per_example.iter().map(ExampleReward::reward).sum();
        Ok(RewardReport { per_example, total })
    }

    pub fn score_program(&self, p: &TransformProgram) -> Result<RewardReport, EvalError> {
        self.score_with(|t| apply(p, t))
    }

    pub fn score_library(&self, lib: &[TransformProgram]) -> Result<RewardReport, EvalError> {
        self.score_with(|t| apply_library(lib, t))
    }
}

pub fn score_program(
    p: &TransformProgram,
    examples: &[TrainingExample],
    counter: &TokenCounter,
    renderer: RenderKind,
) -> Result<RewardReport, EvalError> {
    Scorer::new(examples, counter, renderer)?.score_program(p)
}
