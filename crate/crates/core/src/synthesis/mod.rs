//! Feedback-driven program synthesis.
//!
//! Each iteration asks a generator for candidates, scores them on the
//! training examples, accepts the ones that are violation-free, clear the
//! reward threshold and improve the library, and turns the rest into
//! positive/negative feedback for the next round.

mod config;
mod generator;

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{validate_program, NodePredicate, TextRule, TransformProgram};
use crate::evaluation::{CompletenessViolation, EvalError, RewardReport, Scorer, TokenCounter, TrainingExample};

pub use config::{GeneratorKind, SynthesisConfig};
pub use generator::{
    candidates_from_reply, summarize_examples, Candidate, EnumerativeGenerator, Exemplar, ExampleSummary,
    ExternalGenerator, Generator, GeneratorRequest, GRAMMAR,
};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("external generator unavailable: {0}")]
    ExternalGeneratorUnavailable(String),
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("iteration {iteration} is out of range (ledger covers {available} iterations)")]
    IterationOutOfRange { iteration: usize, available: usize },
    #[error(transparent)]
    Scoring(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackLabel {
    Positive,
    Negative,
    /// Violation-free but neither accepted nor among the iteration's best.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerViolation {
    pub example_id: Option<String>,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackRecord {
    pub iteration: usize,
    pub label: FeedbackLabel,
    pub program_id: Option<String>,
    pub program: String,
    pub reward_total: f64,
    pub mean_efficiency: f64,
    pub violations: Vec<LedgerViolation>,
    #[serde(skip)]
    pub parsed: Option<TransformProgram>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub candidates: usize,
    pub accepted: Vec<String>,
    /// Highest mean efficiency among this iteration's violation-free candidates.
    pub best_violation_free_efficiency: Option<f64>,
    pub library_size: usize,
    pub library_mean_efficiency: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeedbackLedger {
    pub records: Vec<FeedbackRecord>,
    pub iterations: Vec<IterationSummary>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LedgerLine<'a> {
    Candidate(&'a FeedbackRecord),
    Iteration(&'a IterationSummary),
}

impl FeedbackLedger {
    /// JSON lines: every record of an iteration, then its summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut records = self.records.iter().peekable();
        for s in &self.iterations {
            while let Some(r) = records.next_if(|r| r.iteration == s.iteration) {
                out.push_str(&serde_json::to_string(&LedgerLine::Candidate(r)).expect("serializable"));
                out.push('\n');
            }
            out.push_str(&serde_json::to_string(&LedgerLine::Iteration(s)).expect("serializable"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub program: TransformProgram,
    pub report: RewardReport,
    pub iteration: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProgramLibrary {
    pub entries: Vec<LibraryEntry>,
}

impl ProgramLibrary {
    pub fn programs(&self) -> Vec<TransformProgram> {
        self.entries.iter().map(|e| e.program.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Library file text; parses back with `parse_library`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "// iteration {} mean_efficiency {:.6}\n{}\n\n",
                e.iteration,
                e.report.mean_efficiency(),
                e.program
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIter,
    Converged,
    LibraryCap,
    GeneratorExhausted,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub library: ProgramLibrary,
    pub ledger: FeedbackLedger,
    pub stop: StopReason,
    /// Score of the whole library applied in order.
    pub library_report: Option<RewardReport>,
}

/// Node atoms of a predicate, left to right.
pub fn leaf_filter_atoms(p: &NodePredicate) -> Vec<&NodePredicate> {
    fn walk<'a>(p: &'a NodePredicate, out: &mut Vec<&'a NodePredicate>) {
        match p {
            NodePredicate::Not(i) => walk(i, out),
            NodePredicate::And(l, r) | NodePredicate::Or(l, r) => {
                walk(l, out);
                walk(r, out);
            }
            NodePredicate::True | NodePredicate::False => {}
            atom => out.push(atom),
        }
    }
    let mut out = Vec::new();
    walk(p, &mut out);
    out
}

fn ledger_violations(report: &RewardReport) -> Vec<LedgerViolation> {
    report
        .per_example
        .iter()
        .flat_map(|e| {
            e.violations.iter().map(|v| LedgerViolation {
                example_id: Some(e.example_id.clone()),
                kind: v.kind().to_string(),
                detail: v.to_string(),
            })
        })
        .collect()
}

/// Labels one scored program. Positive labels are assigned per iteration by
/// the caller (they depend on the other candidates), so this returns
/// negative or neutral; pass `iteration_best` to get the full rule.
pub fn generate_feedback(
    p: &TransformProgram,
    report: &RewardReport,
    iteration: usize,
    iteration_best: Option<f64>,
) -> FeedbackRecord {
    let violations = ledger_violations(report);
    let label = if !violations.is_empty() {
        FeedbackLabel::Negative
    } else if iteration_best.is_some_and(|b| report.total >= b) {
        FeedbackLabel::Positive
    } else {
        FeedbackLabel::Neutral
    };
    FeedbackRecord {
        iteration,
        label,
        program_id: Some(p.program_id.clone()),
        program: p.one_line(),
        reward_total: report.total,
        mean_efficiency: report.mean_efficiency(),
        violations,
        parsed: Some(p.clone()),
    }
}

/// Best violation-free mean efficiency seen up to and including `iteration`.
pub fn best_so_far(ledger: &FeedbackLedger, iteration: usize) -> Result<f64, SynthesisError> {
    if iteration >= ledger.iterations.len() {
        return Err(SynthesisError::IterationOutOfRange { iteration, available: ledger.iterations.len() });
    }
    Ok(ledger.iterations[..=iteration]
        .iter()
        .filter_map(|s| s.best_violation_free_efficiency)
        .fold(0.0, f64::max))
}

const FEEDBACK_WINDOW: usize = 8;

fn exemplars(ledger: &FeedbackLedger, label: FeedbackLabel) -> Vec<Exemplar> {
    let mut v: Vec<Exemplar> = ledger
        .records
        .iter()
        .rev()
        .filter(|r| r.label == label)
        .take(FEEDBACK_WINDOW)
        .map(|r| Exemplar {
            program: r.program.clone(),
            reward: r.reward_total,
            violations: r.violations.iter().map(|v| v.detail.clone()).collect(),
        })
        .collect();
    v.reverse();
    v
}

pub fn synthesize(examples: &[TrainingExample], config: &SynthesisConfig) -> Result<SynthesisOutcome, SynthesisError> {
    match &config.generator {
        GeneratorKind::Enumerative => {
            let mut g = EnumerativeGenerator::new(examples, config.enumeration_budget);
            synthesize_with(examples, config, &TokenCounter::Default, &mut g)
        }
        GeneratorKind::External(endpoint) => {
            let mut g = ExternalGenerator::new(endpoint.clone());
            synthesize_with(examples, config, &TokenCounter::Default, &mut g)
        }
    }
}

enum Scored {
    Unparseable(String),
    Invalid(TransformProgram, Vec<String>),
    Report(TransformProgram, RewardReport),
}

pub fn synthesize_with(
    examples: &[TrainingExample],
    config: &SynthesisConfig,
    counter: &TokenCounter,
    generator: &mut dyn Generator,
) -> Result<SynthesisOutcome, SynthesisError> {
    config.validate()?;
    let scorer = Scorer::new(examples, counter, config.renderer)?;
    let mut library = ProgramLibrary::default();
    let mut library_report: Option<RewardReport> = None;
    let mut ledger = FeedbackLedger::default();
    let mut blacklist: BTreeSet<String> = BTreeSet::new();
    let mut printed_library: HashSet<String> = HashSet::new();

    // Targets that even the identity program loses cannot be blamed on a
    // leaf filter.
    let identity_report = scorer.score_program(&TransformProgram::identity("identity"))?;
    let identity_lost: HashSet<(String, String)> = identity_report
        .per_example
        .iter()
        .flat_map(|e| {
            e.violations.iter().filter_map(|v| match v {
                CompletenessViolation::LostInformation { text, .. } => Some((e.example_id.clone(), text.clone())),
                _ => None,
            })
        })
        .collect();

    let summaries = summarize_examples(examples);
    let mut stale = 0usize;
    let mut stop = StopReason::MaxIter;

    for iteration in 0..config.max_iter {
        if library.len() >= config.library_cap {
            stop = StopReason::LibraryCap;
            break;
        }
        if !library.is_empty() && stale >= config.convergence_patience {
            stop = StopReason::Converged;
            break;
        }
        let mut req = GeneratorRequest {
            iteration,
            count: config.candidates_per_iter,
            seed: config.seed,
            grammar: GRAMMAR.to_string(),
            examples: summaries.clone(),
            positive: exemplars(&ledger, FeedbackLabel::Positive),
            negative: exemplars(&ledger, FeedbackLabel::Negative),
            library: library.entries.iter().map(|e| e.program.one_line()).collect(),
            avoid_leaf_filter_atoms: blacklist.iter().cloned().collect(),
            prompt: String::new(),
        };
        req.render_prompt();
        let candidates = generator.generate(&req)?;
        if candidates.is_empty() {
            stop = StopReason::GeneratorExhausted;
            break;
        }

        let scored: Vec<Scored> = candidates
            .par_iter()
            .map(|c| -> Result<Scored, SynthesisError> {
                let p = match &c.parsed {
                    Err(e) => return Ok(Scored::Unparseable(e.to_string())),
                    Ok(p) => p,
                };
                let report = validate_program(p);
                if !report.is_valid() {
                    let v = report.violations.iter().map(|v| v.to_string()).collect();
                    return Ok(Scored::Invalid(p.clone(), v));
                }
                Ok(Scored::Report(p.clone(), scorer.score_program(p)?))
            })
            .collect::<Result<_, _>>()?;

        let mut records: Vec<FeedbackRecord> = Vec::new();
        let mut accepted = Vec::new();
        let mut best_eff: Option<f64> = None;
        for (c, s) in candidates.iter().zip(scored) {
            match s {
                Scored::Unparseable(detail) => records.push(FeedbackRecord {
                    iteration,
                    label: FeedbackLabel::Negative,
                    program_id: None,
                    program: c.text.clone(),
                    reward_total: f64::NAN,
                    mean_efficiency: 0.0,
                    violations: vec![LedgerViolation { example_id: None, kind: "syntax_error".into(), detail }],
                    parsed: None,
                }),
                Scored::Invalid(p, details) => records.push(FeedbackRecord {
                    iteration,
                    label: FeedbackLabel::Negative,
                    program_id: Some(p.program_id.clone()),
                    program: p.one_line(),
                    reward_total: f64::NAN,
                    mean_efficiency: 0.0,
                    violations: details
                        .into_iter()
                        .map(|detail| LedgerViolation { example_id: None, kind: "invalid_program".into(), detail })
                        .collect(),
                    parsed: Some(p),
                }),
                Scored::Report(p, report) => {
                    if !report.is_violation_free() {
                        update_blacklist(&p, &report, &identity_lost, &mut blacklist);
                        records.push(generate_feedback(&p, &report, iteration, None));
                        continue;
                    }
                    best_eff = Some(best_eff.map_or(report.mean_efficiency(), |b| b.max(report.mean_efficiency())));
                    let body = p.body();
                    let mut admitted = false;
                    if report.mean_reward() >= config.threshold
                        && !printed_library.contains(&body)
                        && library.len() < config.library_cap
                    {
                        let mut lib = library.programs();
                        lib.push(p.clone());
                        let combined = scorer.score_library(&lib)?;
                        let current = library_report.as_ref().map_or(0.0, RewardReport::mean_efficiency);
                        if combined.is_violation_free() && combined.mean_efficiency() > current {
                            printed_library.insert(body);
                            accepted.push(p.program_id.clone());
                            library.entries.push(LibraryEntry { program: p.clone(), report: report.clone(), iteration });
                            library_report = Some(combined);
                            admitted = true;
                        }
                    }
                    if !admitted {
                        records.push(generate_feedback(&p, &report, iteration, None));
                    }
                }
            }
        }

        // Positive exemplars: the best violation-free leftovers of this
        // iteration, ties ordered by printed form, listed first.
        let best = records
            .iter()
            .filter(|r| r.label == FeedbackLabel::Neutral)
            .map(|r| r.reward_total)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut positives = Vec::new();
        let mut rest = Vec::new();
        for mut r in records {
            if r.label == FeedbackLabel::Neutral && r.reward_total >= best {
                r.label = FeedbackLabel::Positive;
                positives.push(r);
            } else {
                rest.push(r);
            }
        }
        positives.sort_by(|a, b| a.program.cmp(&b.program));
        ledger.records.extend(positives);
        ledger.records.extend(rest);

        stale = if accepted.is_empty() { stale + 1 } else { 0 };
        ledger.iterations.push(IterationSummary {
            iteration,
            candidates: candidates.len(),
            accepted,
            best_violation_free_efficiency: best_eff,
            library_size: library.len(),
            library_mean_efficiency: library_report.as_ref().map_or(0.0, RewardReport::mean_efficiency),
        });
    }
    if stop == StopReason::MaxIter && library.len() >= config.library_cap && config.max_iter > 0 {
        stop = StopReason::LibraryCap;
    }

    Ok(SynthesisOutcome { library, ledger, stop, library_report })
}

/// A single-atom leaf filter that loses a target the identity program keeps
/// is the only possible cause of that loss when merged text is concatenated.
fn update_blacklist(
    p: &TransformProgram,
    report: &RewardReport,
    identity_lost: &HashSet<(String, String)>,
    blacklist: &mut BTreeSet<String>,
) {
    let atoms = leaf_filter_atoms(&p.leaf_filter);
    let single = atoms.len() == 1 && std::ptr::eq(atoms[0], &p.leaf_filter);
    if !single || p.merge_props.text != TextRule::Concat {
        return;
    }
    let culpable = report.per_example.iter().any(|e| {
        e.violations.iter().any(|v| match v {
            CompletenessViolation::LostInformation { text, .. } => {
                !identity_lost.contains(&(e.example_id.clone(), text.clone()))
            }
            _ => false,
        })
    });
    if culpable {
        blacklist.insert(p.leaf_filter.to_string());
    }
}
