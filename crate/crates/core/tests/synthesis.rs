use std::collections::BTreeSet;
use std::path::Path;

use uitrim::evaluation::{load_examples, Scorer, TokenCounter, TrainingExample};
use uitrim::synthesis::{
    leaf_filter_atoms, synthesize_with, Candidate, EnumerativeGenerator, FeedbackLabel, Generator, GeneratorRequest,
    SynthesisConfig, SynthesisError,
};

fn examples() -> Vec<TrainingExample> {
    load_examples(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/examples")).unwrap()
}

fn config() -> SynthesisConfig {
    SynthesisConfig::parse(&std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthesis.conf")).unwrap())
        .unwrap()
}

/// Passes requests through and keeps what went in and out.
struct Recorder<G> {
    inner: G,
    log: Vec<(GeneratorRequest, Vec<Candidate>)>,
}

impl<G: Generator> Generator for Recorder<G> {
    fn generate(&mut self, req: &GeneratorRequest) -> Result<Vec<Candidate>, SynthesisError> {
        let out = self.inner.generate(req)?;
        self.log.push((req.clone(), out.clone()));
        Ok(out)
    }
}

#[test]
fn ledger_library_and_pruning_invariants() {
    let ex = examples();
    let mut cfg = config();
    // Run past convergence so the pruning check sees many iterations.
    cfg.convergence_patience = 8;
    cfg.max_iter = 12;
    let counter = TokenCounter::Default;
    let mut rec = Recorder { inner: EnumerativeGenerator::new(&ex, cfg.enumeration_budget), log: Vec::new() };
    let out = synthesize_with(&ex, &cfg, &counter, &mut rec).unwrap();

    // Every generated candidate lands exactly once in ledger or library.
    assert_eq!(rec.log.len(), out.ledger.iterations.len());
    for ((req, cands), summary) in rec.log.iter().zip(&out.ledger.iterations) {
        assert_eq!(req.iteration, summary.iteration);
        let records: Vec<_> = out.ledger.records.iter().filter(|r| r.iteration == req.iteration).collect();
        let admitted = out.library.entries.iter().filter(|e| e.iteration == req.iteration).count();
        assert_eq!(admitted, summary.accepted.len());
        assert_eq!(records.len() + admitted, cands.len());
        let mut texts: Vec<&str> = records.iter().map(|r| r.program.as_str()).collect();
        let lib_texts: Vec<String> = out.library.entries.iter().filter(|e| e.iteration == req.iteration).map(|e| e.program.one_line()).collect();
        texts.extend(lib_texts.iter().map(String::as_str));
        let mut want: Vec<&str> = cands.iter().map(|c| c.text.as_str()).collect();
        texts.sort_unstable();
        want.sort_unstable();
        assert_eq!(texts, want);
        assert_eq!(summary.candidates, cands.len());
        let max = records.iter().map(|r| r.reward_total).filter(|r| !r.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        for r in &records {
            let penalized = r.reward_total.is_nan() || !r.violations.is_empty();
            assert_eq!(r.label == FeedbackLabel::Negative, penalized, "{}", r.program);
            if r.label == FeedbackLabel::Positive {
                assert_eq!(r.reward_total, max);
            }
        }
    }

    // Pruning: once an atom is to be avoided, no later leaf filter uses it.
    let mut ever = BTreeSet::new();
    for (req, cands) in &rec.log {
        let avoid: BTreeSet<&str> = req.avoid_leaf_filter_atoms.iter().map(String::as_str).collect();
        ever.extend(avoid.iter().map(|s| s.to_string()));
        for c in cands {
            let p = c.parsed.as_ref().unwrap();
            for atom in leaf_filter_atoms(&p.leaf_filter) {
                assert!(!avoid.contains(atom.to_string().as_str()), "{} uses avoided {atom}", c.text);
            }
        }
    }
    assert!(!ever.is_empty(), "the run never pruned anything; the check above is vacuous");

    // Accepted programs re-score to the stored reports and pass the rule.
    let scorer = Scorer::new(&ex, &counter, cfg.renderer).unwrap();
    let mut bodies = BTreeSet::new();
    assert!(!out.library.is_empty());
    for e in &out.library.entries {
        let again = scorer.score_program(&e.program).unwrap();
        assert_eq!(again, e.report);
        assert!(again.is_violation_free());
        assert!(again.mean_reward() >= cfg.threshold);
        assert!(bodies.insert(e.program.body()), "duplicate {}", e.program.body());
    }
    assert!(out.library.len() <= cfg.library_cap);
}

#[test]
fn runs_are_reproducible() {
    let ex = examples();
    let cfg = config();
    let a = uitrim::synthesis::synthesize(&ex, &cfg).unwrap();
    let b = uitrim::synthesis::synthesize(&ex, &cfg).unwrap();
    assert_eq!(a.library.to_text(), b.library.to_text());
    assert_eq!(a.ledger.to_jsonl(), b.ledger.to_jsonl());
    assert_eq!(a.stop, b.stop);
}
