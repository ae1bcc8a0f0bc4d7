use std::collections::{BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{leaf_filter_atoms, SynthesisError};
use crate::dsl::{
    enumerate_grammar, parse_program, ProgramStream, Provenance, ProvenanceKind, SyntaxError, TransformProgram,
    Vocabulary,
};
use crate::evaluation::TrainingExample;
use crate::interpreter::{apply, serialize_views};
use crate::ui_tree::serialize_canonical;

/// Concrete syntax shown to external generators.
pub const GRAMMAR: &str = r#"program <id> {
  leaf-filter: <pred>;          // leaf dropped when true
  leaf-props: [<key>, ...];     // attributes copied onto leaf views
  node-filter: <pred>;          // internal node spliced when true
  merge-when: <mpred>;          // child views merged into one when true
  merge-props { text: concat|first|parent; type: parent|dominant-child };
}
<pred>  := true | false | tag = "<s>" | tag in ("<s>", ...) | attr("<k>") exists
         | attr("<k>") = "<v>" | attr("<k>") matches /<re>/ | text empty | text nonempty
         | text = "<s>" | flag(<name>) | child-count <cmp> <int> | depth <cmp> <int>
         | not <pred> | <pred> and <pred> | <pred> or <pred> | (<pred>)
<mpred> := <pred atom> | node(<pred>) | all-views(<vpred>) | any-view(<vpred>)
         | view-count <cmp> <int> | true | false | and/or/not combinations
<vpred> := text empty | text nonempty | interactive | type = "<s>" | not/and/or
"#;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    pub parsed: Result<TransformProgram, SyntaxError>,
}

impl Candidate {
    pub fn from_program(p: TransformProgram) -> Self {
        Candidate { text: p.one_line(), parsed: Ok(p) }
    }

    pub fn from_text(text: &str) -> Self {
        Candidate { text: text.trim().to_string(), parsed: parse_program(text) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExampleSummary {
    pub example_id: String,
    pub tree: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Exemplar {
    pub program: String,
    pub reward: f64,
    pub violations: Vec<String>,
}

/// What a generator sees each iteration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GeneratorRequest {
    pub iteration: usize,
    pub count: usize,
    pub seed: u64,
    pub grammar: String,
    pub examples: Vec<ExampleSummary>,
    pub positive: Vec<Exemplar>,
    pub negative: Vec<Exemplar>,
    pub library: Vec<String>,
    /// Printed node atoms that must not appear in a leaf filter.
    pub avoid_leaf_filter_atoms: Vec<String>,
    pub prompt: String,
}

impl GeneratorRequest {
    /// Fills `prompt` from the structured fields.
    pub fn render_prompt(&mut self) {
        let mut p = String::new();
        p.push_str("Write UI-tree transformation programs in the following language.\n\n");
        p.push_str(&self.grammar);
        p.push_str("\nEach program must keep every target text and interactive element, never merge targets from different groups, and minimize the rendered token count.\n");
        for ex in &self.examples {
            p.push_str(&format!("\n## Example {}\n{}targets: {}\n", ex.example_id, ex.tree, ex.targets.join(" | ")));
        }
        if !self.positive.is_empty() {
            p.push_str("\n## Programs that worked well\n");
            for e in &self.positive {
                p.push_str(&format!("{}  // reward {:.3}\n", e.program, e.reward));
            }
        }
        if !self.negative.is_empty() {
            p.push_str("\n## Programs that broke completeness\n");
            for e in &self.negative {
                p.push_str(&format!("{}  // {}\n", e.program, e.violations.join("; ")));
            }
        }
        if !self.avoid_leaf_filter_atoms.is_empty() {
            p.push_str(&format!(
                "\nNever use these conditions in a leaf filter: {}\n",
                self.avoid_leaf_filter_atoms.join(", ")
            ));
        }
        p.push_str(&format!("\nReturn {} new programs.\n", self.count));
        self.prompt = p;
    }
}

pub fn summarize_examples(examples: &[TrainingExample]) -> Vec<ExampleSummary> {
    examples
        .iter()
        .map(|e| ExampleSummary {
            example_id: e.example_id.clone(),
            tree: serialize_canonical(&e.orig),
            targets: e.targets.iter().map(|t| t.text.clone()).collect(),
        })
        .collect()
}

pub trait Generator {
    /// Up to `req.count` candidates. An empty result ends the run.
    fn generate(&mut self, req: &GeneratorRequest) -> Result<Vec<Candidate>, SynthesisError>;
}

// ---------------------------------------------------------------------------
// Enumerative

/// Walks the grammar in size order, skipping candidates that use a
/// blacklisted leaf-filter atom and candidates that behave exactly like an
/// earlier one on every training example.
pub struct EnumerativeGenerator<'a> {
    stream: ProgramStream,
    examples: &'a [TrainingExample],
    seen: HashSet<u64>,
}

impl<'a> EnumerativeGenerator<'a> {
    pub fn new(examples: &'a [TrainingExample], budget: usize) -> Self {
        let vocab = Vocabulary::from_trees(examples.iter().map(|e| &e.orig));
        let mut g = EnumerativeGenerator {
            stream: enumerate_grammar(&vocab, budget),
            examples,
            seen: HashSet::new(),
        };
        // Identity behavior can never be accepted (zero efficiency).
        if let Some(sig) = g.signature(&TransformProgram::identity("identity")) {
            g.seen.insert(sig);
        }
        g
    }

    fn signature(&self, p: &TransformProgram) -> Option<u64> {
        let mut h = DefaultHasher::new();
        for ex in self.examples {
            serialize_views(&apply(p, &ex.orig).ok()?).hash(&mut h);
        }
        Some(h.finish())
    }
}

impl Generator for EnumerativeGenerator<'_> {
    fn generate(&mut self, req: &GeneratorRequest) -> Result<Vec<Candidate>, SynthesisError> {
        let avoid: BTreeSet<&str> = req.avoid_leaf_filter_atoms.iter().map(String::as_str).collect();
        let mut out = Vec::with_capacity(req.count);
        while out.len() < req.count {
            let Some(mut p) = self.stream.next() else { break };
            if leaf_filter_atoms(&p.leaf_filter).iter().any(|a| avoid.contains(a.to_string().as_str())) {
                continue;
            }
            match self.signature(&p) {
                Some(sig) if !self.seen.insert(sig) => continue,
                _ => {}
            }
            p.provenance = Provenance { kind: ProvenanceKind::Enumerated, iteration: Some(req.iteration) };
            out.push(Candidate::from_program(p));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// External

#[derive(Debug, Deserialize)]
struct GeneratorResponse {
    candidates: Vec<String>,
}

/// Splits a free-text reply into program blocks (lines starting a new
/// `program`); a reply without any block is one unparseable candidate.
pub fn candidates_from_reply(reply: &str, iteration: usize) -> Vec<Candidate> {
    let texts: Vec<String> = match serde_json::from_str::<GeneratorResponse>(reply) {
        Ok(r) => r.candidates,
        Err(_) => {
            let mut blocks: Vec<String> = Vec::new();
            for line in reply.lines() {
                if line.trim_start().starts_with("program ") || blocks.is_empty() {
                    blocks.push(String::new());
                }
                let b = blocks.last_mut().expect("pushed above");
                b.push_str(line);
                b.push('\n');
            }
            blocks.retain(|b| !b.trim().is_empty());
            if blocks.is_empty() {
                blocks.push(reply.to_string());
            }
            blocks
        }
    };
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut c = Candidate::from_text(t);
            if let Ok(p) = &mut c.parsed {
                p.program_id = format!("g{iteration}_{i}");
                p.provenance = Provenance { kind: ProvenanceKind::ExternalGenerator, iteration: Some(iteration) };
            }
            c
        })
        .collect()
}

/// Sends the request as JSON to a shell command (stdin) or HTTP endpoint
/// (POST body) and reads candidates back.
pub struct ExternalGenerator {
    endpoint: String,
    timeout: Duration,
}

impl ExternalGenerator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ExternalGenerator { endpoint: endpoint.into(), timeout: Duration::from_secs(120) }
    }

    fn exchange(&self, body: &str) -> Result<String, SynthesisError> {
        let unavailable = |d: String| SynthesisError::ExternalGeneratorUnavailable(d);
        if self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://") {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(self.timeout))
                .build()
                .new_agent();
            let mut resp = agent
                .post(&self.endpoint)
                .header("content-type", "application/json")
                .send(body)
                .map_err(|e| unavailable(format!("{}: {e}", self.endpoint)))?;
            return resp
                .body_mut()
                .read_to_string()
                .map_err(|e| unavailable(format!("{}: {e}", self.endpoint)));
        }
        let cmd = self.endpoint.strip_prefix("cmd:").unwrap_or(&self.endpoint);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| unavailable(format!("spawn `{cmd}`: {e}")))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            let _ = stdin.write_all(body.as_bytes());
        }
        let out = child.wait_with_output().map_err(|e| unavailable(e.to_string()))?;
        if !out.status.success() {
            return Err(unavailable(format!(
                "`{cmd}` exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

impl Generator for ExternalGenerator {
    fn generate(&mut self, req: &GeneratorRequest) -> Result<Vec<Candidate>, SynthesisError> {
        let body = serde_json::to_string(req).map_err(|e| SynthesisError::ExternalGeneratorUnavailable(e.to_string()))?;
        let reply = self.exchange(&body)?;
        let mut c = candidates_from_reply(&reply, req.iteration);
        c.truncate(req.count);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_splitting() {
        let reply = "Here you go:\nprogram a { leaf-filter: text empty; leaf-props: [text]; node-filter: false; merge-when: false; }\n\
                     program b { nonsense }\n";
        let c = candidates_from_reply(reply, 2);
        assert_eq!(c.len(), 3);
        assert!(c[0].parsed.is_err());
        let p = c[1].parsed.as_ref().unwrap();
        assert_eq!(p.program_id, "g2_1");
        assert_eq!(p.provenance.kind, ProvenanceKind::ExternalGenerator);
        assert!(c[2].parsed.is_err());

        let json = r#"{"candidates": ["program x { leaf-filter: false; leaf-props: []; node-filter: false; merge-when: true; }"]}"#;
        let c = candidates_from_reply(json, 0);
        assert_eq!(c.len(), 1);
        assert!(c[0].parsed.is_ok());
        assert_eq!(candidates_from_reply("", 0).len(), 1);
    }

    #[test]
    fn command_transport() {
        let mut g = ExternalGenerator::new(
            "cmd:cat >/dev/null; echo 'program q { leaf-filter: text empty; leaf-props: [text]; node-filter: false; merge-when: false; }'",
        );
        let req = GeneratorRequest {
            iteration: 0,
            count: 4,
            seed: 0,
            grammar: GRAMMAR.into(),
            examples: vec![],
            positive: vec![],
            negative: vec![],
            library: vec![],
            avoid_leaf_filter_atoms: vec![],
            prompt: String::new(),
        };
        let c = g.generate(&req).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].parsed.is_ok());
        let mut down = ExternalGenerator::new("cmd:exit 7");
        assert!(matches!(down.generate(&req), Err(SynthesisError::ExternalGeneratorUnavailable(_))));
        let mut http = ExternalGenerator::new("http://127.0.0.1:9/none");
        http.timeout = Duration::from_secs(2);
        assert!(matches!(http.generate(&req), Err(SynthesisError::ExternalGeneratorUnavailable(_))));
    }
}
