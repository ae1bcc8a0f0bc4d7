//! Serving pipeline: parse → apply library → render, plus overhead
//! measurement and the QoS replay simulator.

pub mod corpus;
pub mod replay;
pub mod service;

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{parse_library, validate_program, TransformProgram};
use crate::evaluation::{efficiency_from_counts, TokenCounter};
use crate::interpreter::{apply, apply_library, InterpretError};
use crate::representations::{render, RenderKind, RenderedRepresentation};
use crate::ui_tree::{parse_any, TreeError, UITree};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("cannot load library {path}: {detail}")]
    LibraryLoadFailure { path: String, detail: String },
    #[error(transparent)]
    MalformedDocument(#[from] TreeError),
    #[error(transparent)]
    Transform(#[from] InterpretError),
    #[error("render: {0}")]
    Render(String),
    #[error("overhead measurement needs at least {min} trees, got {got}")]
    TooFewTrees { min: usize, got: usize },
    #[error("workload line {line}: {detail}")]
    Workload { line: usize, detail: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A verified program library and its content id (sha256 of the file text).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLibrary {
    pub id: String,
    pub programs: Vec<TransformProgram>,
    pub path: Option<PathBuf>,
}

impl LoadedLibrary {
    pub fn from_text(text: &str, path: Option<PathBuf>) -> Result<Self, RuntimeError> {
        let fail = |detail: String| RuntimeError::LibraryLoadFailure {
            path: path.as_ref().map_or_else(|| "<inline>".into(), |p| p.display().to_string()),
            detail,
        };
        let programs = parse_library(text).map_err(|e| fail(e.to_string()))?;
        for p in &programs {
            let report = validate_program(p);
            if let Some(v) = report.violations.first() {
                return Err(fail(format!("program {}: {v}", p.program_id)));
            }
        }
        Ok(LoadedLibrary { id: library_id(text), programs, path })
    }

    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        let text = std::fs::read_to_string(path).map_err(|e| RuntimeError::LibraryLoadFailure {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Self::from_text(&text, Some(path.to_path_buf()))
    }
}

pub fn library_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutcome {
    pub representation: RenderedRepresentation,
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub reduction: f64,
    /// Wall-clock time of the library application alone.
    pub latency_us: u64,
}

/// Renders `tree` through `lib`; the "before" count is the same renderer over
/// the untransformed leaves.
pub fn transform_tree(
    tree: &UITree,
    lib: &[TransformProgram],
    kind: RenderKind,
    seed: Option<u64>,
    counter: &TokenCounter,
) -> Result<TransformOutcome, RuntimeError> {
    let render_err = |e: crate::representations::RenderError| RuntimeError::Render(e.to_string());
    let start = Instant::now();
    let views = apply_library(lib, tree)?;
    let latency_us = start.elapsed().as_micros() as u64;
    let representation = render(&views, kind, seed, counter).map_err(render_err)?;
    let baseline = apply(&TransformProgram::identity("baseline"), tree)?;
    let before = render(&baseline, kind, seed, counter).map_err(render_err)?;
    let tokens_before = before.token_count;
    let tokens_after = representation.token_count;
    Ok(TransformOutcome {
        representation,
        tokens_before,
        tokens_after,
        reduction: efficiency_from_counts(tokens_before, tokens_after),
        latency_us,
    })
}

pub fn transform_document(
    document: &str,
    lib: &[TransformProgram],
    kind: RenderKind,
    seed: Option<u64>,
    counter: &TokenCounter,
) -> Result<TransformOutcome, RuntimeError> {
    let tree = parse_any(document)?;
    transform_tree(&tree, lib, kind, seed, counter)
}

pub const MIN_OVERHEAD_TREES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadStats {
    pub trees: usize,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl OverheadStats {
    pub fn from_samples(samples_ms: &[f64]) -> Option<Self> {
        if samples_ms.is_empty() {
            return None;
        }
        let mut s = samples_ms.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = ((0.95 * s.len() as f64).ceil() as usize).clamp(1, s.len());
        Some(OverheadStats {
            trees: s.len(),
            min_ms: s[0],
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            p95_ms: s[rank - 1],
            max_ms: s[s.len() - 1],
        })
    }
}

/// Times `apply_library` on each tree (parsing and rendering excluded).
pub fn measure_overhead(trees: &[UITree], lib: &[TransformProgram]) -> Result<OverheadStats, RuntimeError> {
    if trees.len() < MIN_OVERHEAD_TREES {
        return Err(RuntimeError::TooFewTrees { min: MIN_OVERHEAD_TREES, got: trees.len() });
    }
    let mut samples = Vec::with_capacity(trees.len());
    for t in trees {
        let start = Instant::now();
        let views = apply_library(lib, t)?;
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        std::hint::black_box(views);
        samples.push(ms);
    }
    Ok(OverheadStats::from_samples(&samples).expect("non-empty"))
}

/// Parses every regular file of `dir` (sorted by name) as a tree document.
pub fn load_trees(dir: &Path) -> Result<Vec<UITree>, RuntimeError> {
    let io = |e: std::io::Error| RuntimeError::Io { path: dir.display().to_string(), source: e };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let doc = std::fs::read_to_string(p).map_err(|e| RuntimeError::Io { path: p.display().to_string(), source: e })?;
            parse_any(&doc).map_err(RuntimeError::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "uitree v1 canonical\nroot\n  row flags=[clickable]\n    a text=\"Wi-Fi\"\n    b text=\"On\"\n";

    #[test]
    fn identity_library_changes_nothing() {
        let out = transform_document(DOC, &[], RenderKind::Hierarchical, None, &TokenCounter::Default).unwrap();
        assert_eq!(out.tokens_before, out.tokens_after);
        assert_eq!(out.reduction, 0.0);
    }

    #[test]
    fn merging_library_reduces() {
        let lib = LoadedLibrary::from_text(
            "program m { leaf-filter: false; leaf-props: [text]; node-filter: false; merge-when: flag(clickable); }",
            None,
        )
        .unwrap();
        assert_eq!(lib.id.len(), 64);
        let doc = "uitree v1 canonical\nroot\n  row flags=[clickable]\n    \
                   a text=\"Wi-Fi\" flags=[enabled] bounds=[0,0][500,100]\n    \
                   b text=\"On\" flags=[enabled] bounds=[500,0][900,100]\n    \
                   icon flags=[enabled] bounds=[900,0][1000,100]\n";
        let out = transform_document(doc, &lib.programs, RenderKind::Hierarchical, None, &TokenCounter::Default).unwrap();
        assert!(out.tokens_after < out.tokens_before, "{out:?}");
        assert!(matches!(
            transform_document("<<<", &lib.programs, RenderKind::Hierarchical, None, &TokenCounter::Default),
            Err(RuntimeError::MalformedDocument(_))
        ));
        assert!(matches!(LoadedLibrary::from_text("program {", None), Err(RuntimeError::LibraryLoadFailure { .. })));
    }

    #[test]
    fn overhead_stats() {
        let s = OverheadStats::from_samples(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.min_ms, s.max_ms, s.mean_ms, s.p95_ms), (1.0, 4.0, 2.5, 4.0));
        let t = crate::ui_tree::parse_any(DOC).unwrap();
        assert!(matches!(measure_overhead(std::slice::from_ref(&t), &[]), Err(RuntimeError::TooFewTrees { .. })));
        let trees = vec![t; 100];
        let s = measure_overhead(&trees, &[]).unwrap();
        assert_eq!(s.trees, 100);
        assert!(s.min_ms <= s.mean_ms && s.mean_ms <= s.max_ms);
    }
}
