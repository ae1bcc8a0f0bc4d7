//! Discrete-event replay of a request trace against `c` simulated backend
//! workers whose service time is `a + b·tokens` milliseconds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{transform_tree, RuntimeError};
use crate::dsl::TransformProgram;
use crate::evaluation::TokenCounter;
use crate::representations::RenderKind;
use crate::ui_tree::parse_any;

/// Third workload column: a tree file (resolved against the workload's
/// directory) or a pre-computed transformed token count.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformedSource {
    Tree(PathBuf),
    Tokens(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadRecord {
    pub offset_ms: f64,
    pub tokens: u64,
    pub transformed: Option<TransformedSource>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    pub records: Vec<WorkloadRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    /// Fixed cost per request, ms.
    pub a: f64,
    /// Cost per prompt token, ms.
    pub b: f64,
}

impl LatencyModel {
    pub fn new(a: f64, b: f64) -> Option<Self> {
        (a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()).then_some(LatencyModel { a, b })
    }

    pub fn service_ms(&self, tokens: u64) -> f64 {
        self.a + self.b * tokens as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoSReport {
    pub label: String,
    pub requests: usize,
    pub mean_tokens: f64,
    pub min_latency_ms: f64,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
    /// Completed requests per minute of simulated time (first arrival to
    /// last completion).
    pub qpm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayComparison {
    pub off: QoSReport,
    pub on: QoSReport,
}

impl ReplayComparison {
    pub fn token_reduction(&self) -> f64 {
        ratio_drop(self.off.mean_tokens, self.on.mean_tokens)
    }

    pub fn latency_reduction(&self) -> f64 {
        ratio_drop(self.off.mean_latency_ms, self.on.mean_latency_ms)
    }

    pub fn throughput_gain(&self) -> f64 {
        if self.off.qpm > 0.0 {
            self.on.qpm / self.off.qpm - 1.0
        } else {
            0.0
        }
    }
}

fn ratio_drop(before: f64, after: f64) -> f64 {
    if before > 0.0 {
        (before - after) / before
    } else {
        0.0
    }
}

/// Lines of `offset_ms,tokens[,tree-or-count]`; `#` starts a comment.
pub fn parse_workload(text: &str, base_dir: Option<&Path>) -> Result<Workload, RuntimeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for row in rdr.records() {
        let row = row.map_err(|e| RuntimeError::Workload {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let err = |detail: String| RuntimeError::Workload { line, detail };
        if row.len() < 2 || row.len() > 3 {
            return Err(err(format!("expected 2 or 3 fields, got {}", row.len())));
        }
        let offset_ms: f64 = row[0].parse().map_err(|_| err(format!("bad offset `{}`", &row[0])))?;
        if !offset_ms.is_finite() || offset_ms < 0.0 {
            return Err(err("offset must be a non-negative number".into()));
        }
        if offset_ms < last {
            return Err(err("offsets must be non-decreasing".into()));
        }
        last = offset_ms;
        let tokens: u64 = row[1].parse().map_err(|_| err(format!("bad token count `{}`", &row[1])))?;
        let transformed = match row.get(2) {
            None | Some("") => None,
            Some(f) => Some(match f.parse::<u64>() {
                Ok(n) => TransformedSource::Tokens(n),
                Err(_) => TransformedSource::Tree(base_dir.map_or_else(|| PathBuf::from(f), |d| d.join(f))),
            }),
        };
        records.push(WorkloadRecord { offset_ms, tokens, transformed });
    }
    Ok(Workload { records })
}

pub fn workload_to_text(w: &Workload) -> String {
    let mut out = String::from("# offset_ms,tokens[,transformed]\n");
    for r in &w.records {
        out.push_str(&format!("{},{}", r.offset_ms, r.tokens));
        match &r.transformed {
            Some(TransformedSource::Tokens(n)) => out.push_str(&format!(",{n}")),
            Some(TransformedSource::Tree(p)) => out.push_str(&format!(",{}", p.display())),
            None => {}
        }
        out.push('\n');
    }
    out
}

/// FCFS over `workers` identical servers; returns per-request latencies
/// (queueing plus service) and the completion time of the last request.
fn simulate_open(arrivals: &[f64], service: &[f64], workers: usize) -> (Vec<f64>, f64) {
    let mut free: BinaryHeap<Reverse<OrdF64>> = (0..workers.max(1)).map(|_| Reverse(OrdF64(0.0))).collect();
    let mut lat = Vec::with_capacity(arrivals.len());
    let mut end: f64 = 0.0;
    for (&t, &s) in arrivals.iter().zip(service) {
        let Reverse(OrdF64(f)) = free.pop().expect("at least one worker");
        let finish = t.max(f) + s;
        free.push(Reverse(OrdF64(finish)));
        lat.push(finish - t);
        end = end.max(finish);
    }
    (lat, end)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

fn report(label: &str, tokens: &[u64], latencies: &[f64], start: f64, end: f64) -> QoSReport {
    let n = latencies.len();
    let minutes = (end - start) / 60_000.0;
    QoSReport {
        label: label.to_string(),
        requests: n,
        mean_tokens: if n == 0 { 0.0 } else { tokens.iter().sum::<u64>() as f64 / n as f64 },
        min_latency_ms: if n == 0 { 0.0 } else { latencies.iter().copied().fold(f64::INFINITY, f64::min) },
        mean_latency_ms: if n == 0 { 0.0 } else { latencies.iter().sum::<f64>() / n as f64 },
        max_latency_ms: latencies.iter().copied().fold(0.0, f64::max),
        qpm: if minutes > 0.0 { n as f64 / minutes } else { 0.0 },
    }
}

/// Replays `tokens` (one per workload record) at the recorded offsets.
pub fn simulate(workload: &Workload, tokens: &[u64], model: LatencyModel, workers: usize, label: &str) -> QoSReport {
    let arrivals: Vec<f64> = workload.records.iter().map(|r| r.offset_ms).collect();
    let service: Vec<f64> = tokens.iter().map(|&t| model.service_ms(t)).collect();
    let (lat, end) = simulate_open(&arrivals, &service, workers);
    report(label, tokens, &lat, arrivals.first().copied().unwrap_or(0.0), end)
}

/// Post-transform token counts: pre-computed values are taken as-is, tree
/// references are transformed with `lib` and counted.
pub fn transformed_tokens(
    workload: &Workload,
    lib: &[TransformProgram],
    counter: &TokenCounter,
) -> Result<Vec<u64>, RuntimeError> {
    workload
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| match &r.transformed {
            Some(TransformedSource::Tokens(n)) => Ok(*n),
            Some(TransformedSource::Tree(p)) => {
                let doc = std::fs::read_to_string(p)
                    .map_err(|e| RuntimeError::Io { path: p.display().to_string(), source: e })?;
                let tree = parse_any(&doc)?;
                Ok(transform_tree(&tree, lib, RenderKind::Hierarchical, None, counter)?.tokens_after as u64)
            }
            None => Err(RuntimeError::Workload {
                line: i + 1,
                detail: "transform-on replay needs a tree reference or transformed count".into(),
            }),
        })
        .collect()
}

pub fn replay(
    workload: &Workload,
    model: LatencyModel,
    workers: usize,
    lib: &[TransformProgram],
    counter: &TokenCounter,
) -> Result<ReplayComparison, RuntimeError> {
    let before: Vec<u64> = workload.records.iter().map(|r| r.tokens).collect();
    let after = transformed_tokens(workload, lib, counter)?;
    Ok(ReplayComparison {
        off: simulate(workload, &before, model, workers, "transform-off"),
        on: simulate(workload, &after, model, workers, "transform-on"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub concurrency: usize,
    pub mean_latency_ms: f64,
    pub qpm: f64,
}

/// Closed loop: `clients` clients each send a request, wait for the reply
/// and immediately send the next, cycling through `tokens`, until every
/// entry has been sent once.
pub fn closed_loop(tokens: &[u64], model: LatencyModel, workers: usize, clients: usize) -> CurvePoint {
    let clients = clients.max(1);
    let mut free: BinaryHeap<Reverse<OrdF64>> = (0..workers.max(1)).map(|_| Reverse(OrdF64(0.0))).collect();
    // (ready time, client) — ties broken by client index for determinism.
    let mut ready: BinaryHeap<Reverse<(OrdF64, usize)>> =
        (0..clients.min(tokens.len())).map(|c| Reverse((OrdF64(0.0), c))).collect();
    let mut next = ready.len();
    let (mut total, mut end, mut done) = (0.0, 0.0f64, 0usize);
    let mut idx: Vec<usize> = (0..clients).collect();
    while let Some(Reverse((OrdF64(t), c))) = ready.pop() {
        let Reverse(OrdF64(f)) = free.pop().expect("worker");
        let finish = t.max(f) + model.service_ms(tokens[idx[c]]);
        free.push(Reverse(OrdF64(finish)));
        total += finish - t;
        end = end.max(finish);
        done += 1;
        if next < tokens.len() {
            idx[c] = next;
            next += 1;
            ready.push(Reverse((OrdF64(finish), c)));
        }
    }
    CurvePoint {
        concurrency: clients,
        mean_latency_ms: if done == 0 { 0.0 } else { total / done as f64 },
        qpm: if end > 0.0 { done as f64 / (end / 60_000.0) } else { 0.0 },
    }
}

pub fn concurrency_sweep(tokens: &[u64], model: LatencyModel, workers: usize, levels: &[usize]) -> Vec<CurvePoint> {
    levels.iter().map(|&l| closed_loop(tokens, model, workers, l)).collect()
}

/// Integer values scaled so they sum to exactly `mean · len`.
fn with_exact_mean(values: &mut [u64], mean: u64) {
    let target = mean * values.len() as u64;
    let sum: u64 = values.iter().sum();
    if sum == 0 {
        values.iter_mut().for_each(|v| *v = mean);
        return;
    }
    let scale = target as f64 / sum as f64;
    for v in values.iter_mut() {
        *v = ((*v as f64) * scale).round().max(1.0) as u64;
    }
    let mut sum: u64 = values.iter().sum();
    let n = values.len();
    let mut i = 0;
    while sum != target {
        let v = &mut values[i % n];
        if sum < target {
            *v += 1;
            sum += 1;
        } else if *v > 1 {
            *v -= 1;
            sum -= 1;
        }
        i += 1;
    }
}

/// A synthetic trace: Poisson-like arrivals at `rate_per_s`, prompt sizes
/// spread around `mean_before`, transformed sizes around `mean_after`; both
/// means hold exactly.
pub fn generate_workload(n: usize, mean_before: u64, mean_after: u64, rate_per_s: f64, seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut offsets = Vec::with_capacity(n);
    for _ in 0..n {
        offsets.push((t * 1000.0_f64).round() / 1000.0);
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        t += -u.ln() / rate_per_s * 1000.0;
    }
    let mut before: Vec<u64> = (0..n).map(|_| (mean_before as f64 * rng.gen_range(0.3..1.7)) as u64).collect();
    with_exact_mean(&mut before, mean_before);
    let ratio = mean_after as f64 / mean_before as f64;
    let mut after: Vec<u64> = before.iter().map(|&b| (b as f64 * ratio * rng.gen_range(0.7..1.3)) as u64).collect();
    with_exact_mean(&mut after, mean_after);
    Workload {
        records: offsets
            .into_iter()
            .zip(before.into_iter().zip(after))
            .map(|(offset_ms, (tokens, a))| WorkloadRecord {
                offset_ms,
                tokens,
                transformed: Some(TransformedSource::Tokens(a)),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: f64, b: f64) -> LatencyModel {
        LatencyModel::new(a, b).unwrap()
    }

    fn wl(rows: &[(f64, u64)]) -> Workload {
        Workload {
            records: rows.iter().map(|&(offset_ms, tokens)| WorkloadRecord { offset_ms, tokens, transformed: None }).collect(),
        }
    }

    #[test]
    fn single_request_latency_is_the_fixed_cost() {
        let r = simulate(&wl(&[(0.0, 0)]), &[0], m(400.0, 0.5), 1, "x");
        assert_eq!((r.min_latency_ms, r.mean_latency_ms, r.max_latency_ms), (400.0, 400.0, 400.0));
        assert_eq!(r.qpm, 150.0);
    }

    #[test]
    fn queueing_on_one_worker() {
        // Second request waits 100 ms behind the first.
        let w = wl(&[(0.0, 0), (0.0, 0)]);
        let r = simulate(&w, &[0, 0], m(100.0, 0.0), 1, "x");
        assert_eq!(r.mean_latency_ms, 150.0);
        let r = simulate(&w, &[0, 0], m(100.0, 0.0), 2, "x");
        assert_eq!(r.mean_latency_ms, 100.0);
    }

    #[test]
    fn workload_text_round_trip() {
        let w = parse_workload("# c\n0,10\n5.5, 20, 7\n6,1,screens/a.xml\n", Some(Path::new("/d"))).unwrap();
        assert_eq!(w.records[1].transformed, Some(TransformedSource::Tokens(7)));
        assert_eq!(w.records[2].transformed, Some(TransformedSource::Tree(PathBuf::from("/d/screens/a.xml"))));
        let g = generate_workload(50, 100, 20, 2.0, 1);
        assert_eq!(parse_workload(&workload_to_text(&g), None).unwrap(), g);
        assert!(parse_workload("5,1\n4,1\n", None).is_err());
        assert!(parse_workload("x,1\n", None).is_err());
        assert!(parse_workload("1\n", None).is_err());
    }

    #[test]
    fn generated_means_are_exact() {
        let w = generate_workload(1000, 8685, 2010, 10.0, 42);
        let n = w.records.len() as u64;
        assert_eq!(w.records.iter().map(|r| r.tokens).sum::<u64>(), 8685 * n);
        let after: Vec<u64> = transformed_tokens(&w, &[], &TokenCounter::Default).unwrap();
        assert_eq!(after.iter().sum::<u64>(), 2010 * n);
        assert!(w.records.iter().zip(&after).all(|(r, &a)| a <= r.tokens));
    }

    #[test]
    fn closed_loop_saturates() {
        let tokens = vec![0u64; 40];
        let pts = concurrency_sweep(&tokens, m(100.0, 0.0), 4, &[1, 2, 4, 8, 16]);
        for w in pts.windows(2) {
            assert!(w[1].mean_latency_ms >= w[0].mean_latency_ms);
        }
        assert_eq!(pts[0].mean_latency_ms, 100.0);
        // Up to one client per worker there is no queueing.
        assert_eq!(pts[2].mean_latency_ms, 100.0);
        assert!(pts[4].mean_latency_ms > 300.0);
    }
}
