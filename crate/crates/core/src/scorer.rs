//! Link scoring and snapshot prediction.
//!
//! A [`Predictor`] turns serialized samples into a pair of logits
//! `(related, unrelated)`. Built-in predictors are a lookup stub, a
//! common-neighbour heuristic and a seeded random baseline; [`RemoteScorer`]
//! speaks the JSON wire protocol to an external masked-LM service over HTTP
//! or a line-delimited child process.
//!
//! Wire protocol: request `{"sequences": [str]}`, response
//! `{"logits": [[related, unrelated], ...]}` of the same length.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ConceptId;
use crate::graph::{ConceptPair, EvolvingGraph, GraphError};
use crate::sampler::{candidate_sample, LinkSample};
use crate::seeded_rng;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid prediction request: {0}")]
    Invalid(String),
    #[error("stub table: {0}")]
    Table(String),
}

impl ScorerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScorerError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogits {
    pub related: f64,
    pub unrelated: f64,
}

impl PairLogits {
    pub fn new(related: f64, unrelated: f64) -> Self {
        Self { related, unrelated }
    }

    /// `related - unrelated`, the ranking score.
    pub fn margin(&self) -> f64 {
        self.related - self.unrelated
    }

    /// Strict argmax; ties are unrelated.
    pub fn is_related(&self) -> bool {
        self.related > self.unrelated
    }

    pub fn is_finite(&self) -> bool {
        self.related.is_finite() && self.unrelated.is_finite()
    }
}

/// Scores samples; output index `i` belongs to input sample `i`.
pub trait Predictor: Send + Sync {
    fn score_batch(&self, samples: &[LinkSample]) -> Result<Vec<PairLogits>, ScorerError>;
}

/// Lookup table keyed by `(c_u, c_v, t)`; either orientation matches.
#[derive(Debug, Clone)]
pub struct StubScorer {
    table: HashMap<(ConceptId, ConceptId, i32), PairLogits>,
    fallback: PairLogits,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StubEntry {
    pub c_u: ConceptId,
    pub c_v: ConceptId,
    pub t: i32,
    pub related: f64,
    pub unrelated: f64,
}

impl StubScorer {
    /// Unlisted samples score as `fallback`.
    pub fn new(fallback: PairLogits) -> Self {
        Self {
            table: HashMap::new(),
            fallback,
        }
    }

    pub fn insert(&mut self, u: &str, v: &str, t: i32, logits: PairLogits) {
        self.table.insert((u.to_string(), v.to_string(), t), logits);
    }

    pub fn with(mut self, u: &str, v: &str, t: i32, logits: PairLogits) -> Self {
        self.insert(u, v, t, logits);
        self
    }

    /// Reads a JSONL table of [`StubEntry`] lines. Missing entries score
    /// `(0, 1)`.
    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScorerError::Table(format!("{}: {e}", path.display())))?;
        let mut stub = Self::new(PairLogits::new(0.0, 1.0));
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: StubEntry = serde_json::from_str(line)
                .map_err(|err| ScorerError::Table(format!("line {}: {err}", i + 1)))?;
            stub.insert(&e.c_u, &e.c_v, e.t, PairLogits::new(e.related, e.unrelated));
        }
        Ok(stub)
    }

    fn lookup(&self, s: &LinkSample) -> PairLogits {
        self.table
            .get(&(s.c_u.clone(), s.c_v.clone(), s.t))
            .or_else(|| self.table.get(&(s.c_v.clone(), s.c_u.clone(), s.t)))
            .copied()
            .unwrap_or(self.fallback)
    }
}

impl Predictor for StubScorer {
    fn score_batch(&self, samples: &[LinkSample]) -> Result<Vec<PairLogits>, ScorerError> {
        Ok(samples.iter().map(|s| self.lookup(s)).collect())
    }
}

/// `related = ln(1 + common neighbours) + jaccard`, `unrelated = 0`, both
/// taken on snapshot `t`.
pub fn heuristic_score(
    g: &EvolvingGraph,
    t: i32,
    pair: &ConceptPair,
) -> Result<PairLogits, GraphError> {
    for c in [pair.lo(), pair.hi()] {
        if !g.has_concept(c) {
            return Err(GraphError::UnknownConcept(c.to_string()));
        }
    }
    if !g.years().contains(&t) {
        return Err(GraphError::YearOutOfRange {
            year: t,
            t_start: g.t_start(),
            t_end: g.t_end(),
        });
    }
    Ok(heuristic_at(g, t, pair.lo(), pair.hi()))
}

fn heuristic_at(g: &EvolvingGraph, t: i32, u: &str, v: &str) -> PairLogits {
    let nu: BTreeSet<&ConceptId> = g.neighbors(u, t).collect();
    let nv: BTreeSet<&ConceptId> = g.neighbors(v, t).collect();
    let common = nu.intersection(&nv).count();
    let union = nu.union(&nv).count();
    let jaccard = if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    };
    PairLogits::new((common as f64).ln_1p() + jaccard, 0.0)
}

/// Heuristic predictor. A sample at year `t` is scored on the snapshot of
/// `t - 1` (clamped to the graph's last year): the knowledge available
/// before the year being predicted.
pub struct HeuristicScorer<'g> {
    graph: &'g EvolvingGraph,
}

impl<'g> HeuristicScorer<'g> {
    pub fn new(graph: &'g EvolvingGraph) -> Self {
        Self { graph }
    }
}

impl Predictor for HeuristicScorer<'_> {
    fn score_batch(&self, samples: &[LinkSample]) -> Result<Vec<PairLogits>, ScorerError> {
        samples
            .iter()
            .map(|s| {
                for c in [&s.c_u, &s.c_v] {
                    if !self.graph.has_concept(c) {
                        return Err(GraphError::UnknownConcept(c.clone()).into());
                    }
                }
                let year = (s.t - 1).min(self.graph.t_end());
                if year < self.graph.t_start() {
                    return Ok(PairLogits::new(0.0, 0.0));
                }
                Ok(heuristic_at(self.graph, year, &s.c_u, &s.c_v))
            })
            .collect()
    }
}

/// Uniform random baseline: both logits drawn from `U(0, 1)` on a per-sample
/// stream, so each pair is predicted related with probability 1/2.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Predictor for RandomScorer {
    fn score_batch(&self, samples: &[LinkSample]) -> Result<Vec<PairLogits>, ScorerError> {
        Ok(samples
            .iter()
            .map(|s| {
                let mut rng = seeded_rng(self.seed, &[&s.c_u, &s.c_v, &s.t.to_string()]);
                PairLogits::new(rng.gen(), rng.gen())
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub sequences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub logits: Vec<[f64; 2]>,
}

/// Decodes a response body and checks it against the request length.
pub fn decode_response(body: &str, expected: usize) -> Result<Vec<PairLogits>, ScorerError> {
    let resp: ScoreResponse = serde_json::from_str(body.trim())
        .map_err(|e| ScorerError::Protocol(format!("bad response body: {e}")))?;
    if resp.logits.len() != expected {
        return Err(ScorerError::Protocol(format!(
            "expected {expected} logit pairs, got {}",
            resp.logits.len()
        )));
    }
    resp.logits
        .into_iter()
        .map(|[r, u]| {
            let l = PairLogits::new(r, u);
            if l.is_finite() {
                Ok(l)
            } else {
                Err(ScorerError::Protocol("non-finite logit".into()))
            }
        })
        .collect()
}

#[derive(Debug)]
pub enum TransportError {
    /// Worth retrying: connection failure, timeout, 5xx.
    Retryable(String),
    /// Request rejected or unusable: 4xx, broken framing.
    Fatal(String),
}

/// Sends one request body and returns the response body.
pub trait Transport: Send + Sync {
    fn exchange(&self, body: &str) -> Result<String, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
}

impl HttpTransport {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: url.to_string(),
        }
    }
}

impl Transport for HttpTransport {
    fn exchange(&self, body: &str) -> Result<String, TransportError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            500..=599 => Err(TransportError::Retryable(format!("HTTP {status}: {text}"))),
            _ => Err(TransportError::Fatal(format!("HTTP {status}: {text}"))),
        }
    }
}

/// Line-delimited exchange with a child process: one request per line on
/// stdin, one response per line on stdout.
pub struct StdioTransport {
    inner: Mutex<StdioChild>,
}

struct StdioChild {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl StdioTransport {
    pub fn spawn(program: &str, args: &[String]) -> std::io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            inner: Mutex::new(StdioChild {
                child,
                stdin,
                stdout,
            }),
        })
    }

    /// Parses `"program arg1 arg2"`.
    pub fn from_command_line(line: &str) -> std::io::Result<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty stdio command")
        })?;
        let args: Vec<String> = parts.collect();
        Self::spawn(&program, &args)
    }
}

impl Transport for StdioTransport {
    fn exchange(&self, body: &str) -> Result<String, TransportError> {
        let mut io = self.inner.lock().expect("stdio transport poisoned");
        if body.contains('\n') {
            return Err(TransportError::Fatal("request contains a newline".into()));
        }
        writeln!(io.stdin, "{body}")
            .and_then(|_| io.stdin.flush())
            .map_err(|e| TransportError::Fatal(format!("write to scorer process: {e}")))?;
        let mut line = String::new();
        let n = io
            .stdout
            .read_line(&mut line)
            .map_err(|e| TransportError::Fatal(format!("read from scorer process: {e}")))?;
        if n == 0 {
            return Err(TransportError::Fatal("scorer process closed stdout".into()));
        }
        Ok(line)
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        if let Ok(io) = self.inner.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteOptions {
    pub batch_size: usize,
    /// Concurrent requests in flight.
    pub parallelism: usize,
    pub max_attempts: u32,
    pub retry_backoff_ms: u64,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            parallelism: 1,
            max_attempts: 3,
            retry_backoff_ms: 100,
        }
    }
}

/// Batches samples over a [`Transport`] and reassembles results in order.
pub struct RemoteScorer<T> {
    transport: T,
    opts: RemoteOptions,
}

impl<T: Transport> RemoteScorer<T> {
    pub fn new(transport: T, opts: RemoteOptions) -> Self {
        Self { transport, opts }
    }

    fn score_chunk(&self, chunk: &[LinkSample]) -> Result<Vec<PairLogits>, ScorerError> {
        let request = ScoreRequest {
            sequences: chunk.iter().map(|s| s.text.clone()).collect(),
        };
        let body = serde_json::to_string(&request).expect("request serializes");
        let max = self.opts.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.transport.exchange(&body) {
                Ok(text) => return decode_response(&text, chunk.len()),
                Err(TransportError::Fatal(m)) => return Err(ScorerError::Protocol(m)),
                Err(TransportError::Retryable(message)) if attempt >= max => {
                    return Err(ScorerError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                Err(TransportError::Retryable(_)) => {
                    std::thread::sleep(Duration::from_millis(
                        self.opts.retry_backoff_ms * u64::from(attempt),
                    ));
                }
            }
        }
    }
}

impl<T: Transport> Predictor for RemoteScorer<T> {
    fn score_batch(&self, samples: &[LinkSample]) -> Result<Vec<PairLogits>, ScorerError> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let chunks: Vec<&[LinkSample]> = samples.chunks(self.opts.batch_size.max(1)).collect();
        let results: Vec<Mutex<Option<Result<Vec<PairLogits>, ScorerError>>>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.opts.parallelism.clamp(1, chunks.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= chunks.len() {
                        break;
                    }
                    let r = self.score_chunk(chunks[i]);
                    let failed = r.is_err();
                    *results[i].lock().expect("result slot") = Some(r);
                    if failed {
                        // Stop handing out further chunks.
                        next.store(chunks.len(), Ordering::Relaxed);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(samples.len());
        for slot in results {
            match slot.into_inner().expect("result slot") {
                Some(r) => out.extend(r?),
                None => {}
            }
        }
        if out.len() != samples.len() {
            return Err(ScorerError::Protocol("scoring aborted".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOptions {
    pub clamp_existing: bool,
    pub top_k: Option<usize>,
    /// Candidate radius: unconnected pairs within `k` hops.
    pub k: usize,
    /// Score every unconnected pair instead of the `k`-hop candidates.
    pub full_candidates: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            clamp_existing: true,
            top_k: None,
            k: 2,
            full_candidates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub pair: ConceptPair,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub target_year: i32,
    pub concepts: Vec<ConceptId>,
    pub predicted_edges: BTreeSet<ConceptPair>,
    pub ranked_candidates: Vec<RankedPair>,
}

/// Unconnected pairs at the last snapshot, canonical order.
pub fn candidate_pairs(g: &EvolvingGraph, opts: &PredictOptions) -> Vec<ConceptPair> {
    let last = g.t_end();
    let mut out = Vec::new();
    if opts.full_candidates {
        let cs: Vec<&ConceptId> = g.concepts().iter().collect();
        for (i, u) in cs.iter().enumerate() {
            for v in &cs[i + 1..] {
                if !g.connected(u, v, last) {
                    out.push(ConceptPair::new(u.as_str(), v.as_str()).expect("distinct"));
                }
            }
        }
    } else {
        for u in g.concepts() {
            for v in g.k_hop_unchecked(last, u, opts.k) {
                if v > *u && !g.connected(u, &v, last) {
                    out.push(ConceptPair::new(u.as_str(), v).expect("distinct"));
                }
            }
        }
    }
    out
}

/// Forecasts snapshot `target_year = g.t_end() + 1`.
pub fn predict_snapshot(
    g: &EvolvingGraph,
    scorer: &dyn Predictor,
    target_year: i32,
    opts: &PredictOptions,
) -> Result<PredictionResult, ScorerError> {
    if target_year != g.t_end() + 1 {
        return Err(ScorerError::Invalid(format!(
            "target year {target_year} must follow the graph's last year {}",
            g.t_end()
        )));
    }
    if opts.k == 0 && !opts.full_candidates {
        return Err(ScorerError::Invalid("candidate radius k must be >= 1".into()));
    }
    let candidates = candidate_pairs(g, opts);
    let samples: Vec<LinkSample> = candidates
        .iter()
        .map(|p| candidate_sample(p, target_year))
        .collect();
    let logits = scorer.score_batch(&samples)?;
    if logits.len() != samples.len() {
        return Err(ScorerError::Protocol(format!(
            "scorer returned {} results for {} samples",
            logits.len(),
            samples.len()
        )));
    }

    let mut predicted: BTreeSet<ConceptPair> = if opts.clamp_existing {
        g.edges_at(g.t_end()).cloned().collect()
    } else {
        BTreeSet::new()
    };
    let mut ranked = Vec::with_capacity(candidates.len());
    for (pair, l) in candidates.into_iter().zip(logits) {
        if !l.is_finite() {
            return Err(ScorerError::Protocol(format!("non-finite logits for {pair}")));
        }
        if l.is_related() {
            predicted.insert(pair.clone());
        }
        ranked.push(RankedPair {
            pair,
            score: l.margin(),
        });
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pair.cmp(&b.pair)));
    if let Some(k) = opts.top_k {
        ranked.truncate(k);
    }
    Ok(PredictionResult {
        target_year,
        concepts: g.concepts().iter().cloned().collect(),
        predicted_edges: predicted,
        ranked_candidates: ranked,
    })
}
