//! Pipeline commands: each reads its upstream artifacts from the output
//! directory and writes its own artifacts atomically.
//!
//! | command     | reads                            | writes                        |
//! |-------------|----------------------------------|-------------------------------|
//! | build-graph | corpus, vocabulary               | `graph.json`                  |
//! | sample      | `graph.json`                     | `samples.jsonl`               |
//! | quintuples  | corpus, vocabulary               | `quintuples.jsonl`, `splits.json` |
//! | predict     | `graph.json`                     | `prediction.json`             |
//! | evaluate    | `graph.json`, `prediction.json`  | `metrics.json`, `metrics.csv` |
//! | analyze     | `quintuples.jsonl`, `splits.json`| `analysis.json`               |

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig, ScorerKind, VerbalizerKind};
use crate::corpus::{self, ConceptVocabulary, CorpusError, CorpusIndex, CorpusSchema, CorpusStore};
use crate::eval::{self, EvalError, LinkMetrics};
use crate::graph::{self, EvolvingGraph, GraphError, GraphExport};
use crate::quintuple::{self, QuintupleError, QuintupleRecord, SplitManifest};
use crate::sampler::{self, SampleError};
use crate::scorer::{
    self, HeuristicScorer, HttpTransport, PredictOptions, PredictionResult, Predictor,
    RandomScorer, RemoteScorer, ScorerError, StdioTransport, StubScorer, Transport,
    TransportError,
};
use crate::textmetrics::{self, OverlapReport, TextReport};

pub const GRAPH_FILE: &str = "graph.json";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const QUINTUPLES_FILE: &str = "quintuples.jsonl";
pub const SPLITS_FILE: &str = "splits.json";
pub const PREDICTION_FILE: &str = "prediction.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const LOCK_FILE: &str = ".concept-forge.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildGraph,
    Sample,
    Quintuples,
    Predict,
    Evaluate,
    Analyze,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BuildGraph => "build-graph",
            Command::Sample => "sample",
            Command::Quintuples => "quintuples",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Analyze => "analyze",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing upstream artifact {}; run `{producer}` first", file.display())]
    MissingArtifact { file: PathBuf, producer: &'static str },
    #[error("output directory {} is locked by another run (remove {} if stale)", dir.display(), LOCK_FILE)]
    Locked { dir: PathBuf },
    #[error("scorer: {0}")]
    Scorer(#[from] ScorerError),
    #[error("scorer backend: {0}")]
    Backend(String),
    #[error("verbalizer: {0}")]
    Verbalizer(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed artifact {}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Quintuple(#[from] QuintupleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// 0 success, 2 config, 3 upstream missing, 4 scorer transport, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::MissingArtifact { .. } => 3,
            PipelineError::Scorer(e) if e.is_retryable() => 4,
            PipelineError::Backend(_) | PipelineError::Verbalizer(_) => 4,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Exclusive claim on an output directory, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(PipelineError::Locked {
                dir: dir.to_path_buf(),
            }),
            Err(source) => Err(PipelineError::Io { path, source }),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes via a sibling temp file and a rename, so readers never see a
/// partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn upstream(out: &Path, file: &str, producer: &'static str) -> Result<PathBuf> {
    let path = out.join(file);
    if path.is_file() {
        Ok(path)
    } else {
        Err(PipelineError::MissingArtifact {
            file: path,
            producer,
        })
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| PipelineError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Runs `command` under the output-directory lock. Progress lines go to `log`.
pub fn run(cfg: &PipelineConfig, command: Command, log: &mut dyn Write) -> Result<()> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.out_dir)?;
    match command {
        Command::BuildGraph => build_graph(cfg, log),
        Command::Sample => sample(cfg, log),
        Command::Quintuples => quintuples(cfg, log),
        Command::Predict => predict(cfg, log),
        Command::Evaluate => evaluate(cfg, log),
        Command::Analyze => analyze(cfg, log),
        Command::All => {
            build_graph(cfg, log)?;
            sample(cfg, log)?;
            quintuples(cfg, log)?;
            predict(cfg, log)?;
            evaluate(cfg, log)?;
            analyze(cfg, log)
        }
    }
}

fn say(log: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(log, "{}", line.as_ref());
}

struct Ingested {
    store: CorpusStore,
    index: CorpusIndex,
}

fn ingest(cfg: &PipelineConfig) -> Result<Ingested> {
    let vocab = ConceptVocabulary::load_tsv(&cfg.corpus.vocabulary)?;
    let store = corpus::load_corpus(&cfg.corpus.path, CorpusSchema::JsonlV1)?;
    let index = corpus::build_index(&store, &vocab);
    Ok(Ingested { store, index })
}

fn load_graph(cfg: &PipelineConfig) -> Result<EvolvingGraph> {
    let path = upstream(&cfg.out_dir, GRAPH_FILE, Command::BuildGraph.name())?;
    let export: GraphExport = read_json(&path)?;
    Ok(EvolvingGraph::from_export(&export)?)
}

/// The graph as known before the test year.
fn training_graph(cfg: &PipelineConfig, g: &EvolvingGraph) -> Result<EvolvingGraph> {
    Ok(g.truncate(cfg.test_year() - 1)?)
}

pub fn build_graph(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let data = ingest(cfg)?;
    let g = graph::build_evolving_graph(&data.index, &data.store, cfg.graph.t_start, cfg.graph.t_end)?;
    write_atomic(&cfg.out_dir.join(GRAPH_FILE), g.to_export().to_json().as_bytes())?;
    say(log, format!("build-graph: {} papers, {} concepts", data.store.len(), g.concepts().len()));
    say(log, "year\tnodes\tedges\tnew_edges");
    for t in g.years() {
        let nodes = g.concepts().iter().filter(|c| g.degree(c, t) > 0).count();
        let new = if t == g.t_start() {
            g.edge_count(t)
        } else {
            g.new_edges(t)?.len()
        };
        say(log, format!("{t}\t{nodes}\t{}\t{new}", g.edge_count(t)));
    }
    Ok(())
}

pub fn sample(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let g = load_graph(cfg)?;
    let train = training_graph(cfg, &g)?;
    let samples = sampler::generate_samples(&train, &cfg.sampler)?;
    let mut buf = Vec::new();
    sampler::write_samples(&samples, &mut buf).map_err(|source| PipelineError::Io {
        path: cfg.out_dir.join(SAMPLES_FILE),
        source,
    })?;
    write_atomic(&cfg.out_dir.join(SAMPLES_FILE), &buf)?;
    let positives = samples
        .iter()
        .filter(|s| s.label == sampler::Label::Related)
        .count();
    say(
        log,
        format!(
            "sample: {} samples ({positives} related, {} unrelated) over {}..={}",
            samples.len(),
            samples.len() - positives,
            train.t_start(),
            train.t_end()
        ),
    );
    Ok(())
}

pub fn quintuples(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let data = ingest(cfg)?;
    let q = &cfg.quintuple;
    let (raw, summary) = quintuple::extract_quintuples(&data.index, &data.store, q.citation_threshold);
    let (bound, binding) = quintuple::bind_all(&raw, &data.store, &data.index, q.seed);
    let kept = quintuple::filter_quintuples(bound, &q.filter);
    let mut lines = String::new();
    for item in &kept {
        lines.push_str(&serde_json::to_string(&item.to_record()?).expect("record serializes"));
        lines.push('\n');
    }
    let [a, b, c] = q.split;
    let manifest = quintuple::split_manifest(kept.len(), (a, b, c), q.seed)?;
    write_atomic(&cfg.out_dir.join(QUINTUPLES_FILE), lines.as_bytes())?;
    write_atomic(&cfg.out_dir.join(SPLITS_FILE), pretty_json(&manifest).as_bytes())?;
    say(
        log,
        format!(
            "quintuples: {} extracted, {} unbound, {} filtered, {} kept (train {}, valid {}, test {}); {} dangling references",
            raw.len(),
            binding.dropped,
            binding.bound - kept.len(),
            kept.len(),
            manifest.train.len(),
            manifest.valid.len(),
            manifest.test.len(),
            summary.dangling_references
        ),
    );
    Ok(())
}

fn transport_for(endpoint: &str, timeout: Duration) -> Result<Box<dyn Transport>> {
    if let Some(cmd) = endpoint.strip_prefix("stdio:") {
        let t = StdioTransport::from_command_line(cmd)
            .map_err(|e| PipelineError::Backend(format!("cannot start `{cmd}`: {e}")))?;
        Ok(Box::new(t))
    } else {
        Ok(Box::new(HttpTransport::new(endpoint, timeout)))
    }
}

impl Transport for Box<dyn Transport> {
    fn exchange(&self, body: &str) -> std::result::Result<String, TransportError> {
        (**self).exchange(body)
    }
}

/// The configured scorer over `train`.
pub fn make_scorer<'g>(cfg: &PipelineConfig, train: &'g EvolvingGraph) -> Result<Box<dyn Predictor + 'g>> {
    let s = &cfg.scorer;
    Ok(match s.kind {
        ScorerKind::Heuristic => Box::new(HeuristicScorer::new(train)),
        ScorerKind::Random => Box::new(RandomScorer {
            seed: cfg.sampler.seed,
        }),
        ScorerKind::Stub => Box::new(match &s.stub_table {
            Some(path) => StubScorer::load(path)?,
            None => StubScorer::new(scorer::PairLogits::new(0.0, 1.0)),
        }),
        ScorerKind::Remote => {
            let endpoint = s.endpoint.as_deref().unwrap_or_default();
            let transport = transport_for(endpoint, Duration::from_secs(s.timeout_secs))?;
            Box::new(RemoteScorer::new(transport, s.remote_options()))
        }
    })
}

pub fn predict_options(cfg: &PipelineConfig) -> PredictOptions {
    PredictOptions {
        clamp_existing: cfg.eval.clamp,
        top_k: cfg.eval.top_k,
        k: cfg.candidate_k(),
        full_candidates: cfg.eval.full_candidates,
    }
}

pub fn predict(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let g = load_graph(cfg)?;
    let train = training_graph(cfg, &g)?;
    let scorer = make_scorer(cfg, &train)?;
    let result = scorer::predict_snapshot(&train, scorer.as_ref(), cfg.test_year(), &predict_options(cfg))?;
    write_atomic(&cfg.out_dir.join(PREDICTION_FILE), pretty_json(&result).as_bytes())?;
    say(
        log,
        format!(
            "predict: {} edges predicted for {} ({} prior)",
            result.predicted_edges.len(),
            result.target_year,
            train.edge_count(train.t_end())
        ),
    );
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let g = load_graph(cfg)?;
    let path = upstream(&cfg.out_dir, PREDICTION_FILE, Command::Predict.name())?;
    let prediction: PredictionResult = read_json(&path)?;
    let metrics = eval::evaluate_prediction(&g, &prediction, prediction.target_year)?;
    let name = format!("test_{}", prediction.target_year);
    write_atomic(&cfg.out_dir.join(METRICS_JSON), metrics.to_json().as_bytes())?;
    write_atomic(
        &cfg.out_dir.join(METRICS_CSV),
        LinkMetrics::to_csv(&[(name.as_str(), metrics)]).as_bytes(),
    )?;
    let fmt = |v: Option<f64>| v.map_or("N/A".to_string(), |v| format!("{v:.3}"));
    say(
        log,
        format!(
            "evaluate: accuracy {:.3}, all-edge F1 {}, new-edge F1 {}",
            metrics.accuracy,
            fmt(metrics.all_f1),
            fmt(metrics.new_f1)
        ),
    );
    Ok(())
}

/// Produces an idea text for a serialized quintuple.
pub trait Verbalizer {
    fn verbalize(&self, seq: &str) -> Result<String>;
}

/// Baseline that returns the two evidence sentences joined by a space.
pub struct ExtractiveVerbalizer;

impl Verbalizer for ExtractiveVerbalizer {
    fn verbalize(&self, seq: &str) -> Result<String> {
        let (_, _, a, b) = quintuple::parse_seq(seq)?;
        Ok(format!("{a} {b}"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerbalizeRequest {
    pub seq: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerbalizeResponse {
    pub idea: String,
}

/// Client for a `/verbalize` endpoint.
pub struct RemoteVerbalizer {
    transport: HttpTransport,
    max_attempts: u32,
}

impl RemoteVerbalizer {
    pub fn new(url: &str, timeout: Duration, max_attempts: u32) -> Self {
        Self {
            transport: HttpTransport::new(url, timeout),
            max_attempts: max_attempts.max(1),
        }
    }
}

impl Verbalizer for RemoteVerbalizer {
    fn verbalize(&self, seq: &str) -> Result<String> {
        let body = serde_json::to_string(&VerbalizeRequest { seq: seq.into() }).expect("request serializes");
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.transport.exchange(&body) {
                Ok(text) => {
                    let resp: VerbalizeResponse = serde_json::from_str(text.trim())
                        .map_err(|e| PipelineError::Verbalizer(format!("bad response body: {e}")))?;
                    return Ok(resp.idea);
                }
                Err(TransportError::Retryable(_)) if attempt < self.max_attempts => {}
                Err(TransportError::Retryable(m) | TransportError::Fatal(m)) => {
                    return Err(PipelineError::Verbalizer(format!("after {attempt} attempt(s): {m}")))
                }
            }
        }
    }
}

/// Input text for overlap: the sequence without its marker tokens.
pub fn overlap_input(seq: &str) -> Result<String> {
    let (c_u, c_v, a, b) = quintuple::parse_seq(seq)?;
    Ok(format!("{c_u} {c_v} {a} {b}"))
}

/// Verbalizes each record and scores it against the record's idea text.
pub fn analyze_records(
    records: &[QuintupleRecord],
    verbalizer: &dyn Verbalizer,
    rouge_beta: f64,
) -> Result<TextReport> {
    let mut overlaps = Vec::with_capacity(records.len());
    let mut generated = Vec::with_capacity(records.len());
    let mut rouge = 0.0;
    for r in records {
        let text = verbalizer.verbalize(&r.seq)?;
        overlaps.push(OverlapReport::compute(&overlap_input(&r.seq)?, &text));
        rouge += textmetrics::rouge_l_with_beta(&text, &r.idea, rouge_beta);
        generated.push(text);
    }
    let segments: Vec<(&str, Vec<&str>)> = generated
        .iter()
        .zip(records)
        .map(|(g, r)| (g.as_str(), vec![r.idea.as_str()]))
        .collect();
    Ok(TextReport {
        overlap: OverlapReport::mean(&overlaps),
        bleu: textmetrics::corpus_bleu(&segments),
        rouge_l: if records.is_empty() {
            0.0
        } else {
            rouge / records.len() as f64
        },
    })
}

pub fn analyze(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let qpath = upstream(&cfg.out_dir, QUINTUPLES_FILE, Command::Quintuples.name())?;
    let spath = upstream(&cfg.out_dir, SPLITS_FILE, Command::Quintuples.name())?;
    let mut records = Vec::new();
    for (i, line) in read_text(&qpath)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: QuintupleRecord = serde_json::from_str(line).map_err(|e| PipelineError::Artifact {
            path: qpath.clone(),
            message: format!("line {}: {e}", i + 1),
        })?;
        records.push(r);
    }
    let manifest: SplitManifest = read_json(&spath)?;
    let test: Vec<QuintupleRecord> = manifest
        .test
        .iter()
        .map(|&i| {
            records.get(i).cloned().ok_or_else(|| PipelineError::Artifact {
                path: spath.clone(),
                message: format!("index {i} beyond {} quintuples", records.len()),
            })
        })
        .collect::<Result<_>>()?;
    let verbalizer: Box<dyn Verbalizer> = match cfg.analyze.verbalizer {
        VerbalizerKind::Extractive => Box::new(ExtractiveVerbalizer),
        VerbalizerKind::Remote => Box::new(RemoteVerbalizer::new(
            cfg.analyze.endpoint.as_deref().unwrap_or_default(),
            Duration::from_secs(cfg.scorer.timeout_secs),
            cfg.scorer.max_attempts,
        )),
    };
    let report = analyze_records(&test, verbalizer.as_ref(), cfg.analyze.rouge_beta)?;
    write_atomic(&cfg.out_dir.join(ANALYSIS_FILE), report.to_json().as_bytes())?;
    say(
        log,
        format!(
            "analyze: {} test quintuples, BLEU {:.2}, ROUGE-L {:.3}",
            test.len(),
            report.bleu,
            report.rouge_l
        ),
    );
    Ok(())
}
