//! Pipeline configuration file (TOML).
//!
//! Relative paths resolve against the config file's directory. The scorer
//! endpoint can be overridden with `CONCEPT_FORGE_SCORER_URL`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quintuple::FilterRuleSet;
use crate::sampler::SamplerConfig;
use crate::scorer::RemoteOptions;

pub const SCORER_URL_ENV: &str = "CONCEPT_FORGE_SCORER_URL";

#[derive(Debug, Error, PartialEq)]
#[error("config error in `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    pub vocabulary: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub t_start: i32,
    pub t_end: i32,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            t_start: 2000,
            t_end: 2021,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Stub,
    Heuristic,
    Remote,
    /// Uniform random logits, seeded from `sampler.seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub kind: ScorerKind,
    /// `http://host:port/score` or `stdio:<command line>`.
    pub endpoint: Option<String>,
    /// JSONL stub table for `kind = "stub"`.
    pub stub_table: Option<PathBuf>,
    pub timeout_secs: u64,
    pub batch_size: usize,
    pub parallelism: usize,
    pub max_attempts: u32,
    pub retry_backoff_ms: u64,
}

impl ScorerSection {
    pub fn remote_options(&self) -> RemoteOptions {
        RemoteOptions {
            batch_size: self.batch_size,
            parallelism: self.parallelism,
            max_attempts: self.max_attempts,
            retry_backoff_ms: self.retry_backoff_ms,
        }
    }
}

impl Default for ScorerSection {
    fn default() -> Self {
        Self {
            kind: ScorerKind::Heuristic,
            endpoint: None,
            stub_table: None,
            timeout_secs: 30,
            batch_size: RemoteOptions::default().batch_size,
            parallelism: RemoteOptions::default().parallelism,
            max_attempts: RemoteOptions::default().max_attempts,
            retry_backoff_ms: RemoteOptions::default().retry_backoff_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Held-out year; defaults to the graph's last year.
    pub test_year: Option<i32>,
    pub clamp: bool,
    pub top_k: Option<usize>,
    /// Candidate radius; defaults to the sampler's `k`.
    pub candidate_k: Option<usize>,
    pub full_candidates: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            test_year: None,
            clamp: true,
            top_k: Some(20),
            candidate_k: None,
            full_candidates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuintupleSection {
    pub citation_threshold: u64,
    pub split: [f64; 3],
    pub seed: u64,
    pub filter: FilterRuleSet,
}

impl Default for QuintupleSection {
    fn default() -> Self {
        Self {
            citation_threshold: 2,
            split: [0.8, 0.1, 0.1],
            seed: 0,
            filter: FilterRuleSet::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerbalizerKind {
    /// Concatenates the two evidence sentences.
    Extractive,
    /// POSTs `{"seq": ...}` and reads `{"idea": ...}`.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub verbalizer: VerbalizerKind,
    pub endpoint: Option<String>,
    pub rouge_beta: f64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            verbalizer: VerbalizerKind::Extractive,
            endpoint: None,
            rouge_beta: crate::textmetrics::DEFAULT_ROUGE_BETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub scorer: ScorerSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub quintuple: QuintupleSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
}

impl PipelineConfig {
    /// Parses TOML and resolves relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| text[s].lines().next().unwrap_or_default().trim().to_string())
                .unwrap_or_else(|| "<file>".into());
            ConfigError::new(&field, e.message().to_string())
        })?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        resolve(&mut cfg.corpus.path);
        resolve(&mut cfg.corpus.vocabulary);
        if let Some(p) = cfg.scorer.stub_table.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Applies `--out`, `--seed` and the scorer endpoint environment variable.
    pub fn apply_overrides(
        &mut self,
        out: Option<PathBuf>,
        seed: Option<u64>,
        scorer_url: Option<String>,
    ) {
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(seed) = seed {
            self.sampler.seed = seed;
            self.quintuple.seed = seed;
        }
        if let Some(url) = scorer_url.filter(|u| !u.is_empty()) {
            self.scorer.endpoint = Some(url);
        }
    }

    pub fn test_year(&self) -> i32 {
        self.eval.test_year.unwrap_or(self.graph.t_end)
    }

    pub fn candidate_k(&self) -> usize {
        self.eval.candidate_k.unwrap_or(self.sampler.k)
    }

    /// Checks every field before any command writes output.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, path) in [
            ("corpus.path", &self.corpus.path),
            ("corpus.vocabulary", &self.corpus.vocabulary),
        ] {
            if !path.is_file() {
                return Err(ConfigError::new(
                    field,
                    format!("file {} does not exist", path.display()),
                ));
            }
        }
        let g = &self.graph;
        if g.t_start > g.t_end {
            return Err(ConfigError::new(
                "graph",
                format!("empty year range {}..={}", g.t_start, g.t_end),
            ));
        }
        self.sampler
            .validate()
            .map_err(|e| ConfigError::new("sampler", e.to_string()))?;
        let t = self.test_year();
        if t <= g.t_start || t > g.t_end {
            return Err(ConfigError::new(
                "eval.test_year",
                format!("{t} must lie in {}..={}", g.t_start + 1, g.t_end),
            ));
        }
        if self.candidate_k() == 0 {
            return Err(ConfigError::new("eval.candidate_k", "must be >= 1"));
        }
        match self.scorer.kind {
            ScorerKind::Stub => match &self.scorer.stub_table {
                Some(p) if !p.is_file() => {
                    return Err(ConfigError::new(
                        "scorer.stub_table",
                        format!("file {} does not exist", p.display()),
                    ))
                }
                _ => {}
            },
            ScorerKind::Remote => {
                let ep = self.scorer.endpoint.as_deref().unwrap_or_default();
                if !(ep.starts_with("http://") || ep.starts_with("stdio:")) {
                    return Err(ConfigError::new(
                        "scorer.endpoint",
                        format!("expected http://... or stdio:<command> (or set {SCORER_URL_ENV})"),
                    ));
                }
            }
            ScorerKind::Heuristic | ScorerKind::Random => {}
        }
        if self.scorer.batch_size == 0 {
            return Err(ConfigError::new("scorer.batch_size", "must be >= 1"));
        }
        if self.scorer.parallelism == 0 {
            return Err(ConfigError::new("scorer.parallelism", "must be >= 1"));
        }
        let [a, b, c] = self.quintuple.split;
        crate::quintuple::split_sizes(0, (a, b, c))
            .map_err(|e| ConfigError::new("quintuple.split", e.to_string()))?;
        self.quintuple
            .filter
            .validate()
            .map_err(|e| ConfigError::new("quintuple.filter", e.to_string()))?;
        if self.analyze.verbalizer == VerbalizerKind::Remote
            && !self
                .analyze
                .endpoint
                .as_deref()
                .is_some_and(|e| e.starts_with("http://"))
        {
            return Err(ConfigError::new("analyze.endpoint", "expected http://..."));
        }
        if !(self.analyze.rouge_beta > 0.0) {
            return Err(ConfigError::new("analyze.rouge_beta", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
out_dir = "out"
[corpus]
path = "corpus.jsonl"
vocabulary = "vocab.tsv"
"#;

    #[test]
    fn defaults_and_path_resolution() {
        let cfg = PipelineConfig::from_toml(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.out_dir, Path::new("/data/out"));
        assert_eq!(cfg.corpus.path, Path::new("/data/corpus.jsonl"));
        assert_eq!(cfg.sampler.k, 2);
        assert_eq!(cfg.sampler.d, 5);
        assert_eq!(cfg.quintuple.citation_threshold, 2);
        assert_eq!(cfg.scorer.batch_size, 64);
        assert_eq!((cfg.graph.t_start, cfg.graph.t_end), (2000, 2021));
        assert_eq!(cfg.test_year(), 2021);
    }

    #[test]
    fn overrides() {
        let mut cfg = PipelineConfig::from_toml(MINIMAL, Path::new("/data")).unwrap();
        cfg.apply_overrides(Some("/tmp/x".into()), Some(9), Some("http://h:1/score".into()));
        assert_eq!(cfg.out_dir, Path::new("/tmp/x"));
        assert_eq!((cfg.sampler.seed, cfg.quintuple.seed), (9, 9));
        assert_eq!(cfg.scorer.endpoint.as_deref(), Some("http://h:1/score"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = format!("{MINIMAL}\n[sampler]\nkk = 3\n");
        assert!(PipelineConfig::from_toml(&text, Path::new(".")).is_err());
    }

    #[test]
    fn missing_vocabulary_names_field() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
        let cfg = PipelineConfig::from_toml(MINIMAL, dir.path()).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "corpus.vocabulary");
    }

    #[test]
    fn remote_scorer_needs_endpoint() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
        std::fs::write(dir.path().join("vocab.tsv"), "").unwrap();
        let text = format!("{MINIMAL}\n[scorer]\nkind = \"remote\"\n");
        let mut cfg = PipelineConfig::from_toml(&text, dir.path()).unwrap();
        assert_eq!(cfg.validate().unwrap_err().field, "scorer.endpoint");
        cfg.apply_overrides(None, None, Some("http://127.0.0.1:9/score".into()));
        cfg.validate().unwrap();
    }
}
