//! Positive and negative link-prediction samples with their prompt sequences.
//!
//! Each sample is one canonical pair at one year, verbalised as
//! `[CLS] {prompt}: in {t}, {c_u} is [MASK] to {c_v}.[SEP]`. The prompt word
//! is `Existing` when the pair was already connected the year before.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ConceptId;
use crate::graph::{ConceptPair, EvolvingGraph, GraphError};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptWord {
    Existing,
    Unknown,
}

impl PromptWord {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptWord::Existing => "Existing",
            PromptWord::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for PromptWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptWord {
    type Err = SampleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Existing" => Ok(PromptWord::Existing),
            "Unknown" => Ok(PromptWord::Unknown),
            other => Err(SampleError::Parse(format!("unknown prompt word `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Related,
    Unrelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSample {
    pub c_u: ConceptId,
    pub c_v: ConceptId,
    pub t: i32,
    pub prompt: PromptWord,
    pub label: Label,
    pub text: String,
}

impl LinkSample {
    pub fn new(c_u: &str, c_v: &str, t: i32, prompt: PromptWord, label: Label) -> Self {
        Self {
            c_u: c_u.to_string(),
            c_v: c_v.to_string(),
            t,
            prompt,
            label,
            text: serialize_sample(c_u, c_v, t, prompt),
        }
    }

    fn sort_key(&self) -> (i32, &str, &str) {
        (self.t, &self.c_u, &self.c_v)
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("cannot parse sequence: {0}")]
    Parse(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("sample I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Hop radius of the negative-sampling neighbourhood.
    pub k: usize,
    /// Look-ahead horizon in years.
    pub d: i32,
    pub max_negatives_per_anchor: Option<usize>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k: 2,
            d: 5,
            max_negatives_per_anchor: None,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.k < 2 {
            return Err(SampleError::Config(format!("k must be >= 2, got {}", self.k)));
        }
        if self.d < 1 {
            return Err(SampleError::Config(format!("d must be >= 1, got {}", self.d)));
        }
        Ok(())
    }
}

/// `Existing` iff the pair was connected at `t - 1`; nothing exists before
/// `t_start`.
pub fn prompt_of(g: &EvolvingGraph, u: &str, v: &str, t: i32) -> Result<PromptWord, GraphError> {
    for c in [u, v] {
        if !g.has_concept(c) {
            return Err(GraphError::UnknownConcept(c.to_string()));
        }
    }
    if u == v {
        return Err(GraphError::SelfPair(u.to_string()));
    }
    if !g.years().contains(&t) {
        return Err(GraphError::YearOutOfRange {
            year: t,
            t_start: g.t_start(),
            t_end: g.t_end(),
        });
    }
    Ok(if g.connected(u, v, t - 1) {
        PromptWord::Existing
    } else {
        PromptWord::Unknown
    })
}

pub fn serialize_sample(u: &str, v: &str, t: i32, prompt: PromptWord) -> String {
    format!("[CLS] {prompt}: in {t}, {u} is [MASK] to {v}.[SEP]")
}

/// Inverse of [`serialize_sample`]: `(c_u, c_v, t, prompt)`.
pub fn parse_sample(text: &str) -> Result<(String, String, i32, PromptWord), SampleError> {
    let err = || SampleError::Parse(text.to_string());
    let body = text
        .strip_prefix("[CLS] ")
        .and_then(|s| s.strip_suffix(".[SEP]"))
        .ok_or_else(err)?;
    let (prompt, rest) = body.split_once(": in ").ok_or_else(err)?;
    let prompt: PromptWord = prompt.parse()?;
    let (year, rest) = rest.split_once(", ").ok_or_else(err)?;
    if year.is_empty() || !year.bytes().all(|b| b.is_ascii_digit() || b == b'-') {
        return Err(err());
    }
    let t: i32 = year.parse().map_err(|_| err())?;
    let (u, v) = rest.split_once(" is [MASK] to ").ok_or_else(err)?;
    Ok((u.to_string(), v.to_string(), t, prompt))
}

/// One `related` sample per edge and per year the edge exists.
pub fn generate_positives(g: &EvolvingGraph) -> Vec<LinkSample> {
    let mut out = Vec::new();
    for t in g.years() {
        for pair in g.edges_at(t) {
            let prompt = if g.connected(pair.lo(), pair.hi(), t - 1) {
                PromptWord::Existing
            } else {
                PromptWord::Unknown
            };
            out.push(LinkSample::new(pair.lo(), pair.hi(), t, prompt, Label::Related));
        }
    }
    out
}

/// Pairs `(u, v, t)` with `v` inside the `k`-hop neighbourhood of `u` at `t`
/// and still unconnected at `t + d`, for `t <= t_end - d`.
///
/// Each unordered pair is produced by its lexicographically smaller anchor,
/// so the per-anchor cap applies to the pairs an anchor owns.
pub fn generate_negatives(
    g: &EvolvingGraph,
    cfg: &SamplerConfig,
) -> Result<Vec<LinkSample>, SampleError> {
    cfg.validate()?;
    let last_t = g.t_end() - cfg.d;
    if last_t < g.t_start() {
        return Ok(Vec::new());
    }
    let anchors: Vec<&ConceptId> = g.concepts().iter().collect();
    let per_anchor: Vec<Vec<LinkSample>> = anchors
        .par_iter()
        .map(|u| {
            let mut found = Vec::new();
            for t in g.t_start()..=last_t {
                for v in g.k_hop_unchecked(t, u, cfg.k) {
                    if v.as_str() > u.as_str() && !g.connected(u, &v, t + cfg.d) {
                        found.push(LinkSample::new(u, &v, t, PromptWord::Unknown, Label::Unrelated));
                    }
                }
            }
            if let Some(cap) = cfg.max_negatives_per_anchor {
                if found.len() > cap {
                    let mut rng = seeded_rng(cfg.seed, &["negatives", u]);
                    found.shuffle(&mut rng);
                    found.truncate(cap);
                }
            }
            found
        })
        .collect();
    let mut out: Vec<LinkSample> = per_anchor.into_iter().flatten().collect();
    sort_samples(&mut out);
    Ok(out)
}

/// Positives and negatives in export order.
pub fn generate_samples(
    g: &EvolvingGraph,
    cfg: &SamplerConfig,
) -> Result<Vec<LinkSample>, SampleError> {
    let mut all = generate_positives(g);
    all.extend(generate_negatives(g, cfg)?);
    sort_samples(&mut all);
    Ok(all)
}

/// Year ascending, then canonical pair.
pub fn sort_samples(samples: &mut [LinkSample]) {
    samples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Candidate sample for scoring: the pair at `t` with the `Unknown` prompt.
pub fn candidate_sample(pair: &ConceptPair, t: i32) -> LinkSample {
    LinkSample::new(pair.lo(), pair.hi(), t, PromptWord::Unknown, Label::Unrelated)
}

pub fn write_samples<W: Write>(samples: &[LinkSample], mut w: W) -> std::io::Result<()> {
    let mut sorted: Vec<&LinkSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    for s in sorted {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes JSONL sorted by year then pair.
pub fn export_samples(samples: &[LinkSample], path: &Path) -> Result<(), SampleError> {
    let file = File::create(path)?;
    write_samples(samples, BufWriter::new(file))?;
    Ok(())
}

pub fn import_samples(path: &Path) -> Result<Vec<LinkSample>, SampleError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: LinkSample = serde_json::from_str(&line).map_err(|e| SampleError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}
