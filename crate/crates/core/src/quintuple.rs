//! Co-occurrence citation quintuples `(p_i, p_j, c_u, c_v, p)`.
//!
//! A target paper `p` cites `p_i` and `p_j`; `c_u` appears in both `p` and
//! `p_i`, `c_v` in both `p` and `p_j`. Quintuples get one evidence sentence
//! per reference side, the target's idea sentences as training text, a
//! rule-based noise filter and a seeded train/valid/test split.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConceptId, CorpusIndex, CorpusStore, PaperId};
use crate::seeded_rng;

#[derive(Debug, Error, PartialEq)]
pub enum QuintupleError {
    #[error("quintuple ({p_i}, {p_j}, {c_u}, {c_v}, {p}) has no bound sentences")]
    Unbound {
        p_i: PaperId,
        p_j: PaperId,
        c_u: ConceptId,
        c_v: ConceptId,
        p: PaperId,
    },
    #[error("cannot parse sequence: {0}")]
    Parse(String),
    #[error("invalid split ratios {0:?}")]
    Ratios((f64, f64, f64)),
    #[error("invalid filter rules: {0}")]
    Rules(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BoundSentence {
    pub index: usize,
    pub text: String,
    pub section: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quintuple {
    pub p: PaperId,
    pub p_i: PaperId,
    pub p_j: PaperId,
    pub c_u: ConceptId,
    pub c_v: ConceptId,
    pub sent_i: Option<BoundSentence>,
    pub sent_j: Option<BoundSentence>,
    pub idea_sentences: Vec<String>,
}

impl Quintuple {
    pub fn new(p_i: &str, p_j: &str, c_u: &str, c_v: &str, p: &str) -> Self {
        Self {
            p: p.into(),
            p_i: p_i.into(),
            p_j: p_j.into(),
            c_u: c_u.into(),
            c_v: c_v.into(),
            sent_i: None,
            sent_j: None,
            idea_sentences: Vec::new(),
        }
    }

    /// `(p_i, p_j, c_u, c_v, p)`.
    pub fn key(&self) -> (&str, &str, &str, &str, &str) {
        (&self.p_i, &self.p_j, &self.c_u, &self.c_v, &self.p)
    }

    pub fn idea(&self) -> String {
        self.idea_sentences.join(" ")
    }

    fn unbound(&self) -> QuintupleError {
        QuintupleError::Unbound {
            p_i: self.p_i.clone(),
            p_j: self.p_j.clone(),
            c_u: self.c_u.clone(),
            c_v: self.c_v.clone(),
            p: self.p.clone(),
        }
    }

    pub fn to_record(&self) -> Result<QuintupleRecord, QuintupleError> {
        Ok(QuintupleRecord {
            p_i: self.p_i.clone(),
            p_j: self.p_j.clone(),
            p: self.p.clone(),
            c_u: self.c_u.clone(),
            c_v: self.c_v.clone(),
            sent_i: self.sent_i.as_ref().ok_or_else(|| self.unbound())?.text.clone(),
            sent_j: self.sent_j.as_ref().ok_or_else(|| self.unbound())?.text.clone(),
            idea: self.idea(),
            seq: serialize_seq(self)?,
        })
    }
}

/// One JSONL line of the quintuple export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuintupleRecord {
    pub p_i: PaperId,
    pub p_j: PaperId,
    pub p: PaperId,
    pub c_u: ConceptId,
    pub c_v: ConceptId,
    pub sent_i: String,
    pub sent_j: String,
    pub idea: String,
    pub seq: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionSummary {
    pub targets_considered: usize,
    pub targets_below_threshold: usize,
    /// Reference ids that do not resolve to a corpus paper.
    pub dangling_references: usize,
}

/// All quintuples whose target has at least `citation_threshold` citations,
/// sorted by `(p_i, p_j, c_u, c_v, p)`.
pub fn extract_quintuples(
    index: &CorpusIndex,
    corpus: &CorpusStore,
    citation_threshold: u64,
) -> (Vec<Quintuple>, ExtractionSummary) {
    let mut summary = ExtractionSummary::default();
    let targets: Vec<_> = corpus
        .papers()
        .iter()
        .filter(|p| {
            summary.targets_considered += 1;
            let keep = p.citation_count >= citation_threshold;
            if !keep {
                summary.targets_below_threshold += 1;
            }
            keep
        })
        .collect();

    let per_target: Vec<(BTreeSet<Quintuple>, usize)> = targets
        .par_iter()
        .map(|p| {
            let mut dangling = 0;
            let mut refs: BTreeSet<&str> = BTreeSet::new();
            for r in &p.references {
                if corpus.get(r).is_some() {
                    refs.insert(r);
                } else {
                    dangling += 1;
                }
            }
            let mut found = BTreeSet::new();
            let Some(target_concepts) = index.concepts_of(&p.id) else {
                return (found, dangling);
            };
            // For each reference, the concepts it shares with the target.
            let shared: Vec<(&str, Vec<&ConceptId>)> = refs
                .iter()
                .map(|r| {
                    let cs = index
                        .concepts_of(r)
                        .map(|cs| cs.intersection(target_concepts).collect())
                        .unwrap_or_default();
                    (*r, cs)
                })
                .collect();
            for (p_i, cu_set) in &shared {
                for (p_j, cv_set) in &shared {
                    if p_i == p_j {
                        continue;
                    }
                    for c_u in cu_set {
                        for c_v in cv_set {
                            if c_u != c_v {
                                found.insert(Quintuple::new(p_i, p_j, c_u, c_v, &p.id));
                            }
                        }
                    }
                }
            }
            (found, dangling)
        })
        .collect();

    let mut all = Vec::new();
    for (qs, dangling) in per_target {
        summary.dangling_references += dangling;
        all.extend(qs);
    }
    all.sort_by(|a, b| a.key().cmp(&b.key()));
    all.dedup_by(|a, b| a.key() == b.key());
    (all, summary)
}

const IDEA_SECTIONS: [&str; 2] = ["abstract", "introduction"];

/// Picks one evidence sentence per reference side and the target's idea
/// sentences. Returns `None` when either reference lacks a sentence
/// mentioning its concept.
///
/// The evidence sentence for `(paper, concept)` is drawn uniformly from a
/// stream keyed on `(seed, paper, concept)`, so it is the same in every
/// quintuple that shares that paper and concept.
pub fn bind_sentences(
    q: &Quintuple,
    corpus: &CorpusStore,
    index: &CorpusIndex,
    seed: u64,
) -> Option<Quintuple> {
    let pick = |paper: &str, concept: &str| -> Option<BoundSentence> {
        let record = corpus.get(paper)?;
        let candidates = index.sentences_mentioning(paper, concept);
        if candidates.is_empty() {
            return None;
        }
        let mut rng = seeded_rng(seed, &["sentence", paper, concept]);
        let i = candidates[rng.gen_range(0..candidates.len())];
        Some(BoundSentence {
            index: i,
            text: record.sentences[i].clone(),
            section: record.section_of(i).map(str::to_string),
        })
    };
    let sent_i = pick(&q.p_i, &q.c_u)?;
    let sent_j = pick(&q.p_j, &q.c_v)?;
    Some(Quintuple {
        sent_i: Some(sent_i),
        sent_j: Some(sent_j),
        idea_sentences: idea_sentences(q, corpus, index),
        ..q.clone()
    })
}

/// Target sentences from abstract/introduction sections mentioning both
/// concepts, else either concept; without such labelled sentences, the
/// earliest sentence mentioning either concept.
fn idea_sentences(q: &Quintuple, corpus: &CorpusStore, index: &CorpusIndex) -> Vec<String> {
    let Some(target) = corpus.get(&q.p) else {
        return Vec::new();
    };
    let with_u: BTreeSet<usize> = index.sentences_mentioning(&q.p, &q.c_u).into_iter().collect();
    let with_v: BTreeSet<usize> = index.sentences_mentioning(&q.p, &q.c_v).into_iter().collect();
    let either: BTreeSet<usize> = with_u.union(&with_v).copied().collect();

    if target.section_labels.is_some() {
        let labelled = |i: &usize| {
            target
                .section_of(*i)
                .is_some_and(|s| IDEA_SECTIONS.contains(&s.to_lowercase().as_str()))
        };
        let both: Vec<usize> = with_u.intersection(&with_v).copied().filter(labelled).collect();
        let chosen = if both.is_empty() {
            either.iter().copied().filter(labelled).collect()
        } else {
            both
        };
        if !chosen.is_empty() {
            return chosen.iter().map(|&i| target.sentences[i].clone()).collect();
        }
    }
    either
        .first()
        .map(|&i| vec![target.sentences[i].clone()])
        .unwrap_or_default()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BindingSummary {
    pub bound: usize,
    pub dropped: usize,
}

pub fn bind_all(
    qs: &[Quintuple],
    corpus: &CorpusStore,
    index: &CorpusIndex,
    seed: u64,
) -> (Vec<Quintuple>, BindingSummary) {
    let bound: Vec<Quintuple> = qs
        .par_iter()
        .filter_map(|q| bind_sentences(q, corpus, index, seed))
        .collect();
    let summary = BindingSummary {
        bound: bound.len(),
        dropped: qs.len() - bound.len(),
    };
    (bound, summary)
}

/// Heuristic noise filter applied to the two evidence sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterRuleSet {
    /// Case-insensitive substrings.
    pub keyword_blocklist: Vec<String>,
    /// Maximum fraction of numeric tokens.
    pub max_numeric_density: Option<f64>,
    pub min_tokens: Option<usize>,
    pub max_tokens: Option<usize>,
    /// Section labels, compared case-insensitively.
    pub section_blocklist: Vec<String>,
}

impl Default for FilterRuleSet {
    fn default() -> Self {
        Self {
            keyword_blocklist: ["thank", "acknowledg", "funded by", "grant no"]
                .map(String::from)
                .to_vec(),
            max_numeric_density: Some(0.2),
            min_tokens: Some(5),
            max_tokens: Some(120),
            section_blocklist: ["acknowledgments", "acknowledgements", "experiments", "experimental setup"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl FilterRuleSet {
    /// No rules: the filter keeps everything.
    pub fn empty() -> Self {
        Self {
            keyword_blocklist: Vec::new(),
            max_numeric_density: None,
            min_tokens: None,
            max_tokens: None,
            section_blocklist: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), QuintupleError> {
        if let Some(t) = self.max_numeric_density {
            if !(0.0..=1.0).contains(&t) {
                return Err(QuintupleError::Rules(format!(
                    "numeric density threshold {t} outside [0, 1]"
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.min_tokens, self.max_tokens) {
            if lo > hi {
                return Err(QuintupleError::Rules(format!("min_tokens {lo} > max_tokens {hi}")));
            }
        }
        Ok(())
    }

    /// True when the sentence survives every rule.
    pub fn accepts(&self, s: &BoundSentence) -> bool {
        if let Some(section) = &s.section {
            if self
                .section_blocklist
                .iter()
                .any(|b| b.eq_ignore_ascii_case(section))
            {
                return false;
            }
        }
        let lower = s.text.to_lowercase();
        if self
            .keyword_blocklist
            .iter()
            .any(|k| !k.is_empty() && lower.contains(&k.to_lowercase()))
        {
            return false;
        }
        let tokens: Vec<&str> = s.text.split_whitespace().collect();
        if self.min_tokens.is_some_and(|m| tokens.len() < m)
            || self.max_tokens.is_some_and(|m| tokens.len() > m)
        {
            return false;
        }
        if let Some(limit) = self.max_numeric_density {
            if numeric_density(&tokens) > limit {
                return false;
            }
        }
        true
    }
}

/// A token is numeric when, after stripping edge punctuation, it has at
/// least one digit and only digits or `. , % + - /`.
pub fn is_numeric_token(token: &str) -> bool {
    let core = token.trim_matches(|c: char| c.is_ascii_punctuation() && c != '%');
    core.chars().any(|c| c.is_ascii_digit())
        && core
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '%' | '+' | '-' | '/'))
}

fn numeric_density(tokens: &[&str]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    tokens.iter().filter(|t| is_numeric_token(t)).count() as f64 / tokens.len() as f64
}

/// Keeps quintuples whose bound sentences pass `rules`; unbound quintuples
/// are dropped.
pub fn filter_quintuples(qs: Vec<Quintuple>, rules: &FilterRuleSet) -> Vec<Quintuple> {
    qs.into_iter()
        .filter(|q| match (&q.sent_i, &q.sent_j) {
            (Some(a), Some(b)) => rules.accepts(a) && rules.accepts(b),
            _ => false,
        })
        .collect()
}

/// `<HEAD> {c_u} <TAIL> {c_v} <SEP> {sent_i} <SEP> {sent_j}`.
pub fn serialize_seq(q: &Quintuple) -> Result<String, QuintupleError> {
    match (&q.sent_i, &q.sent_j) {
        (Some(a), Some(b)) => Ok(format_seq(&q.c_u, &q.c_v, &a.text, &b.text)),
        _ => Err(q.unbound()),
    }
}

pub fn format_seq(c_u: &str, c_v: &str, sent_i: &str, sent_j: &str) -> String {
    format!("<HEAD> {c_u} <TAIL> {c_v} <SEP> {sent_i} <SEP> {sent_j}")
}

/// Splits a sequence back into `(c_u, c_v, sent_i, sent_j)`. Exact when no
/// part contains a marker.
pub fn parse_seq(seq: &str) -> Result<(String, String, String, String), QuintupleError> {
    let err = || QuintupleError::Parse(seq.to_string());
    let rest = seq.strip_prefix("<HEAD> ").ok_or_else(err)?;
    let (c_u, rest) = rest.split_once(" <TAIL> ").ok_or_else(err)?;
    let (c_v, rest) = rest.split_once(" <SEP> ").ok_or_else(err)?;
    let (a, b) = rest.split_once(" <SEP> ").ok_or_else(err)?;
    Ok((c_u.into(), c_v.into(), a.into(), b.into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuintupleDataset {
    pub train: Vec<Quintuple>,
    pub valid: Vec<Quintuple>,
    pub test: Vec<Quintuple>,
    pub seed: u64,
}

/// Split sizes for `n` items: train and valid are rounded, test takes the rest.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize), QuintupleError> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(QuintupleError::Ratios(ratios));
    }
    let train = ((n as f64) * a).round() as usize;
    let train = train.min(n);
    let valid = (((n as f64) * b).round() as usize).min(n - train);
    Ok((train, valid, n - train - valid))
}

/// Seeded shuffle, then contiguous train/valid/test slices.
pub fn split_dataset(
    qs: &[Quintuple],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<QuintupleDataset, QuintupleError> {
    let (train, valid, _) = split_sizes(qs.len(), ratios)?;
    let order = split_order(qs.len(), seed);
    let pick = |range: std::ops::Range<usize>| order[range].iter().map(|&i| qs[i].clone()).collect();
    Ok(QuintupleDataset {
        train: pick(0..train),
        valid: pick(train..train + valid),
        test: pick(train + valid..qs.len()),
        seed,
    })
}

/// The permutation used by [`split_dataset`].
pub fn split_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, &["split"]));
    order
}

/// Index-only manifest of a split over an exported quintuple list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_manifest(
    n: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitManifest, QuintupleError> {
    let (train, valid, _) = split_sizes(n, ratios)?;
    let order = split_order(n, seed);
    Ok(SplitManifest {
        seed,
        train: order[..train].to_vec(),
        valid: order[train..train + valid].to_vec(),
        test: order[train + valid..].to_vec(),
    })
}
