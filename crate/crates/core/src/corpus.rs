//! Paper corpus ingestion, dictionary concept matching and the paper↔concept index.
//!
//! Concepts are recognised by leftmost-longest token matching against a
//! [`ConceptVocabulary`]. Surfaces and sentence tokens share one
//! normalisation rule: lowercase, collapse whitespace, strip punctuation at
//! token edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PaperId = String;
pub type ConceptId = String;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate paper id `{0}`")]
    DuplicateId(PaperId),
    #[error("paper `{0}` references itself")]
    SelfReference(PaperId),
    #[error("paper `{id}` has {labels} section labels for {sentences} sentences")]
    LabelMismatch {
        id: PaperId,
        labels: usize,
        sentences: usize,
    },
    #[error("vocabulary line {line}: {message}")]
    Vocabulary { line: usize, message: String },
}

/// Input schemas understood by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CorpusSchema {
    /// One JSON object per line: id, year, title, sentences, references,
    /// citation_count and optional section_labels.
    #[default]
    #[serde(rename = "jsonl-v1")]
    JsonlV1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: PaperId,
    pub year: i32,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub sentences: Vec<String>,
    #[serde(default)]
    pub references: Vec<PaperId>,
    #[serde(default)]
    pub citation_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_labels: Option<Vec<String>>,
}

impl PaperRecord {
    pub fn section_of(&self, sentence_index: usize) -> Option<&str> {
        self.section_labels
            .as_ref()
            .and_then(|labels| labels.get(sentence_index))
            .map(String::as_str)
    }
}

/// Immutable set of papers, addressable by id.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    papers: Vec<PaperRecord>,
    by_id: HashMap<PaperId, usize>,
}

impl CorpusStore {
    /// Builds a store, applying sentence splitting and validating ids.
    pub fn from_records(records: Vec<PaperRecord>) -> Result<Self, CorpusError> {
        let mut store = CorpusStore::default();
        for record in records {
            store.push(record)?;
        }
        Ok(store)
    }

    fn push(&mut self, mut record: PaperRecord) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&record.id) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        if record.references.iter().any(|r| *r == record.id) {
            return Err(CorpusError::SelfReference(record.id));
        }
        if let Some(labels) = &record.section_labels {
            if labels.len() != record.sentences.len() {
                return Err(CorpusError::LabelMismatch {
                    id: record.id,
                    labels: labels.len(),
                    sentences: record.sentences.len(),
                });
            }
        }
        resplit(&mut record);
        self.by_id.insert(record.id.clone(), self.papers.len());
        self.papers.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PaperRecord> {
        self.by_id.get(id).map(|&i| &self.papers[i])
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }
}

fn resplit(record: &mut PaperRecord) {
    let mut sentences = Vec::with_capacity(record.sentences.len());
    let mut labels = record.section_labels.as_ref().map(|_| Vec::new());
    for (i, raw) in record.sentences.iter().enumerate() {
        for piece in split_sentences(raw) {
            if let (Some(out), Some(src)) = (labels.as_mut(), record.section_labels.as_ref()) {
                out.push(src[i].clone());
            }
            sentences.push(piece);
        }
    }
    record.sentences = sentences;
    record.section_labels = labels;
}

/// Splits text after `.`, `?` or `!` when followed by a single space and an
/// uppercase letter or digit. Pieces are trimmed; empty pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for w in 0..chars.len().saturating_sub(2) {
        let (_, c) = chars[w];
        let (space_at, space) = chars[w + 1];
        let (next_at, next) = chars[w + 2];
        if matches!(c, '.' | '?' | '!')
            && space == ' '
            && (next.is_uppercase() || next.is_ascii_digit())
        {
            push_trimmed(&mut out, &text[start..space_at]);
            start = next_at;
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Reads a corpus file. An empty file yields an empty corpus.
pub fn load_corpus(path: &Path, schema: CorpusSchema) -> Result<CorpusStore, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match schema {
        CorpusSchema::JsonlV1 => read_jsonl(BufReader::new(file), path),
    }
}

fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<CorpusStore, CorpusError> {
    let mut store = CorpusStore::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PaperRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "empty paper id".into(),
            });
        }
        store.push(record).map_err(|e| match e {
            CorpusError::DuplicateId(_) | CorpusError::SelfReference(_) => e,
            other => CorpusError::Malformed {
                line: line_no,
                message: other.to_string(),
            },
        })?;
    }
    Ok(store)
}

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
        )
}

/// A whitespace token with edge punctuation removed. `start..end` is the
/// byte range of the kept core in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub norm: String,
    pub start: usize,
    pub end: usize,
}

/// Tokenises text under the shared normalisation rule. Tokens that are pure
/// punctuation are kept with an empty `norm` so that they still break matches.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut offset = 0;
    for word in text.split_whitespace() {
        let word_start = offset + text[offset..].find(word).unwrap_or(0);
        offset = word_start + word.len();
        let core = word.trim_matches(is_edge_punct);
        let lead = word.len() - word.trim_start_matches(is_edge_punct).len();
        let start = word_start + lead.min(word.len());
        tokens.push(Token {
            norm: core.to_lowercase(),
            start,
            end: start + core.len(),
        });
    }
    tokens
}

/// Normalises a surface form: lowercase, single spaces, no edge punctuation.
pub fn normalize(text: &str) -> String {
    tokenize(text)
        .into_iter()
        .filter(|t| !t.norm.is_empty())
        .map(|t| t.norm)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConceptVocabulary {
    entries: BTreeMap<String, ConceptId>,
    max_tokens: usize,
}

impl ConceptVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a surface; rejects surfaces that normalise to nothing and
    /// duplicate surfaces or concept ids.
    pub fn insert(&mut self, surface: &str, concept: &str) -> Result<(), String> {
        let norm = normalize(surface);
        if norm.is_empty() {
            return Err(format!("surface `{surface}` is empty after normalization"));
        }
        if concept.is_empty() {
            return Err("empty concept id".into());
        }
        if self.entries.contains_key(&norm) {
            return Err(format!("duplicate surface `{norm}`"));
        }
        if self.entries.values().any(|c| c == concept) {
            return Err(format!("duplicate concept id `{concept}`"));
        }
        self.max_tokens = self.max_tokens.max(norm.split(' ').count());
        self.entries.insert(norm, concept.to_string());
        Ok(())
    }

    /// Builds a vocabulary where each concept id is its own surface.
    pub fn from_concepts<I, S>(concepts: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::new();
        for c in concepts {
            vocab.insert(c.as_ref(), c.as_ref())?;
        }
        Ok(vocab)
    }

    /// Parses `surface<TAB>concept_id` lines. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let mut vocab = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, concept) = line.split_once('\t').ok_or(CorpusError::Vocabulary {
                line: i + 1,
                message: "expected `surface<TAB>concept_id`".into(),
            })?;
            vocab
                .insert(surface, concept.trim())
                .map_err(|message| CorpusError::Vocabulary { line: i + 1, message })?;
        }
        Ok(vocab)
    }

    pub fn load_tsv(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_tsv(&text)
    }

    pub fn lookup(&self, normalized: &str) -> Option<&ConceptId> {
        self.entries.get(normalized)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(s, c)| (s.as_str(), c.as_str()))
    }

    /// Longest surface length in tokens.
    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptMention {
    pub paper_id: PaperId,
    pub concept_id: ConceptId,
    pub sentence_index: usize,
    /// Byte offsets into the sentence.
    pub char_span: (usize, usize),
}

/// Leftmost-longest dictionary matching over every sentence of a paper.
pub fn match_concepts(paper: &PaperRecord, vocab: &ConceptVocabulary) -> Vec<ConceptMention> {
    if vocab.is_empty() {
        return Vec::new();
    }
    let mut mentions = Vec::new();
    for (sentence_index, sentence) in paper.sentences.iter().enumerate() {
        for (concept, span) in match_sentence(sentence, vocab) {
            mentions.push(ConceptMention {
                paper_id: paper.id.clone(),
                concept_id: concept.clone(),
                sentence_index,
                char_span: span,
            });
        }
    }
    mentions
}

/// Matches one sentence, returning `(concept, byte span)` pairs left to right.
pub fn match_sentence<'v>(
    sentence: &str,
    vocab: &'v ConceptVocabulary,
) -> Vec<(&'v ConceptId, (usize, usize))> {
    let tokens = tokenize(sentence);
    let mut found = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best = None;
        let mut key = String::new();
        for j in i..tokens.len().min(i + vocab.max_tokens()) {
            if tokens[j].norm.is_empty() {
                break;
            }
            if j > i {
                key.push(' ');
            }
            key.push_str(&tokens[j].norm);
            if let Some(concept) = vocab.lookup(&key) {
                best = Some((j, concept));
            }
        }
        match best {
            Some((j, concept)) => {
                found.push((concept, (tokens[i].start, tokens[j].end)));
                i = j + 1;
            }
            None => i += 1,
        }
    }
    found
}

/// Bidirectional paper↔concept maps plus per-paper mentions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusIndex {
    pub concept_to_papers: BTreeMap<ConceptId, BTreeSet<PaperId>>,
    pub paper_to_concepts: BTreeMap<PaperId, BTreeSet<ConceptId>>,
    pub mentions: BTreeMap<PaperId, Vec<ConceptMention>>,
}

impl CorpusIndex {
    pub fn concepts_of(&self, paper: &str) -> Option<&BTreeSet<ConceptId>> {
        self.paper_to_concepts.get(paper)
    }

    pub fn papers_of(&self, concept: &str) -> Option<&BTreeSet<PaperId>> {
        self.concept_to_papers.get(concept)
    }

    pub fn contains(&self, paper: &str, concept: &str) -> bool {
        self.concepts_of(paper).is_some_and(|cs| cs.contains(concept))
    }

    /// Distinct sentence indices of `paper` that mention `concept`, ascending.
    pub fn sentences_mentioning(&self, paper: &str, concept: &str) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .mentions
            .get(paper)
            .into_iter()
            .flatten()
            .filter(|m| m.concept_id == concept)
            .map(|m| m.sentence_index)
            .collect();
        idx.dedup();
        idx
    }
}

pub fn build_index(corpus: &CorpusStore, vocab: &ConceptVocabulary) -> CorpusIndex {
    let per_paper: Vec<Vec<ConceptMention>> = corpus
        .papers()
        .par_iter()
        .map(|p| match_concepts(p, vocab))
        .collect();

    let mut index = CorpusIndex::default();
    for mentions in per_paper.into_iter().filter(|m| !m.is_empty()) {
        let paper = mentions[0].paper_id.clone();
        for m in &mentions {
            index
                .paper_to_concepts
                .entry(paper.clone())
                .or_default()
                .insert(m.concept_id.clone());
            index
                .concept_to_papers
                .entry(m.concept_id.clone())
                .or_default()
                .insert(paper.clone());
        }
        index.mentions.insert(paper, mentions);
    }
    index
}
