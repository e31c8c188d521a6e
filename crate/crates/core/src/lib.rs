//! Concept co-occurrence idea discovery toolkit.
//!
//! The pipeline ingests a paper corpus, recognises vocabulary concepts,
//! builds an evolving concept co-occurrence graph, turns it into prompt-based
//! link-prediction samples, extracts co-occurrence citation quintuples,
//! scores candidate connections through a pluggable [`scorer::Predictor`] and
//! evaluates predictions and generated text.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod graph;
pub mod pipeline;
pub mod quintuple;
pub mod sampler;
pub mod scorer;
pub mod synthetic;
pub mod textmetrics;

pub use corpus::{
    build_index, load_corpus, match_concepts, ConceptId, ConceptMention, ConceptVocabulary,
    CorpusIndex, CorpusSchema, CorpusStore, PaperId, PaperRecord,
};
pub use eval::{aggregate_metrics, evaluate_prediction, LinkMetrics};
pub use graph::{build_evolving_graph, ConceptPair, EvolvingGraph, GraphExport, Snapshot};
pub use quintuple::{
    bind_sentences, extract_quintuples, filter_quintuples, serialize_seq, split_dataset,
    FilterRuleSet, Quintuple, QuintupleDataset,
};
pub use sampler::{
    generate_negatives, generate_positives, prompt_of, serialize_sample, Label, LinkSample,
    PromptWord, SamplerConfig,
};
pub use scorer::{heuristic_score, predict_snapshot, PairLogits, PredictionResult, Predictor};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for a named sub-stream of `seed`. Streams depend only on the seed and
/// the labels, never on scheduling.
pub(crate) fn seeded_rng(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    // FNV-1a over the labels, with a separator byte between them.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for label in labels {
        for b in label.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}
