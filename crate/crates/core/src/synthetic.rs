//! Seeded synthetic corpora with triangle-closing concept dynamics.
//!
//! Concepts are split into communities. Each paper mentions an anchor
//! concept and a partner: usually a concept two hops away in the current
//! co-occurrence graph (closing a triangle), otherwise an existing neighbour
//! or a random concept from the anchor's community; rarely a concept from
//! another community. Citation counts are the in-corpus citation in-degree.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PaperRecord;
use crate::seeded_rng;

const NAMES: [&str; 40] = [
    "graph neural network",
    "link prediction",
    "node embedding",
    "random walk",
    "spectral clustering",
    "knowledge graph",
    "masked language model",
    "text summarization",
    "contrastive learning",
    "machine translation",
    "named entity recognition",
    "topic model",
    "convolution",
    "image segmentation",
    "object detection",
    "data augmentation",
    "attention mechanism",
    "transfer learning",
    "reinforcement learning",
    "policy gradient",
    "reward shaping",
    "multi agent system",
    "monte carlo tree search",
    "imitation learning",
    "protein folding",
    "gene expression",
    "drug discovery",
    "molecular dynamics",
    "single cell sequencing",
    "variational autoencoder",
    "climate model",
    "remote sensing",
    "land use",
    "soil moisture",
    "precipitation forecast",
    "sea surface temperature",
    "income inequality",
    "labor market",
    "monetary policy",
    "trade network",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_concepts: usize,
    pub n_communities: usize,
    pub n_papers: usize,
    pub t_start: i32,
    pub t_end: i32,
    /// Probability of pairing the anchor with a two-hop concept.
    pub close_prob: f64,
    /// Probability of re-mentioning an existing neighbour.
    pub repeat_prob: f64,
    /// Probability of pairing across communities.
    pub bridge_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_concepts: 30,
            n_communities: 5,
            n_papers: 200,
            t_start: 2000,
            t_end: 2010,
            close_prob: 0.3,
            repeat_prob: 0.5,
            bridge_prob: 0.03,
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub concepts: Vec<String>,
    pub papers: Vec<PaperRecord>,
}

impl SyntheticCorpus {
    pub fn vocabulary_tsv(&self) -> String {
        self.concepts.iter().map(|c| format!("{c}\t{c}\n")).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.papers {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}

pub fn concept_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match NAMES.get(i) {
            Some(name) => name.to_string(),
            None => format!("concept {i}"),
        })
        .collect()
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = seeded_rng(cfg.seed, &["synthetic"]);
    let concepts = concept_names(cfg.n_concepts);
    let n = concepts.len();
    let groups = cfg.n_communities.clamp(1, n.max(1));
    let community = |c: usize| c % groups;

    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let years = (cfg.t_end - cfg.t_start + 1).max(1) as usize;
    let mut papers: Vec<(PaperRecord, Vec<usize>)> = Vec::with_capacity(cfg.n_papers);

    for idx in 0..cfg.n_papers {
        if n < 2 {
            break;
        }
        let year = cfg.t_start + (idx * years / cfg.n_papers.max(1)) as i32;
        let a = rng.gen_range(0..n);
        let same: Vec<usize> = (0..n).filter(|&c| c != a && community(c) == community(a)).collect();
        let two_hop: Vec<usize> = adjacency[a]
            .iter()
            .flat_map(|&m| adjacency[m].iter().copied())
            .filter(|&c| c != a && !adjacency[a].contains(&c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let neighbours: Vec<usize> = adjacency[a].iter().copied().collect();

        let roll: f64 = rng.gen();
        let b = if roll < cfg.bridge_prob {
            let others: Vec<usize> = (0..n).filter(|&c| community(c) != community(a)).collect();
            others.choose(&mut rng).copied()
        } else if roll < cfg.bridge_prob + cfg.close_prob && !two_hop.is_empty() {
            two_hop.choose(&mut rng).copied()
        } else if roll < cfg.bridge_prob + cfg.close_prob + cfg.repeat_prob && !neighbours.is_empty() {
            neighbours.choose(&mut rng).copied()
        } else {
            same.choose(&mut rng).copied()
        };
        let Some(b) = b.filter(|&b| b != a) else {
            continue;
        };

        let mut mentioned = vec![a, b];
        let common: Vec<usize> = adjacency[a].intersection(&adjacency[b]).copied().collect();
        if rng.gen_bool(0.3) {
            if let Some(&c) = common.choose(&mut rng) {
                mentioned.push(c);
            }
        }
        for (i, &x) in mentioned.iter().enumerate() {
            for &y in &mentioned[i + 1..] {
                if edges.insert(key(x, y)) {
                    adjacency[x].insert(y);
                    adjacency[y].insert(x);
                }
            }
        }

        let (sentences, labels) = sentences_for(&concepts, &mentioned, &mut rng);
        let record = PaperRecord {
            id: format!("p{idx:04}"),
            year,
            title: format!("On {} and {}", concepts[a], concepts[b]),
            sentences,
            references: Vec::new(),
            citation_count: 0,
            section_labels: Some(labels),
        };
        papers.push((record, mentioned));
    }

    // Cite earlier papers that share a concept, plus the odd external id.
    let mut by_concept: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut cited: Vec<u64> = vec![0; papers.len()];
    for i in 0..papers.len() {
        let mut pool: BTreeSet<usize> = BTreeSet::new();
        for c in &papers[i].1 {
            pool.extend(by_concept.get(c).into_iter().flatten().copied());
        }
        let pool: Vec<usize> = pool.into_iter().collect();
        let k = rng.gen_range(0..=4usize).min(pool.len());
        let mut refs: Vec<usize> = pool.choose_multiple(&mut rng, k).copied().collect();
        if i > 0 && rng.gen_bool(0.2) {
            refs.push(rng.gen_range(0..i));
        }
        refs.sort_unstable();
        refs.dedup();
        for &r in &refs {
            cited[r] += 1;
        }
        let mut ids: Vec<String> = refs.iter().map(|&r| papers[r].0.id.clone()).collect();
        if rng.gen_bool(0.1) {
            ids.push(format!("ext{:04}", rng.gen_range(0..10_000)));
        }
        papers[i].0.references = ids;
        for &c in &papers[i].1 {
            by_concept.entry(c).or_default().push(i);
        }
    }
    let papers = papers
        .into_iter()
        .zip(cited)
        .map(|((mut p, _), c)| {
            p.citation_count = c;
            p
        })
        .collect();
    SyntheticCorpus { concepts, papers }
}

fn sentences_for(
    names: &[String],
    mentioned: &[usize],
    rng: &mut impl Rng,
) -> (Vec<String>, Vec<String>) {
    let a = &names[mentioned[0]];
    let b = &names[mentioned[1]];
    let mut s = vec![
        (format!("We study how {a} can be combined with {b} for better results."), "abstract"),
        (format!("Our analysis shows that {a} captures structure that earlier methods miss."), "abstract"),
        (format!("Prior work on {b} motivates a careful treatment of the problem."), "introduction"),
        (format!("In this paper we describe a framework built around {b} and discuss its limits."), "introduction"),
    ];
    if let Some(&c) = mentioned.get(2) {
        s.push((
            format!("The method also relies on {} as a supporting component.", names[c]),
            "body",
        ));
    }
    if rng.gen_bool(0.3) {
        s.push((
            format!("Scores were 0.{} 12 34 and 56 on the {a} benchmark.", rng.gen_range(10..99)),
            "experiments",
        ));
    }
    if rng.gen_bool(0.3) {
        s.push(("We thank the anonymous reviewers for their helpful comments.".into(), "acknowledgments"));
    }
    s.into_iter().map(|(t, l)| (t, l.to_string())).unzip()
}
