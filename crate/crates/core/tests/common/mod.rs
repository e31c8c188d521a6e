//! Random fixtures and brute-force oracles shared by the integration tests.
//! The oracles work on dense matrices and explicit concept sets, never on
//! the library's graph or index types.

#![allow(dead_code)]

pub mod golden;
pub mod http;

use std::collections::{BTreeMap, BTreeSet};

use concept_forge::graph::{ConceptPair, EvolvingGraph};
use concept_forge::sampler::{Label, PromptWord};
use concept_forge::{ConceptVocabulary, CorpusStore, PaperRecord};
use rand::seq::SliceRandom;
use rand::Rng;

/// Single-token concept names that never collide with filler words.
pub const CONCEPT_WORDS: [&str; 12] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "omicron",
];
const FILLER: [&str; 8] = ["we", "study", "the", "method", "and", "results", "show", "gains"];

/// Edge list with birth years, as index pairs into `names`.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub names: Vec<String>,
    pub t_start: i32,
    pub t_end: i32,
    pub births: Vec<(usize, usize, i32)>,
}

impl RandomGraph {
    pub fn generate(rng: &mut impl Rng, max_nodes: usize, years: i32) -> Self {
        let n = rng.gen_range(2..=max_nodes);
        let names: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
        let t_start = 2000;
        let t_end = t_start + years - 1;
        let density = rng.gen_range(0.02..0.3);
        let mut births = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(density) {
                    births.push((i, j, rng.gen_range(t_start..=t_end)));
                }
            }
        }
        Self {
            names,
            t_start,
            t_end,
            births,
        }
    }

    pub fn to_graph(&self) -> EvolvingGraph {
        let mut g = EvolvingGraph::empty(self.names.iter().cloned(), self.t_start, self.t_end).unwrap();
        for &(i, j, y) in &self.births {
            g.add_cooccurrence(ConceptPair::new(self.names[i].as_str(), self.names[j].as_str()).unwrap(), y)
                .unwrap();
        }
        g
    }

    /// Dense cumulative adjacency; years before `t_start` are all zero.
    pub fn adjacency(&self, t: i32) -> Vec<Vec<bool>> {
        let n = self.names.len();
        let mut a = vec![vec![false; n]; n];
        for &(i, j, y) in &self.births {
            if y <= t && t >= self.t_start {
                a[i][j] = true;
                a[j][i] = true;
            }
        }
        a
    }
}

/// All-pairs shortest path lengths (Floyd-Warshall); `usize::MAX` if unreachable.
pub fn distances(a: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = a.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

pub type SampleKey = (String, String, i32, PromptWord, Label);

/// D+ by exhaustive enumeration over pairs and years.
pub fn oracle_positives(g: &RandomGraph) -> BTreeSet<SampleKey> {
    let mut out = BTreeSet::new();
    let n = g.names.len();
    for t in g.t_start..=g.t_end {
        let a = g.adjacency(t);
        let prev = g.adjacency(t - 1);
        for i in 0..n {
            for j in 0..n {
                if g.names[i] < g.names[j] && a[i][j] {
                    let prompt = if prev[i][j] {
                        PromptWord::Existing
                    } else {
                        PromptWord::Unknown
                    };
                    out.insert((g.names[i].clone(), g.names[j].clone(), t, prompt, Label::Related));
                }
            }
        }
    }
    out
}

/// D- by exhaustive enumeration: distance in `1..=k` at `t`, unconnected at `t + d`.
pub fn oracle_negatives(g: &RandomGraph, k: usize, d: i32) -> BTreeSet<SampleKey> {
    let mut out = BTreeSet::new();
    let n = g.names.len();
    for t in g.t_start..=g.t_end - d {
        let dist = distances(&g.adjacency(t));
        let later = g.adjacency(t + d);
        for i in 0..n {
            for j in 0..n {
                if g.names[i] < g.names[j] && (1..=k).contains(&dist[i][j]) && !later[i][j] {
                    out.insert((
                        g.names[i].clone(),
                        g.names[j].clone(),
                        t,
                        PromptWord::Unknown,
                        Label::Unrelated,
                    ));
                }
            }
        }
    }
    out
}

/// A corpus whose concept sets are known by construction.
#[derive(Debug, Clone)]
pub struct RandomCorpus {
    pub concepts: Vec<String>,
    pub papers: Vec<PaperRecord>,
    /// Concepts each paper mentions, by paper position.
    pub mentions: Vec<BTreeSet<usize>>,
}

impl RandomCorpus {
    pub fn generate(rng: &mut impl Rng, max_papers: usize, max_concepts: usize, years: (i32, i32)) -> Self {
        let n_concepts = rng.gen_range(1..=max_concepts.min(CONCEPT_WORDS.len()));
        let concepts: Vec<String> = CONCEPT_WORDS[..n_concepts].iter().map(|s| s.to_string()).collect();
        let n_papers = rng.gen_range(1..=max_papers);
        let ids: Vec<String> = (0..n_papers).map(|i| format!("p{i:02}")).collect();
        let mut papers = Vec::new();
        let mut mentions = Vec::new();
        for id in &ids {
            let count = rng.gen_range(0..=n_concepts.min(4));
            let chosen: BTreeSet<usize> = (0..n_concepts)
                .collect::<Vec<_>>()
                .choose_multiple(rng, count)
                .copied()
                .collect();
            let mut sentences = Vec::new();
            for &c in &chosen {
                let filler: Vec<&str> = (0..rng.gen_range(2..6)).map(|_| *FILLER.choose(rng).unwrap()).collect();
                sentences.push(format!("{} {} {}.", filler.join(" "), concepts[c], FILLER.choose(rng).unwrap()));
            }
            if rng.gen_bool(0.3) {
                sentences.push("nothing to see here.".into());
            }
            sentences.shuffle(rng);
            let mut references: Vec<String> = ids
                .iter()
                .filter(|r| *r != id && rng.gen_bool(0.35))
                .cloned()
                .collect();
            if rng.gen_bool(0.2) {
                references.push("missing".into());
            }
            papers.push(PaperRecord {
                id: id.clone(),
                year: rng.gen_range(years.0..=years.1),
                title: String::new(),
                sentences,
                references,
                citation_count: rng.gen_range(0..5),
                section_labels: None,
            });
            mentions.push(chosen);
        }
        Self {
            concepts,
            papers,
            mentions,
        }
    }

    pub fn store(&self) -> CorpusStore {
        CorpusStore::from_records(self.papers.clone()).unwrap()
    }

    pub fn vocabulary(&self) -> ConceptVocabulary {
        ConceptVocabulary::from_concepts(self.concepts.iter().map(String::as_str)).unwrap()
    }

    /// Edges of snapshot `t` by looping over papers and concept pairs.
    pub fn oracle_edges(&self, t_start: i32, t: i32) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (p, cs) in self.papers.iter().zip(&self.mentions) {
            if p.year < t_start || p.year > t {
                continue;
            }
            for &a in cs {
                for &b in cs {
                    if self.concepts[a] < self.concepts[b] {
                        out.insert((self.concepts[a].clone(), self.concepts[b].clone()));
                    }
                }
            }
        }
        out
    }

    /// Concepts of in-range papers.
    pub fn oracle_nodes(&self, t_start: i32, t_end: i32) -> BTreeSet<String> {
        self.papers
            .iter()
            .zip(&self.mentions)
            .filter(|(p, _)| (t_start..=t_end).contains(&p.year))
            .flat_map(|(_, cs)| cs.iter().map(|&c| self.concepts[c].clone()))
            .collect()
    }

    /// The quintuple set by five nested loops over p, p_i, p_j, c_u, c_v.
    pub fn oracle_quintuples(&self, threshold: u64) -> BTreeSet<(String, String, String, String, String)> {
        let by_id: BTreeMap<&str, usize> = self.papers.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
        let mut out = BTreeSet::new();
        for (pi_, p) in self.papers.iter().enumerate() {
            if p.citation_count < threshold {
                continue;
            }
            for ri in &self.papers {
                for rj in &self.papers {
                    for cu in 0..self.concepts.len() {
                        for cv in 0..self.concepts.len() {
                            let i = by_id[ri.id.as_str()];
                            let j = by_id[rj.id.as_str()];
                            if ri.id != rj.id
                                && p.references.contains(&ri.id)
                                && p.references.contains(&rj.id)
                                && cu != cv
                                && self.mentions[i].contains(&cu)
                                && self.mentions[pi_].contains(&cu)
                                && self.mentions[j].contains(&cv)
                                && self.mentions[pi_].contains(&cv)
                            {
                                out.insert((
                                    ri.id.clone(),
                                    rj.id.clone(),
                                    self.concepts[cu].clone(),
                                    self.concepts[cv].clone(),
                                    p.id.clone(),
                                ));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn sample_keys(samples: &[concept_forge::LinkSample]) -> Vec<SampleKey> {
    samples
        .iter()
        .map(|s| (s.c_u.clone(), s.c_v.clone(), s.t, s.prompt, s.label))
        .collect()
}

/// Symmetric-difference size between the library's D+/D- and the oracle's,
/// plus duplicates and template mismatches.
pub fn sampler_discrepancies(rg: &RandomGraph, k: usize, d: i32) -> usize {
    use concept_forge::sampler::{generate_negatives, generate_positives, SamplerConfig};
    let g = rg.to_graph();
    let cfg = SamplerConfig {
        k,
        d,
        max_negatives_per_anchor: None,
        seed: 0,
    };
    let pos = generate_positives(&g);
    let neg = generate_negatives(&g, &cfg).unwrap();
    let mut bad = 0;
    for (got, want) in [
        (sample_keys(&pos), oracle_positives(rg)),
        (sample_keys(&neg), oracle_negatives(rg, k, d)),
    ] {
        let set: BTreeSet<SampleKey> = got.iter().cloned().collect();
        bad += got.len() - set.len();
        bad += set.symmetric_difference(&want).count();
    }
    bad += pos
        .iter()
        .chain(&neg)
        .filter(|s| s.text != format!("[CLS] {}: in {}, {} is [MASK] to {}.[SEP]", s.prompt, s.t, s.c_u, s.c_v))
        .count();
    bad
}

/// Monotonicity violations plus mismatches against the brute-force edge
/// and node sets.
pub fn graph_discrepancies(rc: &RandomCorpus, t_start: i32, t_end: i32) -> usize {
    let store = rc.store();
    let index = concept_forge::build_index(&store, &rc.vocabulary());
    let g = concept_forge::build_evolving_graph(&index, &store, t_start, t_end).unwrap();
    let mut bad = 0;
    let nodes: BTreeSet<String> = g.concepts().iter().cloned().collect();
    if nodes != rc.oracle_nodes(t_start, t_end) {
        bad += 1;
    }
    for t in t_start..=t_end {
        let edges: BTreeSet<(String, String)> = g
            .edges_at(t)
            .map(|p| (p.lo().to_string(), p.hi().to_string()))
            .collect();
        bad += edges.symmetric_difference(&rc.oracle_edges(t_start, t)).count();
        if t > t_start {
            bad += g.edges_at(t - 1).filter(|p| !g.connected(p.lo(), p.hi(), t)).count();
        }
    }
    bad
}

pub fn quintuple_discrepancies(rc: &RandomCorpus, threshold: u64) -> usize {
    let store = rc.store();
    let index = concept_forge::build_index(&store, &rc.vocabulary());
    let (qs, _) = concept_forge::extract_quintuples(&index, &store, threshold);
    let got: Vec<(String, String, String, String, String)> = qs
        .iter()
        .map(|q| (q.p_i.clone(), q.p_j.clone(), q.c_u.clone(), q.c_v.clone(), q.p.clone()))
        .collect();
    let set: BTreeSet<_> = got.iter().cloned().collect();
    (got.len() - set.len()) + set.symmetric_difference(&rc.oracle_quintuples(threshold)).count()
}
