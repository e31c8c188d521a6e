//! Evolving concept co-occurrence graph.
//!
//! Snapshots are cumulative: an edge born in year `t` is present in every
//! snapshot from `t` to `t_end`. The graph stores only the birth year of each
//! edge, so the monotone-growth invariant holds by construction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConceptId, CorpusIndex, CorpusStore};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("invalid year range {t_start}..={t_end}")]
    InvalidRange { t_start: i32, t_end: i32 },
    #[error("year {year} outside {t_start}..={t_end}")]
    YearOutOfRange { year: i32, t_start: i32, t_end: i32 },
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptId),
    #[error("self pair on `{0}`")]
    SelfPair(ConceptId),
    #[error("invalid snapshot list: {0}")]
    InvalidSnapshots(String),
}

/// Canonical unordered concept pair, `lo < hi`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptPair {
    lo: ConceptId,
    hi: ConceptId,
}

impl ConceptPair {
    pub fn new(a: impl Into<ConceptId>, b: impl Into<ConceptId>) -> Result<Self, GraphError> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Ok(Self { lo: b, hi: a }),
            std::cmp::Ordering::Equal => Err(GraphError::SelfPair(a)),
        }
    }

    pub fn lo(&self) -> &str {
        &self.lo
    }

    pub fn hi(&self) -> &str {
        &self.hi
    }

    pub fn contains(&self, c: &str) -> bool {
        self.lo == c || self.hi == c
    }
}

impl fmt::Display for ConceptPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} & {}", self.lo, self.hi)
    }
}

impl Serialize for ConceptPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (&self.lo, &self.hi).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConceptPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (a, b) = <(String, String)>::deserialize(d)?;
        ConceptPair::new(a, b).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub year: i32,
    pub edges: BTreeSet<ConceptPair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolvingGraph {
    concepts: BTreeSet<ConceptId>,
    t_start: i32,
    t_end: i32,
    /// Year each edge first appears.
    birth: BTreeMap<ConceptPair, i32>,
    /// concept -> neighbour -> birth year of the connecting edge.
    adjacency: BTreeMap<ConceptId, BTreeMap<ConceptId, i32>>,
}

impl EvolvingGraph {
    /// An edgeless graph over `concepts`.
    pub fn empty(
        concepts: impl IntoIterator<Item = ConceptId>,
        t_start: i32,
        t_end: i32,
    ) -> Result<Self, GraphError> {
        if t_start > t_end {
            return Err(GraphError::InvalidRange { t_start, t_end });
        }
        let concepts: BTreeSet<_> = concepts.into_iter().collect();
        let adjacency = concepts.iter().map(|c| (c.clone(), BTreeMap::new())).collect();
        Ok(Self {
            concepts,
            t_start,
            t_end,
            birth: BTreeMap::new(),
            adjacency,
        })
    }

    /// Records a co-occurrence of `pair` in `year`. Years outside the range
    /// are ignored; an earlier year lowers the stored birth year.
    pub fn add_cooccurrence(&mut self, pair: ConceptPair, year: i32) -> Result<(), GraphError> {
        if year < self.t_start || year > self.t_end {
            return Ok(());
        }
        for c in [pair.lo(), pair.hi()] {
            if !self.concepts.contains(c) {
                return Err(GraphError::UnknownConcept(c.to_string()));
            }
        }
        let birth = self.birth.entry(pair.clone()).or_insert(year);
        *birth = (*birth).min(year);
        let b = *birth;
        self.adjacency
            .get_mut(pair.lo())
            .expect("endpoint checked")
            .insert(pair.hi().to_string(), b);
        self.adjacency
            .get_mut(pair.hi())
            .expect("endpoint checked")
            .insert(pair.lo().to_string(), b);
        Ok(())
    }

    /// Rebuilds a graph from explicit snapshots, checking contiguity,
    /// monotone growth and endpoint membership.
    pub fn from_snapshots(
        concepts: impl IntoIterator<Item = ConceptId>,
        snapshots: &[Snapshot],
    ) -> Result<Self, GraphError> {
        let first = snapshots
            .first()
            .ok_or_else(|| GraphError::InvalidSnapshots("no snapshots".into()))?;
        let last = snapshots.last().expect("non-empty");
        let mut g = Self::empty(concepts, first.year, last.year)?;
        let mut prev: Option<&Snapshot> = None;
        for (i, snap) in snapshots.iter().enumerate() {
            if snap.year != first.year + i as i32 {
                return Err(GraphError::InvalidSnapshots(format!(
                    "snapshot {i} has year {}, expected {}",
                    snap.year,
                    first.year + i as i32
                )));
            }
            if let Some(p) = prev {
                if let Some(lost) = p.edges.difference(&snap.edges).next() {
                    return Err(GraphError::InvalidSnapshots(format!(
                        "edge ({}, {}) disappears in {}",
                        lost.lo(),
                        lost.hi(),
                        snap.year
                    )));
                }
            }
            for e in &snap.edges {
                if !g.birth.contains_key(e) {
                    g.add_cooccurrence(e.clone(), snap.year)?;
                }
            }
            prev = Some(snap);
        }
        Ok(g)
    }

    pub fn t_start(&self) -> i32 {
        self.t_start
    }

    pub fn t_end(&self) -> i32 {
        self.t_end
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.t_start..=self.t_end
    }

    pub fn concepts(&self) -> &BTreeSet<ConceptId> {
        &self.concepts
    }

    pub fn has_concept(&self, c: &str) -> bool {
        self.concepts.contains(c)
    }

    fn check_year(&self, year: i32) -> Result<(), GraphError> {
        if year < self.t_start || year > self.t_end {
            return Err(GraphError::YearOutOfRange {
                year,
                t_start: self.t_start,
                t_end: self.t_end,
            });
        }
        Ok(())
    }

    fn check_concept(&self, c: &str) -> Result<(), GraphError> {
        if self.concepts.contains(c) {
            Ok(())
        } else {
            Err(GraphError::UnknownConcept(c.to_string()))
        }
    }

    /// First year the pair is connected, if ever.
    pub fn birth_year(&self, pair: &ConceptPair) -> Option<i32> {
        self.birth.get(pair).copied()
    }

    /// `A_t(u, v)`. Years before `t_start` are all-zero; years after `t_end`
    /// see the last snapshot.
    pub fn connected(&self, u: &str, v: &str, year: i32) -> bool {
        self.adjacency
            .get(u)
            .and_then(|n| n.get(v))
            .is_some_and(|&b| b <= year && year >= self.t_start)
    }

    pub fn edge_count(&self, year: i32) -> usize {
        self.birth.values().filter(|&&b| b <= year).count()
    }

    /// Edges present in snapshot `year`, in canonical order.
    pub fn edges_at(&self, year: i32) -> impl Iterator<Item = &ConceptPair> {
        self.birth
            .iter()
            .filter(move |(_, &b)| b <= year)
            .map(|(p, _)| p)
    }

    pub fn snapshot(&self, year: i32) -> Result<Snapshot, GraphError> {
        self.check_year(year)?;
        Ok(Snapshot {
            year,
            edges: self.edges_at(year).cloned().collect(),
        })
    }

    pub fn snapshots(&self) -> Vec<Snapshot> {
        self.years()
            .map(|y| self.snapshot(y).expect("year in range"))
            .collect()
    }

    /// Edges present at `year` and absent at `year - 1`.
    pub fn new_edges(&self, year: i32) -> Result<BTreeSet<ConceptPair>, GraphError> {
        if year <= self.t_start || year > self.t_end {
            return Err(GraphError::YearOutOfRange {
                year,
                t_start: self.t_start + 1,
                t_end: self.t_end,
            });
        }
        Ok(self
            .birth
            .iter()
            .filter(|(_, &b)| b == year)
            .map(|(p, _)| p.clone())
            .collect())
    }

    /// Neighbours of `c` in snapshot `year`.
    pub fn neighbors(&self, c: &str, year: i32) -> impl Iterator<Item = &ConceptId> {
        self.adjacency
            .get(c)
            .into_iter()
            .flatten()
            .filter(move |(_, &b)| b <= year)
            .map(|(n, _)| n)
    }

    pub fn degree(&self, c: &str, year: i32) -> usize {
        self.neighbors(c, year).count()
    }

    /// Concepts at shortest-path distance `1..=k` from `c` in snapshot `year`.
    pub fn k_hop_neighborhood(
        &self,
        year: i32,
        c: &str,
        k: usize,
    ) -> Result<BTreeSet<ConceptId>, GraphError> {
        self.check_concept(c)?;
        self.check_year(year)?;
        Ok(self.k_hop_unchecked(year, c, k))
    }

    pub(crate) fn k_hop_unchecked(&self, year: i32, c: &str, k: usize) -> BTreeSet<ConceptId> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        seen.insert(c);
        let mut queue = VecDeque::from([(c, 0usize)]);
        while let Some((node, dist)) = queue.pop_front() {
            if dist == k {
                continue;
            }
            for n in self.neighbors(node, year) {
                if seen.insert(n) {
                    queue.push_back((n, dist + 1));
                }
            }
        }
        seen.remove(c);
        seen.into_iter().map(str::to_string).collect()
    }

    /// The same graph cut off at `t_end` (keeps the concept set).
    pub fn truncate(&self, t_end: i32) -> Result<Self, GraphError> {
        self.check_year(t_end)?;
        let mut g = Self::empty(self.concepts.iter().cloned(), self.t_start, t_end)?;
        for (pair, &b) in &self.birth {
            g.add_cooccurrence(pair.clone(), b)?;
        }
        Ok(g)
    }

    pub fn to_export(&self) -> GraphExport {
        GraphExport {
            t_start: self.t_start,
            t_end: self.t_end,
            concepts: self.concepts.iter().cloned().collect(),
            snapshots: self
                .snapshots()
                .into_iter()
                .map(|s| SnapshotExport {
                    year: s.year,
                    edges: s.edges.into_iter().collect(),
                })
                .collect(),
        }
    }

    pub fn from_export(export: &GraphExport) -> Result<Self, GraphError> {
        let snaps: Vec<Snapshot> = export
            .snapshots
            .iter()
            .map(|s| Snapshot {
                year: s.year,
                edges: s.edges.iter().cloned().collect(),
            })
            .collect();
        let g = Self::from_snapshots(export.concepts.iter().cloned(), &snaps)?;
        if g.t_start != export.t_start || g.t_end != export.t_end {
            return Err(GraphError::InvalidSnapshots(format!(
                "declared range {}..={} does not match snapshots {}..={}",
                export.t_start, export.t_end, g.t_start, g.t_end
            )));
        }
        Ok(g)
    }
}

/// Builds cumulative annual snapshots from the corpus. Papers outside
/// `t_start..=t_end` are ignored; the node set is every concept mentioned by
/// an in-range paper.
pub fn build_evolving_graph(
    index: &CorpusIndex,
    corpus: &CorpusStore,
    t_start: i32,
    t_end: i32,
) -> Result<EvolvingGraph, GraphError> {
    if t_start > t_end {
        return Err(GraphError::InvalidRange { t_start, t_end });
    }
    let in_range: Vec<_> = corpus
        .papers()
        .iter()
        .filter(|p| (t_start..=t_end).contains(&p.year))
        .filter_map(|p| index.concepts_of(&p.id).map(|cs| (p.year, cs)))
        .collect();

    // Earliest year per pair, computed per chunk and merged.
    let births = in_range
        .par_iter()
        .fold(BTreeMap::<ConceptPair, i32>::new, |mut acc, (year, cs)| {
            let cs: Vec<&ConceptId> = cs.iter().collect();
            for (i, a) in cs.iter().enumerate() {
                for b in &cs[i + 1..] {
                    let pair = ConceptPair {
                        lo: (*a).clone(),
                        hi: (*b).clone(),
                    };
                    let e = acc.entry(pair).or_insert(*year);
                    *e = (*e).min(*year);
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (pair, year) in b {
                let e = a.entry(pair).or_insert(year);
                *e = (*e).min(year);
            }
            a
        });

    let concepts = in_range.iter().flat_map(|(_, cs)| cs.iter().cloned());
    let mut g = EvolvingGraph::empty(concepts, t_start, t_end)?;
    for (pair, year) in births {
        g.add_cooccurrence(pair, year)?;
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotExport {
    pub year: i32,
    pub edges: Vec<ConceptPair>,
}

/// JSON export of an evolving graph. Edges are canonical and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExport {
    pub t_start: i32,
    pub t_end: i32,
    pub concepts: Vec<ConceptId>,
    pub snapshots: Vec<SnapshotExport>,
}

impl GraphExport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("export serializes");
        s.push('\n');
        s
    }
}
