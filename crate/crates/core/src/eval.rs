//! Link-prediction metrics: adjacency accuracy plus all-edge and new-edge
//! precision, recall and F1.
//!
//! Undefined values are `None`. Precision is undefined when nothing was
//! predicted positive for the edge class; F1 is undefined when precision or
//! recall is undefined or both are zero. Reports render `None` as `null` in
//! JSON and `N/A` in CSV.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ConceptId;
use crate::graph::{ConceptPair, EvolvingGraph, GraphError};
use crate::scorer::PredictionResult;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("concept universes differ; symmetric difference: {0:?}")]
    UniverseMismatch(Vec<ConceptId>),
    #[error("test year {year} must lie in {lo}..={hi}")]
    TestYear { year: i32, lo: i32, hi: i32 },
    #[error("accuracy needs at least two concepts")]
    TooFewConcepts,
    #[error("cannot aggregate an empty metric list")]
    Empty,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub accuracy: f64,
    pub all_precision: Option<f64>,
    pub all_recall: Option<f64>,
    pub all_f1: Option<f64>,
    pub new_precision: Option<f64>,
    pub new_recall: Option<f64>,
    pub new_f1: Option<f64>,
}

const CSV_HEADER: &str = "accuracy,all_precision,all_recall,all_f1,new_precision,new_recall,new_f1";

impl LinkMetrics {
    fn fields(&self) -> [Option<f64>; 7] {
        [
            Some(self.accuracy),
            self.all_precision,
            self.all_recall,
            self.all_f1,
            self.new_precision,
            self.new_recall,
            self.new_f1,
        ]
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    /// Header plus one row per labelled entry; undefined cells read `N/A`.
    pub fn to_csv(rows: &[(&str, LinkMetrics)]) -> String {
        let mut out = format!("name,{CSV_HEADER}\n");
        for (name, m) in rows {
            out.push_str(name);
            for f in m.fields() {
                match f {
                    Some(v) => write!(out, ",{v:.3}").expect("string write"),
                    None => out.push_str(",N/A"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    }
}

/// Compares `predicted` against snapshot `test_year` of `truth`.
///
/// Accuracy runs over all unordered pairs of distinct concepts. New-edge
/// recall is over the truth's new edges at `test_year`; new-edge precision
/// is over predicted edges that were not already present at `test_year - 1`.
pub fn evaluate_prediction(
    truth: &EvolvingGraph,
    predicted: &PredictionResult,
    test_year: i32,
) -> Result<LinkMetrics, EvalError> {
    let pred_universe: BTreeSet<&ConceptId> = predicted.concepts.iter().collect();
    let truth_universe: BTreeSet<&ConceptId> = truth.concepts().iter().collect();
    if pred_universe != truth_universe {
        let diff = pred_universe
            .symmetric_difference(&truth_universe)
            .map(|c| (*c).clone())
            .collect();
        return Err(EvalError::UniverseMismatch(diff));
    }
    if test_year <= truth.t_start() || test_year > truth.t_end() {
        return Err(EvalError::TestYear {
            year: test_year,
            lo: truth.t_start() + 1,
            hi: truth.t_end(),
        });
    }
    let n = truth.concepts().len();
    if n < 2 {
        return Err(EvalError::TooFewConcepts);
    }
    let stray: Vec<ConceptId> = predicted
        .predicted_edges
        .iter()
        .flat_map(|p| [p.lo(), p.hi()])
        .filter(|c| !truth.has_concept(c))
        .map(str::to_string)
        .collect();
    if !stray.is_empty() {
        return Err(EvalError::UniverseMismatch(stray));
    }

    let truth_edges: BTreeSet<&ConceptPair> = truth.edges_at(test_year).collect();
    let pred: BTreeSet<&ConceptPair> = predicted.predicted_edges.iter().collect();
    let tp = pred.intersection(&truth_edges).count();
    let fp = pred.len() - tp;
    let fn_ = truth_edges.len() - tp;
    let pairs = n * (n - 1) / 2;
    let accuracy = (pairs - fp - fn_) as f64 / pairs as f64;

    let all_precision = ratio(tp, pred.len());
    let all_recall = ratio(tp, truth_edges.len());

    let truth_new = truth.new_edges(test_year)?;
    let pred_new: Vec<&&ConceptPair> = pred
        .iter()
        .filter(|p| !truth.connected(p.lo(), p.hi(), test_year - 1))
        .collect();
    let new_tp = pred_new.iter().filter(|p| truth_new.contains(***p)).count();
    let new_precision = ratio(new_tp, pred_new.len());
    let new_recall = ratio(new_tp, truth_new.len());

    Ok(LinkMetrics {
        accuracy,
        all_precision,
        all_recall,
        all_f1: f1(all_precision, all_recall),
        new_precision,
        new_recall,
        new_f1: f1(new_precision, new_recall),
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Unweighted per-field mean that skips undefined entries.
pub fn aggregate_metrics(per_graph: &[LinkMetrics]) -> Result<LinkMetrics, EvalError> {
    if per_graph.is_empty() {
        return Err(EvalError::Empty);
    }
    let field = |i: usize| mean_defined(per_graph.iter().map(|m| m.fields()[i]));
    Ok(LinkMetrics {
        accuracy: field(0).expect("accuracy always defined"),
        all_precision: field(1),
        all_recall: field(2),
        all_f1: field(3),
        new_precision: field(4),
        new_recall: field(5),
        new_f1: field(6),
    })
}
