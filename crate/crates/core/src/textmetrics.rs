//! N-gram overlap, BLEU-4 and ROUGE-L for generated idea text.
//!
//! All metrics share one tokenizer: lowercase, whitespace split, strip
//! punctuation at token edges, drop empty tokens.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus;

pub fn tokens(text: &str) -> Vec<String> {
    corpus::tokenize(text)
        .into_iter()
        .filter(|t| !t.norm.is_empty())
        .map(|t| t.norm)
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = &[String]> {
    tokens.windows(n)
}

/// Percentage of distinct input n-grams that also occur in the output.
/// `None` when the input has fewer than `n` tokens or `n == 0`.
pub fn ngram_overlap(input_text: &str, output_text: &str, n: usize) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let input = tokens(input_text);
    if input.len() < n {
        return None;
    }
    let output = tokens(output_text);
    let present: HashSet<&[String]> = ngrams(&output, n).collect();
    let distinct: HashSet<&[String]> = ngrams(&input, n).collect();
    let hits = distinct.iter().filter(|g| present.contains(*g)).count();
    Some(100.0 * hits as f64 / distinct.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Keys `"1"` to `"5"`.
    #[serde(flatten)]
    pub per_n: BTreeMap<String, Option<f64>>,
}

impl OverlapReport {
    pub fn compute(input_text: &str, output_text: &str) -> Self {
        Self::from_values((1..=5).map(|n| ngram_overlap(input_text, output_text, n)))
    }

    fn from_values(values: impl Iterator<Item = Option<f64>>) -> Self {
        Self {
            per_n: values
                .enumerate()
                .map(|(i, v)| ((i + 1).to_string(), v))
                .collect(),
        }
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.per_n.get(&n.to_string()).copied().flatten()
    }

    /// Per-n mean over the reports where that n is defined.
    pub fn mean(reports: &[OverlapReport]) -> Self {
        Self::from_values((1..=5).map(|n| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.get(n)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        }))
    }
}

const BLEU_ORDER: usize = 4;

fn counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in ngrams(tokens, n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Default, Clone, Copy)]
struct BleuStats {
    matches: [usize; BLEU_ORDER],
    totals: [usize; BLEU_ORDER],
    cand_len: usize,
    ref_len: usize,
}

fn sentence_stats(candidate: &[String], references: &[Vec<String>]) -> BleuStats {
    let mut s = BleuStats {
        cand_len: candidate.len(),
        ..Default::default()
    };
    // Closest reference length; ties go to the shorter one.
    s.ref_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(candidate.len()), r))
        .unwrap_or(0);
    for n in 1..=BLEU_ORDER {
        let cand = counts(candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (g, c) in counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        s.matches[n - 1] = cand
            .iter()
            .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        s.totals[n - 1] = candidate.len().saturating_sub(n - 1);
    }
    s
}

fn bleu_from(stats: &BleuStats) -> f64 {
    if stats.cand_len == 0 || stats.matches[0] == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..BLEU_ORDER {
        let p = if n > 0 && stats.matches[n] == 0 {
            // add-one smoothing for empty higher orders
            1.0 / (stats.totals[n] as f64 + 1.0)
        } else {
            stats.matches[n] as f64 / stats.totals[n] as f64
        };
        log_sum += p.ln() / BLEU_ORDER as f64;
    }
    let bp = if stats.cand_len >= stats.ref_len {
        1.0
    } else {
        (1.0 - stats.ref_len as f64 / stats.cand_len as f64).exp()
    };
    100.0 * bp * log_sum.exp()
}

/// Sentence BLEU-4 against one or more references, on a 0–100 scale.
pub fn bleu(candidate: &str, references: &[&str]) -> f64 {
    corpus_bleu(&[(candidate, references.to_vec())])
}

/// Corpus BLEU-4: statistics are pooled over all segments before the
/// geometric mean and brevity penalty.
pub fn corpus_bleu(segments: &[(&str, Vec<&str>)]) -> f64 {
    let mut total = BleuStats::default();
    for (cand, refs) in segments {
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokens(r)).collect();
        let s = sentence_stats(&tokens(cand), &refs);
        for n in 0..BLEU_ORDER {
            total.matches[n] += s.matches[n];
            total.totals[n] += s.totals[n];
        }
        total.cand_len += s.cand_len;
        total.ref_len += s.ref_len;
    }
    bleu_from(&total)
}

pub const DEFAULT_ROUGE_BETA: f64 = 1.2;

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure with recall weighted by `beta`.
pub fn rouge_l_with_beta(candidate: &str, reference: &str, beta: f64) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    let lcs = lcs_len(&c, &r);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / c.len() as f64;
    let rec = lcs as f64 / r.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * rec / (rec + b2 * p)
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_with_beta(candidate, reference, DEFAULT_ROUGE_BETA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextReport {
    pub overlap: OverlapReport,
    pub bleu: f64,
    pub rouge_l: f64,
}

impl TextReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_cases() {
        let t = "graph models learn structure";
        for n in 1..=4 {
            assert_eq!(ngram_overlap(t, t, n), Some(100.0));
        }
        assert_eq!(ngram_overlap(t, t, 5), None);
        assert_eq!(ngram_overlap("a b c", "d e f", 1), Some(0.0));
        assert_eq!(ngram_overlap("a b c", "b c d", 2), Some(50.0));
        assert_eq!(ngram_overlap("a a a", "a", 1), Some(100.0));
        assert_eq!(ngram_overlap("a b", "a b", 0), None);
    }

    #[test]
    fn overlap_report_json_shape() {
        let r = TextReport {
            overlap: OverlapReport::compute("a b c", "a b c"),
            bleu: 100.0,
            rouge_l: 1.0,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["overlap"]["1"], 100.0);
        assert!(v["overlap"]["4"].is_null());
        assert!(v["overlap"]["5"].is_null());
    }

    #[test]
    fn bleu_hand_computed() {
        // All clipped precisions are 1 (the 4-gram order is empty and
        // smoothed to 1/1); brevity penalty exp(1 - 4/3).
        let got = bleu("the cat sat", &["the cat sat down"]);
        let expected = 100.0 * (1.0f64 - 4.0 / 3.0).exp();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        assert!((bleu("a b c d e", &["a b c d e"]) - 100.0).abs() < 1e-9);
        assert!((bleu("x", &["x"]) - 100.0).abs() < 1e-9);
        assert_eq!(bleu("p q r", &["a b c"]), 0.0);
        assert_eq!(bleu("", &["a b c"]), 0.0);
    }

    #[test]
    fn bleu_smoothing_and_clipping() {
        // cand "a b x y", ref "a b c d": p1 = 2/4, p2 = 1/3, p3 = 1/(2+1), p4 = 1/(1+1).
        let got = bleu("a b x y", &["a b c d"]);
        let expected = 100.0 * (0.5f64 * (1.0 / 3.0) * (1.0 / 3.0) * 0.5).powf(0.25);
        assert!((got - expected).abs() < 1e-9);
        // "the the the" against "the cat": unigram clipped to 1/3, bigram
        // 1/(2+1), trigram 1/(1+1), empty 4-gram order 1/(0+1).
        let got = bleu("the the the", &["the cat"]);
        let expected = 100.0 * ((1.0 / 3.0) * (1.0 / 3.0) * 0.5 * 1.0f64).powf(0.25);
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn bleu_closest_reference_length() {
        // Closest reference has 3 tokens, so no brevity penalty.
        let got = bleu("a b c", &["a b c d e f g", "a b c"]);
        assert!((got - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rouge_cases() {
        assert_eq!(rouge_l("a b c", "a b c"), 1.0);
        assert_eq!(rouge_l("a b", "c d"), 0.0);
        assert_eq!(rouge_l("", ""), 0.0);
        let (p, r, b2) = (0.75, 1.0, 1.44);
        let expected = (1.0 + b2) * p * r / (r + b2 * p);
        assert!((rouge_l("a b c d", "a c d") - expected).abs() < 1e-9);
    }
}
