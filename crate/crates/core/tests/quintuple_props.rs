mod common;

use std::collections::BTreeSet;

use common::{quintuple_discrepancies, RandomCorpus};
use concept_forge::quintuple::{
    bind_all, bind_sentences, filter_quintuples, format_seq, parse_seq, split_dataset, split_manifest,
    BoundSentence, FilterRuleSet, Quintuple,
};
use concept_forge::{build_index, ConceptVocabulary, CorpusStore, PaperRecord};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bound_corpus(seed: u64) -> Vec<Quintuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rc = RandomCorpus::generate(&mut rng, 12, 6, (2000, 2005));
    let store = rc.store();
    let index = build_index(&store, &rc.vocabulary());
    let (qs, _) = concept_forge::extract_quintuples(&index, &store, 1);
    bind_all(&qs, &store, &index, seed).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extraction_matches_five_loop_oracle(seed in any::<u64>(), threshold in 0u64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rc = RandomCorpus::generate(&mut rng, 15, 10, (2000, 2005));
        prop_assert_eq!(quintuple_discrepancies(&rc, threshold), 0);
    }

    #[test]
    fn split_partitions_input(n in 0usize..400, seed in any::<u64>(), a in 1u32..8, b in 1u32..8, c in 1u32..8) {
        let total = f64::from(a + b + c);
        let ratios = (f64::from(a) / total, f64::from(b) / total, 1.0 - f64::from(a + b) / total);
        let m = split_manifest(n, ratios, seed).unwrap();
        let mut all: Vec<usize> = m.train.iter().chain(&m.valid).chain(&m.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(m.train.len(), ((n as f64) * ratios.0).round() as usize);
    }

    #[test]
    fn dataset_split_is_disjoint_and_complete(seed in any::<u64>()) {
        let qs = bound_corpus(seed);
        let ds = split_dataset(&qs, (0.8, 0.1, 0.1), seed).unwrap();
        let keys = |v: &[Quintuple]| v.iter().map(|q| q.key()).map(|k| format!("{k:?}")).collect::<BTreeSet<_>>();
        let (tr, va, te) = (keys(&ds.train), keys(&ds.valid), keys(&ds.test));
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        prop_assert_eq!(tr.len() + va.len() + te.len(), qs.len());
    }

    #[test]
    fn stricter_rules_never_keep_more(seed in any::<u64>(), kw in "[a-z]{1,3}", limit in 0.0f64..1.0, lo in 0usize..8) {
        let qs = bound_corpus(seed);
        let base = FilterRuleSet::empty();
        let stricter = FilterRuleSet {
            keyword_blocklist: vec![kw],
            max_numeric_density: Some(limit),
            min_tokens: Some(lo),
            ..FilterRuleSet::empty()
        };
        let loose: BTreeSet<_> = filter_quintuples(qs.clone(), &base).into_iter().collect();
        let strict: BTreeSet<_> = filter_quintuples(qs.clone(), &stricter).into_iter().collect();
        prop_assert_eq!(loose.len(), qs.len());
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn seq_round_trip(cu in "[a-z]{1,8}( [a-z]{1,8})?", cv in "[a-z]{1,8}", a in "[A-Za-z ,.]{1,30}", b in "[A-Za-z ,.]{1,30}") {
        let seq = format_seq(&cu, &cv, &a, &b);
        prop_assert_eq!(parse_seq(&seq).unwrap(), (cu, cv, a, b));
    }
}

#[test]
fn sentence_choice_is_uniform() {
    let vocab = ConceptVocabulary::from_concepts(["alpha", "beta"]).unwrap();
    let paper = |id: &str, sentences: &[&str], refs: &[&str], cites| PaperRecord {
        id: id.into(),
        year: 2000,
        title: String::new(),
        sentences: sentences.iter().map(|s| s.to_string()).collect(),
        references: refs.iter().map(|s| s.to_string()).collect(),
        citation_count: cites,
        section_labels: None,
    };
    let store = CorpusStore::from_records(vec![
        paper("p", &["alpha and beta"], &["pi", "pj"], 3),
        paper("pi", &["first alpha", "second alpha", "third alpha"], &[], 0),
        paper("pj", &["only beta"], &[], 0),
    ])
    .unwrap();
    let index = build_index(&store, &vocab);
    let q = Quintuple::new("pi", "pj", "alpha", "beta", "p");
    let mut counts = [0usize; 3];
    for seed in 0..1000 {
        let b = bind_sentences(&q, &store, &index, seed).unwrap();
        let BoundSentence { index, .. } = b.sent_i.unwrap();
        counts[index] += 1;
        assert_eq!(b.sent_j.unwrap().text, "only beta");
    }
    for c in counts {
        let f = c as f64 / 1000.0;
        assert!((f - 1.0 / 3.0).abs() <= 0.05, "{counts:?}");
    }
}
