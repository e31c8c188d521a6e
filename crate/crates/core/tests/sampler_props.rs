mod common;

use std::collections::BTreeSet;

use common::{sample_keys, sampler_discrepancies, RandomGraph};
use concept_forge::sampler::{
    generate_negatives, import_samples, parse_sample, serialize_sample, write_samples, SamplerConfig,
};
use concept_forge::PromptWord;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_match_exhaustive_enumeration(seed in any::<u64>(), k in 2usize..4, d in 1i32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rg = RandomGraph::generate(&mut rng, 20, 5);
        prop_assert_eq!(sampler_discrepancies(&rg, k, d), 0);
    }

    #[test]
    fn capped_negatives_are_a_seeded_subset(seed in any::<u64>(), cap in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rg = RandomGraph::generate(&mut rng, 15, 5);
        let g = rg.to_graph();
        let full = SamplerConfig { k: 2, d: 1, max_negatives_per_anchor: None, seed: 3 };
        let capped = SamplerConfig { max_negatives_per_anchor: Some(cap), ..full.clone() };
        let all: BTreeSet<_> = sample_keys(&generate_negatives(&g, &full).unwrap()).into_iter().collect();
        let some = generate_negatives(&g, &capped).unwrap();
        prop_assert_eq!(&some, &generate_negatives(&g, &capped).unwrap());
        for (u, n) in rg.names.iter().map(|u| (u, some.iter().filter(|s| &s.c_u == u).count())) {
            let owned = all.iter().filter(|s| &s.0 == u).count();
            prop_assert_eq!(n, owned.min(cap));
        }
        prop_assert!(sample_keys(&some).iter().all(|s| all.contains(s)));
    }

    #[test]
    fn template_round_trip(u in "[a-z][a-z ]{0,12}[a-z]", v in "[a-z][a-z0-9-]{0,10}", t in 1900i32..2100, existing in any::<bool>()) {
        let prompt = if existing { PromptWord::Existing } else { PromptWord::Unknown };
        let text = serialize_sample(&u, &v, t, prompt);
        prop_assert_eq!(parse_sample(&text).unwrap(), (u, v, t, prompt));
    }

    #[test]
    fn jsonl_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = RandomGraph::generate(&mut rng, 10, 4).to_graph();
        let samples = concept_forge::sampler::generate_samples(&g, &SamplerConfig { d: 1, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        write_samples(&samples, std::fs::File::create(&path).unwrap()).unwrap();
        prop_assert_eq!(import_samples(&path).unwrap(), samples);
    }
}
