mod common;

use common::{graph_discrepancies, RandomCorpus, RandomGraph};
use concept_forge::graph::{EvolvingGraph, GraphExport};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_graph_matches_oracle_and_grows(seed in any::<u64>(), span in 0i32..6, offset in -2i32..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rc = RandomCorpus::generate(&mut rng, 15, 8, (1998, 2006));
        let t_start = 2000 + offset;
        prop_assert_eq!(graph_discrepancies(&rc, t_start, t_start + span), 0);
    }

    #[test]
    fn export_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = RandomGraph::generate(&mut rng, 12, 4).to_graph();
        let json = g.to_export().to_json();
        let back: GraphExport = serde_json::from_str(&json).unwrap();
        let g2 = EvolvingGraph::from_export(&back).unwrap();
        prop_assert_eq!(g2.to_export().to_json(), json);
    }

    #[test]
    fn k_hop_matches_floyd_warshall(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rg = RandomGraph::generate(&mut rng, 14, 3);
        let g = rg.to_graph();
        for t in rg.t_start..=rg.t_end {
            let dist = common::distances(&rg.adjacency(t));
            for (i, u) in rg.names.iter().enumerate() {
                let got = g.k_hop_neighborhood(t, u, k).unwrap();
                let want: std::collections::BTreeSet<String> = rg
                    .names
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (1..=k).contains(&dist[i][*j]))
                    .map(|(_, n)| n.clone())
                    .collect();
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn truncate_keeps_prefix(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rg = RandomGraph::generate(&mut rng, 10, 5);
        let g = rg.to_graph();
        let cut = g.truncate(rg.t_start + 2).unwrap();
        prop_assert_eq!(cut.concepts(), g.concepts());
        for t in rg.t_start..=rg.t_start + 2 {
            prop_assert_eq!(cut.snapshot(t).unwrap(), g.snapshot(t).unwrap());
        }
    }
}
