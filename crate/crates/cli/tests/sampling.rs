use std::collections::BTreeSet;

use citegen_cli::commands::humeval::sample_instances;
use proptest::prelude::*;

proptest! {
    #[test]
    fn sample_is_a_seeded_ordered_subset(n_ids in 0usize..60, n in 0usize..80, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n_ids).map(|i| format!("inst-{i:03}")).collect();
        let got = sample_instances(&ids, n, seed);
        prop_assert_eq!(got.len(), n.min(n_ids));
        prop_assert_eq!(got.iter().collect::<BTreeSet<_>>().len(), got.len());
        // index order is kept
        let pos: Vec<usize> = got.iter().map(|g| ids.iter().position(|i| i == g).unwrap()).collect();
        prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(sample_instances(&ids, n, seed), got);
    }
}
