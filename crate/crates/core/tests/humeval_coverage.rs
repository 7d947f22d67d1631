use std::collections::BTreeMap;

use citegen_core::humeval::{
    build_tasks, coverage, parse_facts, CandidateSource, CoverageGrid, CurationAction,
    CurationQueue, JudgmentStore, TaskInput, TaskSet,
};
use proptest::prelude::*;

fn study(n_tasks: usize, facts_per: &[usize], seed: u64) -> TaskSet {
    let mut q = CurationQueue::default();
    let inputs: Vec<TaskInput> = (0..n_tasks)
        .map(|i| {
            let id = format!("inst-{i:02}");
            let k = facts_per[i % facts_per.len()];
            let raw: Vec<String> = (0..k).map(|f| format!("fact {i} {f}")).collect();
            q.extractions.insert(id.clone(), parse_facts(&id, &raw.join("\n")));
            TaskInput {
                instance_id: id,
                gold_text: String::new(),
                candidates: ["6+A", "6+A+IF+E"]
                    .iter()
                    .flat_map(|cfg| ["llama", "gpt"].map(|b| (b, *cfg)))
                    .map(|(b, cfg)| CandidateSource {
                        backend_id: b.into(),
                        config: cfg.into(),
                        generation_key: format!("{b}/{cfg}/{i}"),
                        text: format!("text {i}"),
                    })
                    .collect(),
            }
        })
        .collect();
    let ids: Vec<String> = q.pending().iter().map(|f| f.fact_id.clone()).collect();
    for id in ids {
        q.apply(&CurationAction::Accept { fact_id: id }).unwrap();
    }
    build_tasks(&inputs, &q, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unblinding_conserves_totals(
        seed in any::<u64>(),
        facts_per in prop::collection::vec(1usize..6, 1..5),
        bits in prop::collection::vec(any::<bool>(), 30 * 4 * 6 * 2),
        two_annotators in any::<bool>(),
    ) {
        let set = study(30, &facts_per, seed);
        prop_assert_eq!(set.tasks.len(), 30);
        let mut store = JudgmentStore::in_memory();
        let mut bit = bits.iter().cycle();
        let annotators: &[&str] = if two_annotators { &["a1", "a2"] } else { &["a1"] };
        // blinded total: candidate coverage computed from grids alone
        let mut blinded = 0.0;
        for t in &set.tasks {
            let mut per_label: BTreeMap<String, f64> = BTreeMap::new();
            for ann in annotators {
                let grid: CoverageGrid = t
                    .candidates
                    .iter()
                    .map(|c| {
                        let row: BTreeMap<String, bool> =
                            t.facts.iter().map(|f| (f.fact_id.clone(), *bit.next().unwrap())).collect();
                        let r = row.values().filter(|v| **v).count() as f64 / row.len() as f64;
                        *per_label.entry(c.blind_label.clone()).or_default() += r / annotators.len() as f64;
                        (c.blind_label.clone(), row)
                    })
                    .collect();
                store.submit(t, ann, grid, "t".into()).unwrap();
            }
            blinded += per_label.values().sum::<f64>();
        }
        let rep = coverage(&set, &store.latest(), false).unwrap();
        prop_assert_eq!(rep.candidates.len(), 120);
        prop_assert_eq!(rep.rows.len(), 4);
        let unblinded: f64 = rep.rows.iter().map(|r| r.mean * r.n as f64).sum();
        prop_assert!((blinded - unblinded).abs() < 1e-9);
        for r in &rep.rows {
            prop_assert!((0.0..=1.0).contains(&r.mean));
            prop_assert_eq!(r.n, 30);
        }
    }
}

#[test]
fn all_covered_gives_one() {
    let set = study(30, &[3], 11);
    let mut store = JudgmentStore::in_memory();
    for t in &set.tasks {
        let grid = t
            .candidates
            .iter()
            .map(|c| (c.blind_label.clone(), t.facts.iter().map(|f| (f.fact_id.clone(), true)).collect()))
            .collect();
        store.submit(t, "a1", grid, "t".into()).unwrap();
    }
    let rep = coverage(&set, &store.latest(), false).unwrap();
    assert!(rep.rows.iter().all(|r| r.mean == 1.0));
}
