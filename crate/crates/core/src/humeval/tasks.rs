use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::facts::{AtomicFact, CurationQueue};

/// One generation offered for judging, before blinding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSource {
    pub backend_id: String,
    pub config: String,
    pub generation_key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInput {
    pub instance_id: String,
    pub gold_text: String,
    pub candidates: Vec<CandidateSource>,
}

/// What an annotator sees of a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindCandidate {
    pub blind_label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidTask {
    pub task_id: String,
    pub instance_id: String,
    pub gold_text: String,
    pub facts: Vec<AtomicFact>,
    /// In presentation order; label `a` is shown first.
    pub candidates: Vec<BlindCandidate>,
    /// `presentation_order[i]` is the index into the unblinded candidate list
    /// shown at position `i`.
    pub presentation_order: Vec<usize>,
    pub rng_seed: u64,
}

impl PyramidTask {
    pub fn blind_labels(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.blind_label.as_str())
    }
}

/// Server-side mapping from blind labels back to generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SealedEntry {
    pub task_id: String,
    pub blind_label: String,
    pub backend_id: String,
    pub config: String,
    pub generation_key: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SealedTable {
    pub entries: Vec<SealedEntry>,
}

impl SealedTable {
    pub fn lookup(&self, task_id: &str, blind_label: &str) -> Option<&SealedEntry> {
        self.entries
            .iter()
            .find(|e| e.task_id == task_id && e.blind_label == blind_label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub seed: u64,
    pub tasks: Vec<PyramidTask>,
    pub sealed: SealedTable,
    /// Instances left out, with the reason.
    pub excluded: Vec<(String, String)>,
}

pub fn blind_label(i: usize) -> String {
    let mut n = i;
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// Permutation of `0..n` for the task at `index`: a ChaCha8 stream per task
/// derived from the study seed.
pub fn task_permutation(seed: u64, index: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub fn build_tasks(inputs: &[TaskInput], facts: &CurationQueue, seed: u64) -> TaskSet {
    let mut tasks = Vec::new();
    let mut sealed = SealedTable::default();
    let mut excluded = Vec::new();
    for (index, input) in inputs.iter().enumerate() {
        let curated = facts.curated(&input.instance_id);
        if curated.is_empty() {
            excluded.push((input.instance_id.clone(), "no curated facts".to_string()));
            continue;
        }
        if input.candidates.len() < 2 {
            excluded.push((
                input.instance_id.clone(),
                format!("{} candidate generation(s), need 2", input.candidates.len()),
            ));
            continue;
        }
        let task_id = format!("task-{:03}", tasks.len() + 1);
        let order = task_permutation(seed, index as u64, input.candidates.len());
        let mut candidates = Vec::with_capacity(order.len());
        for (pos, &src) in order.iter().enumerate() {
            let c = &input.candidates[src];
            let label = blind_label(pos);
            sealed.entries.push(SealedEntry {
                task_id: task_id.clone(),
                blind_label: label.clone(),
                backend_id: c.backend_id.clone(),
                config: c.config.clone(),
                generation_key: c.generation_key.clone(),
            });
            candidates.push(BlindCandidate {
                blind_label: label,
                text: c.text.clone(),
            });
        }
        tasks.push(PyramidTask {
            task_id,
            instance_id: input.instance_id.clone(),
            gold_text: input.gold_text.clone(),
            facts: curated,
            candidates,
            presentation_order: order,
            rng_seed: seed,
        });
    }
    TaskSet {
        seed,
        tasks,
        sealed,
        excluded,
    }
}

impl TaskSet {
    pub fn task(&self, task_id: &str) -> Option<&PyramidTask> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn by_id(&self) -> BTreeMap<&str, &PyramidTask> {
        self.tasks.iter().map(|t| (t.task_id.as_str(), t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::humeval::facts::{parse_facts, CurationAction};

    pub(crate) fn inputs(n: usize, k: usize) -> (Vec<TaskInput>, CurationQueue) {
        let mut q = CurationQueue::default();
        let inputs = (0..n)
            .map(|i| {
                let id = format!("inst-{i:02}");
                q.extractions.insert(id.clone(), parse_facts(&id, "f one\nf two\nf three"));
                TaskInput {
                    instance_id: id.clone(),
                    gold_text: format!("gold {i}"),
                    candidates: (0..k)
                        .map(|c| CandidateSource {
                            backend_id: if c % 2 == 0 { "llama" } else { "gpt" }.into(),
                            config: format!("{}+A", 1 + c / 2),
                            generation_key: format!("key-{i}-{c}"),
                            text: format!("output {i} {c}"),
                        })
                        .collect(),
                }
            })
            .collect();
        let ids: Vec<String> = q.pending().iter().map(|f| f.fact_id.clone()).collect();
        for id in ids {
            q.apply(&CurationAction::Accept { fact_id: id }).unwrap();
        }
        (inputs, q)
    }

    #[test]
    fn labels() {
        assert_eq!(blind_label(0), "a");
        assert_eq!(blind_label(3), "d");
        assert_eq!(blind_label(25), "z");
        assert_eq!(blind_label(26), "aa");
    }

    #[test]
    fn thirty_tasks_four_labels() {
        let (inp, q) = inputs(30, 4);
        let set = build_tasks(&inp, &q, 7);
        assert_eq!(set.tasks.len(), 30);
        assert_eq!(set.sealed.entries.len(), 120);
        for t in &set.tasks {
            assert_eq!(t.blind_labels().collect::<Vec<_>>(), ["a", "b", "c", "d"]);
            let mut sorted = t.presentation_order.clone();
            sorted.sort();
            assert_eq!(sorted, [0, 1, 2, 3]);
            for (pos, c) in t.candidates.iter().enumerate() {
                let src = t.presentation_order[pos];
                let entry = set.sealed.lookup(&t.task_id, &c.blind_label).unwrap();
                assert_eq!(entry.generation_key, format!("key-{}-{src}", &t.gold_text[5..]));
            }
        }
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let (inp, q) = inputs(30, 4);
        let a = build_tasks(&inp, &q, 7);
        let b = build_tasks(&inp, &q, 7);
        let c = build_tasks(&inp, &q, 8);
        assert_eq!(a, b);
        let orders = |s: &TaskSet| s.tasks.iter().map(|t| t.presentation_order.clone()).collect::<Vec<_>>();
        assert_ne!(orders(&a), orders(&c));
    }

    #[test]
    fn exclusions_are_reported() {
        let (mut inp, mut q) = inputs(3, 2);
        q.extractions.remove("inst-01");
        inp[2].candidates.truncate(1);
        let set = build_tasks(&inp, &q, 1);
        assert_eq!(set.tasks.len(), 1);
        assert_eq!(set.excluded.len(), 2);
        assert_eq!(set.excluded[0].0, "inst-01");
    }
}
