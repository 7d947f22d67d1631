use serde::{Deserialize, Serialize};

use crate::text::metric_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Summary-level ROUGE-L with beta = 1, each text taken as one sequence.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeL {
    rouge_l_tokens(&metric_tokens(candidate), &metric_tokens(reference))
}

pub fn rouge_l_tokens<T: PartialEq>(cand: &[T], reference: &[T]) -> RougeL {
    if cand.is_empty() || reference.is_empty() {
        return RougeL {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let l = lcs_len(cand, reference) as f64;
    let precision = l / cand.len() as f64;
    let recall = l / reference.len() as f64;
    let f1 = if l == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeL {
        precision,
        recall,
        f1,
    }
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
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

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prefix_example() {
        let r = rouge_l("the cat", "the cat sat");
        assert_eq!(r.precision, 1.0);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_disjoint_empty() {
        assert_eq!(rouge_l("A b, c.", "a B c").f1, 1.0);
        assert_eq!(rouge_l("x y", "a b").f1, 0.0);
        assert_eq!(rouge_l("", "a b").f1, 0.0);
    }

    proptest! {
        #[test]
        fn swap_exchanges_precision_and_recall(
            a in prop::collection::vec(0u8..5, 0..20),
            b in prop::collection::vec(0u8..5, 0..20),
        ) {
            let x = rouge_l_tokens(&a, &b);
            let y = rouge_l_tokens(&b, &a);
            prop_assert_eq!(x.precision, y.recall);
            prop_assert_eq!(x.recall, y.precision);
            prop_assert!((x.f1 - y.f1).abs() < 1e-12);
        }
    }
}
