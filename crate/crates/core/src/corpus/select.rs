use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{CitationInstance, ExamplePool, ExampleSentence};
use crate::error::{Error, Result};
use crate::text::metric_tokens;

/// Scores how similar each candidate is to a query text, in `[-1, 1]`.
pub trait SimilarityProvider: Sync {
    fn name(&self) -> &str;
    fn scores(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>>;
}

/// Jaccard index over lowercased token sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalJaccard;

impl LexicalJaccard {
    pub fn jaccard(a: &str, b: &str) -> f64 {
        let a: HashSet<String> = metric_tokens(a).into_iter().collect();
        let b: HashSet<String> = metric_tokens(b).into_iter().collect();
        let union = a.union(&b).count();
        if union == 0 {
            return 0.0;
        }
        a.intersection(&b).count() as f64 / union as f64
    }
}

impl SimilarityProvider for LexicalJaccard {
    fn name(&self) -> &str {
        "lexical-jaccard"
    }

    fn scores(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        Ok(candidates.iter().map(|c| Self::jaccard(query, c)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProvenance {
    pub provider: String,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedExample {
    pub instance_id: String,
    pub example: ExampleSentence,
    pub score: f64,
    pub provenance: SelectionProvenance,
}

/// Pick the pool sentence for the instance's cited paper that is most similar
/// to the gold reference, excluding sentences written by the instance's own
/// citing paper. Ties go to the smallest `example_id`.
pub fn select_example(
    pool: &ExamplePool,
    instance: &CitationInstance,
    provider: &dyn SimilarityProvider,
    fallback: Option<&dyn SimilarityProvider>,
) -> Result<Option<SelectedExample>> {
    if !instance.is_single_citation() {
        return Err(Error::InvalidInput(format!(
            "{} cites {} papers; example selection needs exactly one",
            instance.instance_id,
            instance.citations.len()
        )));
    }
    let cited = &instance.citations[0].cited.paper_id;
    let eligible: Vec<&ExampleSentence> = pool
        .get(cited)
        .iter()
        .filter(|e| e.citing_paper_id != instance.citing.paper_id)
        .collect();
    if eligible.is_empty() {
        return Ok(None);
    }

    let gold = instance.gold_reference();
    let texts: Vec<&str> = eligible.iter().map(|e| e.sentence.as_str()).collect();
    let (scores, provenance) = match provider.scores(&gold, &texts) {
        Ok(s) => (
            s,
            SelectionProvenance {
                provider: provider.name().to_string(),
                fallback_used: false,
            },
        ),
        Err(primary_err) => match fallback {
            Some(fb) => {
                tracing::warn!("similarity provider {} failed: {primary_err}; using {}", provider.name(), fb.name());
                (
                    fb.scores(&gold, &texts)?,
                    SelectionProvenance {
                        provider: fb.name().to_string(),
                        fallback_used: true,
                    },
                )
            }
            None => return Err(primary_err),
        },
    };
    if scores.len() != eligible.len() {
        return Err(Error::InvalidInput(format!(
            "similarity provider returned {} scores for {} candidates",
            scores.len(),
            eligible.len()
        )));
    }

    let mut best: Option<(f64, &ExampleSentence)> = None;
    for (&score, ex) in scores.iter().zip(&eligible) {
        let score = if score.is_nan() { f64::NEG_INFINITY } else { score };
        best = match best {
            None => Some((score, ex)),
            Some((bs, bex)) => {
                if score > bs || (score == bs && ex.example_id < bex.example_id) {
                    Some((score, ex))
                } else {
                    Some((bs, bex))
                }
            }
        };
    }
    Ok(best.map(|(score, ex)| SelectedExample {
        instance_id: instance.instance_id.clone(),
        example: ex.clone(),
        score,
        provenance,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::instance;

    fn example(id: &str, citing: &str, sentence: &str) -> ExampleSentence {
        ExampleSentence {
            example_id: id.to_string(),
            sentence: sentence.to_string(),
            source_paragraph: sentence.to_string(),
            cited_paper_id: "P".into(),
            citing_paper_id: citing.into(),
            source_instance_id: format!("src-{id}"),
            mark: "<cite>".into(),
        }
    }

    fn pool(entries: Vec<ExampleSentence>) -> ExamplePool {
        let mut p = ExamplePool::default();
        p.by_cited_paper.insert("P".into(), entries);
        p
    }

    struct Fixed(Vec<f64>);
    impl SimilarityProvider for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn scores(&self, _: &str, c: &[&str]) -> Result<Vec<f64>> {
            Ok(self.0[..c.len()].to_vec())
        }
    }

    struct Down;
    impl SimilarityProvider for Down {
        fn name(&self) -> &str {
            "embedding-service"
        }
        fn scores(&self, _: &str, _: &[&str]) -> Result<Vec<f64>> {
            Err(Error::ScorerUnavailable("down".into()))
        }
    }

    fn gold_instance(text: &str) -> CitationInstance {
        let mut inst = instance("i", "C", &["P"]);
        inst.paragraph_markup = text.to_string();
        inst.citations[0].mark = "ZZZ".into();
        inst
    }

    #[test]
    fn jaccard_hand_computed_scores() {
        // gold has ten distinct tokens; candidates share 1, 6 and 3 of them
        // and add nothing, so Jaccard = 1/10, 6/10, 3/10.
        let inst = gold_instance("alpha beta gamma delta epsilon zeta eta theta iota kappa");
        let p = pool(vec![
            example("P#0", "X", "alpha"),
            example("P#1", "X", "alpha beta gamma delta epsilon zeta"),
            example("P#2", "X", "alpha beta gamma"),
        ]);
        let scores = LexicalJaccard
            .scores(&inst.gold_reference(), &["alpha", "alpha beta gamma delta epsilon zeta", "alpha beta gamma"])
            .unwrap();
        assert_eq!(scores, vec![0.1, 0.6, 0.3]);
        let sel = select_example(&p, &inst, &LexicalJaccard, None).unwrap().unwrap();
        assert_eq!(sel.example.example_id, "P#1");
        assert_eq!(sel.provenance.provider, "lexical-jaccard");
    }

    #[test]
    fn identical_sentence_wins() {
        let inst = gold_instance("We extend ZZZ to parse trees quickly.");
        let gold = inst.gold_reference();
        let p = pool(vec![
            example("P#0", "X", "Trees are parsed by other systems."),
            example("P#1", "Y", &gold),
        ]);
        let sel = select_example(&p, &inst, &LexicalJaccard, None).unwrap().unwrap();
        assert_eq!(sel.example.example_id, "P#1");
        assert_eq!(sel.score, 1.0);
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let inst = gold_instance("text ZZZ");
        let p = pool(vec![example("P#2", "X", "a"), example("P#10", "X", "b")]);
        let sel = select_example(&p, &inst, &Fixed(vec![0.5, 0.5]), None).unwrap().unwrap();
        assert_eq!(sel.example.example_id, "P#10");
    }

    #[test]
    fn own_citing_paper_never_selected() {
        let inst = gold_instance("text ZZZ");
        let p = pool(vec![example("P#0", "C", "text [REF#1]"), example("P#1", "X", "other")]);
        let sel = select_example(&p, &inst, &LexicalJaccard, None).unwrap().unwrap();
        assert_eq!(sel.example.example_id, "P#1");
        let only_own = pool(vec![example("P#0", "C", "text")]);
        assert!(select_example(&only_own, &inst, &LexicalJaccard, None).unwrap().is_none());
    }

    #[test]
    fn fallback_recorded() {
        let inst = gold_instance("text ZZZ");
        let p = pool(vec![example("P#0", "X", "text")]);
        assert!(select_example(&p, &inst, &Down, None).is_err());
        let sel = select_example(&p, &inst, &Down, Some(&LexicalJaccard)).unwrap().unwrap();
        assert!(sel.provenance.fallback_used);
        assert_eq!(sel.provenance.provider, "lexical-jaccard");
    }

    #[test]
    fn multi_citation_rejected() {
        let inst = instance("i", "C", &["P", "Q"]);
        assert!(select_example(&ExamplePool::default(), &inst, &LexicalJaccard, None).is_err());
    }
}
