use std::collections::BTreeMap;

use citegen_core::corpus::{CitationInstance, CitedRef, ExampleSentence, PaperRecord};
use citegen_core::intents::{Intent, IntentKind, IntentSource};
use citegen_core::promptgen::{
    enumerate_run_matrix, render_prompt, ComponentSet, IntentChoice, TemplateSet,
};
use citegen_testkit::golden::{full_config_prompts, CITED, CITING, EXAMPLE, INTENT};

fn paper(id: &str, abstract_text: &str) -> PaperRecord {
    PaperRecord {
        paper_id: id.into(),
        title: id.into(),
        abstract_text: abstract_text.into(),
        year: None,
        venue_metadata: BTreeMap::new(),
    }
}

fn instance() -> CitationInstance {
    let mark = "<cite>Doe (2020)</cite>".to_string();
    CitationInstance {
        instance_id: "golden".into(),
        citing: paper("citing", CITING),
        paragraph_text: "Doe (2020) did it.".into(),
        paragraph_markup: format!("{mark} did it."),
        citations: vec![CitedRef { cited: paper("cited", CITED), mark, position: 0 }],
        section_title: "Related Work".into(),
        categorical_intent: None,
    }
}

fn example() -> ExampleSentence {
    ExampleSentence {
        example_id: "cited#0".into(),
        sentence: EXAMPLE.into(),
        source_paragraph: EXAMPLE.into(),
        cited_paper_id: "cited".into(),
        citing_paper_id: "other".into(),
        source_instance_id: "other-1".into(),
        mark: "<cite>Doe (2020)</cite>".into(),
    }
}

#[test]
fn full_configs_match_reference_bytes() {
    let set = TemplateSet::builtin();
    let intent = Intent::new("golden", IntentKind::FreeForm, INTENT, IntentSource::Provided);
    for (id, system, user) in full_config_prompts() {
        let cfg = format!("{id}+A+IF+E").parse().unwrap();
        let p = render_prompt(&set, &cfg, &instance(), Some(&intent), Some(&example())).unwrap();
        assert_eq!(p.system_text, system, "template {id} system");
        assert_eq!(p.user_text, user, "template {id} user");
    }
}

#[test]
fn matrix_components_are_biconditional() {
    let set = TemplateSet::builtin();
    let cfgs = enumerate_run_matrix(&[1, 2, 3, 4, 5, 6], &ComponentSet::study_sets()).unwrap();
    assert_eq!(cfgs.len(), 36);
    for cfg in cfgs {
        let kind = match cfg.intent {
            IntentChoice::Categorical => IntentKind::Categorical,
            _ => IntentKind::FreeForm,
        };
        let intent = Intent::new("golden", kind, INTENT, IntentSource::Provided);
        let with_intent = (cfg.intent != IntentChoice::None).then_some(&intent);
        let ex = example();
        let p = render_prompt(&set, &cfg, &instance(), with_intent, cfg.use_example.then_some(&ex))
            .unwrap();
        let text = format!("{}\n{}", p.system_text, p.user_text);
        assert_eq!(text.contains(CITING), cfg.use_abstracts, "{cfg}");
        assert_eq!(text.contains(CITED), cfg.use_abstracts, "{cfg}");
        assert_eq!(text.contains(INTENT), cfg.intent != IntentChoice::None, "{cfg}");
        assert_eq!(text.contains(EXAMPLE), cfg.use_example, "{cfg}");
        assert!(text.contains("[REF#1]"), "{cfg}");
    }
}
