//! Prompt rendering from instruction templates and input components.

mod config;
mod template;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    default_run_matrix, enumerate_run_matrix, ComponentSet, IntentChoice, PromptConfig,
    TEMPLATE_COUNT,
};
pub use template::{
    Cond, Part, RenderedSegment, Segment, SlotValues, Template, TemplateSet, TemplateStyle, Var,
};

use crate::corpus::{CitationInstance, ExampleSentence, TARGET_MARK};
use crate::error::{Error, Result};
use crate::intents::{Intent, IntentKind};
use crate::text::word_count;

/// Row label used for the concatenated-abstracts baseline.
pub const BASELINE_LABEL: &str = "Abs. Baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system_text: String,
    pub user_text: String,
    pub config: PromptConfig,
    pub instance_id: String,
    /// Whitespace token count of system and user text.
    pub token_estimate: usize,
}

/// On-disk form under `prompts/<config>/<instance_id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptFile {
    pub system: String,
    pub user: String,
}

impl RenderedPrompt {
    pub fn to_file(&self) -> PromptFile {
        PromptFile {
            system: self.system_text.clone(),
            user: self.user_text.clone(),
        }
    }

    pub fn export_path(&self, root: &Path) -> PathBuf {
        root.join(self.config.to_string())
            .join(format!("{}.json", safe_file_stem(&self.instance_id)))
    }
}

pub fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Render the prompt for one configuration and instance. `intent` is required
/// when the configuration uses one (and must be of the matching kind);
/// `example` is required when it uses an example sentence.
pub fn render_prompt(
    templates: &TemplateSet,
    config: &PromptConfig,
    instance: &CitationInstance,
    intent: Option<&Intent>,
    example: Option<&ExampleSentence>,
) -> Result<RenderedPrompt> {
    let template = templates.get(config.template_id)?;
    let missing = |component: &'static str| Error::MissingComponent {
        instance_id: instance.instance_id.clone(),
        component,
    };
    if !instance.is_single_citation() {
        return Err(Error::InvalidInput(format!(
            "{} cites {} papers; prompts are rendered for single-citation instances",
            instance.instance_id,
            instance.citations.len()
        )));
    }
    let cited = &instance.citations[0].cited;

    if config.use_abstracts {
        if instance.citing.abstract_text.trim().is_empty() {
            return Err(missing("citing abstract"));
        }
        if cited.abstract_text.trim().is_empty() {
            return Err(missing("cited abstract"));
        }
    }
    let intent_text = match config.intent {
        IntentChoice::None => "",
        choice => {
            let wanted = match choice {
                IntentChoice::Categorical => IntentKind::Categorical,
                _ => IntentKind::FreeForm,
            };
            let intent = intent
                .filter(|i| i.kind == wanted)
                .ok_or_else(|| missing(wanted.label()))?;
            if intent.text.trim().is_empty() {
                return Err(missing(wanted.label()));
            }
            intent.text.as_str()
        }
    };
    let example_text = if config.use_example {
        let ex = example.ok_or_else(|| missing("example sentence"))?;
        if ex.sentence.trim().is_empty() {
            return Err(missing("example sentence"));
        }
        ex.sentence.as_str()
    } else {
        ""
    };

    let slots = SlotValues {
        citing_abstract: &instance.citing.abstract_text,
        cited_abstract: &cited.abstract_text,
        intent: intent_text,
        example: example_text,
    };
    let (system_text, user_text) = template.render(config, &slots);
    if !system_text.contains(TARGET_MARK) && !user_text.contains(TARGET_MARK) {
        return Err(Error::Template(format!(
            "template {} never asks for {TARGET_MARK} under {config}",
            config.template_id
        )));
    }
    let token_estimate = word_count(&system_text) + word_count(&user_text);
    Ok(RenderedPrompt {
        system_text,
        user_text,
        config: *config,
        instance_id: instance.instance_id.clone(),
        token_estimate,
    })
}

/// Cited abstract followed by citing abstract; stands in for a generation in
/// the baseline row.
pub fn baseline_text(instance: &CitationInstance) -> Result<String> {
    let cited = instance
        .cited()
        .map(|c| c.abstract_text.trim())
        .unwrap_or_default();
    let citing = instance.citing.abstract_text.trim();
    if cited.is_empty() {
        return Err(Error::MissingComponent {
            instance_id: instance.instance_id.clone(),
            component: "cited abstract",
        });
    }
    if citing.is_empty() {
        return Err(Error::MissingComponent {
            instance_id: instance.instance_id.clone(),
            component: "citing abstract",
        });
    }
    Ok(format!("{cited} {citing}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::instance;
    use crate::intents::IntentSource;

    fn intent(kind: IntentKind, text: &str) -> Intent {
        Intent::new("i", kind, text, IntentSource::Provided)
    }

    fn example() -> ExampleSentence {
        ExampleSentence {
            example_id: "P#0".into(),
            sentence: "[REF#1] proposed a joint decoder.".into(),
            source_paragraph: String::new(),
            cited_paper_id: "P".into(),
            citing_paper_id: "X".into(),
            source_instance_id: "s".into(),
            mark: "m".into(),
        }
    }

    #[test]
    fn template_one_full_config() {
        let set = TemplateSet::builtin();
        let inst = instance("i", "C", &["P"]);
        let ff = intent(IntentKind::FreeForm, "To compare the methods to prior work");
        let p = render_prompt(&set, &"1+A+IF+E".parse().unwrap(), &inst, Some(&ff), Some(&example()))
            .unwrap();
        assert!(p.system_text.starts_with("Your aim is to generate an exactly single paragraph"));
        assert!(p.user_text.contains("Intent: To compare the methods to prior work"));
        assert!(p.user_text.ends_with("Example: [REF#1] proposed a joint decoder."));
    }

    #[test]
    fn template_two_has_empty_system() {
        let set = TemplateSet::builtin();
        let inst = instance("i", "C", &["P"]);
        let p = render_prompt(&set, &"2+A".parse().unwrap(), &inst, None, None).unwrap();
        assert!(p.system_text.is_empty());
        assert!(p.user_text.contains("Citing abstract."));
        assert!(p.user_text.contains("[REF#1]"));
    }

    #[test]
    fn missing_components_rejected() {
        let set = TemplateSet::builtin();
        let inst = instance("i", "C", &["P"]);
        let cfg: PromptConfig = "1+A+IF+E".parse().unwrap();
        let ic = intent(IntentKind::Categorical, "Background");
        assert!(matches!(
            render_prompt(&set, &cfg, &inst, Some(&ic), Some(&example())),
            Err(Error::MissingComponent { .. })
        ));
        let ff = intent(IntentKind::FreeForm, "To x");
        assert!(render_prompt(&set, &cfg, &inst, Some(&ff), None).is_err());
        let mut no_abs = inst.clone();
        no_abs.citing.abstract_text.clear();
        assert!(render_prompt(&set, &"1+A".parse().unwrap(), &no_abs, None, None).is_err());
    }

    #[test]
    fn deterministic_bytes() {
        let set = TemplateSet::builtin();
        let inst = instance("i", "C", &["P"]);
        let cfg: PromptConfig = "4+A+E".parse().unwrap();
        let a = render_prompt(&set, &cfg, &inst, None, Some(&example())).unwrap();
        let b = render_prompt(&set, &cfg, &inst, None, Some(&example())).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn baseline_concatenates() {
        let inst = instance("i", "C", &["P"]);
        let b = baseline_text(&inst).unwrap();
        assert!(b.contains("Cited abstract.") && b.contains("Citing abstract."));
        assert!(b.find("Cited").unwrap() < b.find("Citing").unwrap());
        let mut empty = inst.clone();
        empty.citing.abstract_text = "  ".into();
        assert!(baseline_text(&empty).is_err());
    }

    #[test]
    fn export_path_layout() {
        let set = TemplateSet::builtin();
        let inst = instance("acl/P19-1", "C", &["P"]);
        let p = render_prompt(&set, &"3+A".parse().unwrap(), &inst, None, None).unwrap();
        assert_eq!(
            p.export_path(Path::new("prompts")),
            PathBuf::from("prompts/3+A/acl_P19-1.json")
        );
    }
}
