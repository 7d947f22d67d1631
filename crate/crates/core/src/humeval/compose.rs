use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MeasureInput;
use crate::promptgen::RenderedPrompt;

/// Backend id under which human-written paragraphs enter the measurement
/// pipeline.
pub const HUMAN_BACKEND_ID: &str = "human";
/// Conditions of the human writing study, in the order they are shown.
pub const COMPOSE_CONFIGS: [&str; 2] = ["6+A", "6+A+IF+E"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeItem {
    pub compose_id: String,
    pub instance_id: String,
    /// Position within the instance's sequence, starting at 0.
    pub step: usize,
    pub config: String,
    pub system_text: String,
    pub user_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanGeneration {
    pub compose_id: String,
    pub instance_id: String,
    pub config: String,
    pub annotator_id: String,
    pub text: String,
    pub submitted_at: String,
}

/// Compose items for every instance that has prompts for both study
/// conditions. Instances missing one are skipped.
pub fn compose_items(prompts: &[RenderedPrompt]) -> Vec<ComposeItem> {
    let mut by_instance: BTreeMap<&str, [Option<&RenderedPrompt>; 2]> = BTreeMap::new();
    for p in prompts {
        let label = p.config.to_string();
        if let Some(step) = COMPOSE_CONFIGS.iter().position(|c| *c == label) {
            by_instance.entry(p.instance_id.as_str()).or_default()[step] = Some(p);
        }
    }
    let mut out = Vec::new();
    for (inst, steps) in by_instance {
        let [Some(a), Some(b)] = steps else { continue };
        for (step, p) in [a, b].into_iter().enumerate() {
            out.push(ComposeItem {
                compose_id: format!("compose-{:03}", out.len() + 1),
                instance_id: inst.to_string(),
                step,
                config: COMPOSE_CONFIGS[step].to_string(),
                system_text: p.system_text.clone(),
                user_text: p.user_text.clone(),
            });
        }
    }
    out
}

/// Earlier steps of the same instance must be written first, so the
/// intent-bearing condition never precedes the plain one.
pub fn check_compose_order(
    items: &[ComposeItem],
    done: &[HumanGeneration],
    annotator_id: &str,
    compose_id: &str,
) -> Result<()> {
    let item = items
        .iter()
        .find(|i| i.compose_id == compose_id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown compose item {compose_id}")))?;
    for earlier in items
        .iter()
        .filter(|i| i.instance_id == item.instance_id && i.step < item.step)
    {
        if !done
            .iter()
            .any(|h| h.compose_id == earlier.compose_id && h.annotator_id == annotator_id)
        {
            return Err(Error::InvalidInput(format!(
                "{} must be written before {compose_id}",
                earlier.compose_id
            )));
        }
    }
    Ok(())
}

/// Measurement inputs for human paragraphs; the latest submission per
/// (compose item, annotator) is used. The source of each paragraph is the
/// prompt text of its compose item.
pub fn human_measure_inputs(
    generations: &[HumanGeneration],
    items: &[ComposeItem],
    references: &BTreeMap<String, String>,
) -> Result<Vec<MeasureInput>> {
    let mut latest: BTreeMap<(&str, &str), &HumanGeneration> = BTreeMap::new();
    for g in generations {
        latest.insert((&g.compose_id, &g.annotator_id), g);
    }
    latest
        .into_values()
        .map(|g| {
            let missing = |what: &str| Error::InvalidInput(format!("no {what} for {}", g.instance_id));
            let item = items
                .iter()
                .find(|i| i.compose_id == g.compose_id)
                .ok_or_else(|| missing("compose item"))?;
            Ok(MeasureInput {
                instance_id: g.instance_id.clone(),
                config: g.config.clone(),
                backend_id: format!("{HUMAN_BACKEND_ID}:{}", g.annotator_id),
                source: format!("{}\n{}", item.system_text, item.user_text).trim().to_string(),
                output: g.text.clone(),
                reference: references.get(&g.instance_id).ok_or_else(|| missing("reference"))?.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::promptgen::PromptConfig;

    fn prompt(cfg: &str, inst: &str) -> RenderedPrompt {
        RenderedPrompt {
            system_text: String::new(),
            user_text: format!("{cfg} {inst}"),
            config: cfg.parse::<PromptConfig>().unwrap(),
            instance_id: inst.into(),
            token_estimate: 2,
        }
    }

    #[test]
    fn items_pair_conditions_in_order() {
        let prompts = vec![
            prompt("6+A+IF+E", "i1"),
            prompt("6+A", "i1"),
            prompt("6+A", "i2"),
            prompt("1+A", "i3"),
        ];
        let items = compose_items(&prompts);
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].config, "6+A");
        assert_eq!(items[1].config, "6+A+IF+E");
        assert_eq!(items[1].step, 1);

        let mut done = Vec::new();
        assert!(check_compose_order(&items, &done, "ann", "compose-002").is_err());
        assert!(check_compose_order(&items, &done, "ann", "compose-001").is_ok());
        done.push(HumanGeneration {
            compose_id: "compose-001".into(),
            instance_id: "i1".into(),
            config: "6+A".into(),
            annotator_id: "ann".into(),
            text: "x".into(),
            submitted_at: "t".into(),
        });
        assert!(check_compose_order(&items, &done, "ann", "compose-002").is_ok());
        assert!(check_compose_order(&items, &done, "other", "compose-002").is_err());
    }

    #[test]
    fn measure_inputs_use_the_step_prompt_and_latest_text() {
        let items = compose_items(&[prompt("6+A", "i1"), prompt("6+A+IF+E", "i1")]);
        let gen = |id: &str, cfg: &str, text: &str| HumanGeneration {
            compose_id: id.into(),
            instance_id: "i1".into(),
            config: cfg.into(),
            annotator_id: "ann".into(),
            text: text.into(),
            submitted_at: "t".into(),
        };
        let gens = vec![
            gen("compose-001", "6+A", "first draft"),
            gen("compose-001", "6+A", "final"),
            gen("compose-002", "6+A+IF+E", "with intent"),
        ];
        let refs = BTreeMap::from([("i1".to_string(), "gold".to_string())]);
        let inputs = human_measure_inputs(&gens, &items, &refs).unwrap();
        assert_eq!(inputs.len(), 2);
        assert_eq!(inputs[0].output, "final");
        assert_eq!(inputs[0].source, "6+A i1");
        assert_eq!(inputs[1].source, "6+A+IF+E i1");
        assert_eq!(inputs[1].backend_id, "human:ann");
        assert!(human_measure_inputs(&gens, &items, &BTreeMap::new()).is_err());
    }
}
