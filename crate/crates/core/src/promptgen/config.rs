use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const TEMPLATE_COUNT: u8 = 6;

/// Which kind of citation intent, if any, goes into the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentChoice {
    None,
    Categorical,
    FreeForm,
}

/// The input components of a configuration, without the template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComponentSet {
    pub use_abstracts: bool,
    pub intent: IntentChoice,
    pub use_example: bool,
}

impl ComponentSet {
    /// The six component sets of the study, in table order.
    pub fn study_sets() -> Vec<ComponentSet> {
        ["A", "A+E", "A+IC", "A+IF", "A+IC+E", "A+IF+E"]
            .iter()
            .map(|s| s.parse().expect("static component set"))
            .collect()
    }
}

impl fmt::Display for ComponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.use_abstracts {
            parts.push("A");
        }
        match self.intent {
            IntentChoice::None => {}
            IntentChoice::Categorical => parts.push("IC"),
            IntentChoice::FreeForm => parts.push("IF"),
        }
        if self.use_example {
            parts.push("E");
        }
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for ComponentSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('+');
        let tokens: Vec<&str> = if trimmed.is_empty() {
            Vec::new()
        } else {
            trimmed.split('+').collect()
        };
        parse_components(s, &tokens)
    }
}

fn parse_components(spec: &str, tokens: &[&str]) -> Result<ComponentSet> {
    let bad = |reason: &str| Error::ConfigSpec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let mut set = ComponentSet {
        use_abstracts: false,
        intent: IntentChoice::None,
        use_example: false,
    };
    let mut seen_intent = None;
    for tok in tokens {
        match tok.trim() {
            "A" if !set.use_abstracts => set.use_abstracts = true,
            "E" if !set.use_example => set.use_example = true,
            "IC" | "IF" => {
                let kind = if tok.trim() == "IC" {
                    IntentChoice::Categorical
                } else {
                    IntentChoice::FreeForm
                };
                match seen_intent {
                    None => {
                        seen_intent = Some(kind);
                        set.intent = kind;
                    }
                    Some(prev) if prev == kind => return Err(bad("component repeated")),
                    Some(_) => return Err(bad("+IC and +IF are mutually exclusive")),
                }
            }
            "A" | "E" => return Err(bad("component repeated")),
            "" => return Err(bad("empty component")),
            other => return Err(bad(&format!("unknown component {other:?}"))),
        }
    }
    Ok(set)
}

/// Template id plus input components, written `#(+A)(+IC|+IF)(+E)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PromptConfig {
    pub template_id: u8,
    pub use_abstracts: bool,
    pub intent: IntentChoice,
    pub use_example: bool,
}

impl PromptConfig {
    pub fn new(template_id: u8, components: ComponentSet) -> Result<Self> {
        if !(1..=TEMPLATE_COUNT).contains(&template_id) {
            return Err(Error::ConfigSpec {
                spec: format!("{template_id}+{components}"),
                reason: format!("template id must be in 1..={TEMPLATE_COUNT}"),
            });
        }
        Ok(PromptConfig {
            template_id,
            use_abstracts: components.use_abstracts,
            intent: components.intent,
            use_example: components.use_example,
        })
    }

    pub fn components(&self) -> ComponentSet {
        ComponentSet {
            use_abstracts: self.use_abstracts,
            intent: self.intent,
            use_example: self.use_example,
        }
    }

    pub fn uses_intent(&self) -> bool {
        self.intent != IntentChoice::None
    }
}

impl fmt::Display for PromptConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let comps = self.components().to_string();
        if comps.is_empty() {
            write!(f, "{}", self.template_id)
        } else {
            write!(f, "{}+{}", self.template_id, comps)
        }
    }
}

impl FromStr for PromptConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = s.trim();
        let digits: String = spec.chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            return Err(Error::ConfigSpec {
                spec: s.to_string(),
                reason: "must start with a template id".into(),
            });
        }
        let rest = &spec[digits.len()..];
        let tokens: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else if let Some(stripped) = rest.strip_prefix('+') {
            stripped.split('+').collect()
        } else {
            return Err(Error::ConfigSpec {
                spec: s.to_string(),
                reason: "components must be introduced with '+'".into(),
            });
        };
        let id: u8 = digits.parse().map_err(|_| Error::ConfigSpec {
            spec: s.to_string(),
            reason: "template id out of range".into(),
        })?;
        PromptConfig::new(id, parse_components(s, &tokens)?)
    }
}

impl Serialize for PromptConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Cross product of templates and component sets, template-major.
pub fn enumerate_run_matrix(templates: &[u8], sets: &[ComponentSet]) -> Result<Vec<PromptConfig>> {
    let mut out = Vec::with_capacity(templates.len() * sets.len());
    for &t in templates {
        for set in sets {
            out.push(PromptConfig::new(t, *set)?);
        }
    }
    Ok(out)
}

/// The study's 6 × 6 matrix.
pub fn default_run_matrix() -> Vec<PromptConfig> {
    let templates: Vec<u8> = (1..=TEMPLATE_COUNT).collect();
    enumerate_run_matrix(&templates, &ComponentSet::study_sets()).expect("static matrix")
}
